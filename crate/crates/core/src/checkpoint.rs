//! Binary container for weights, masks and liveness bitmaps.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GLTCKPT\0"
//! version  u32      1
//! count    u32      number of records
//! record*  kind u8 (1 = f32 tensor, 2 = bitmap)
//!          name_len u16, name (UTF-8)
//!          rows u32, cols u32
//!          payload: rows*cols f32 values, or ceil(rows*cols / 8) bytes
//!                   with entry k at bit (k % 8) of byte k / 8
//! ```

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{GltError, Result};
use crate::glt::TicketMasks;
use crate::graph::EdgeMask;
use crate::model::{GcnParams, WeightMask, Weights};

pub const MAGIC: &[u8; 8] = b"GLTCKPT\0";
pub const VERSION: u32 = 1;

const KIND_TENSOR: u8 = 1;
const KIND_BITMAP: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Tensor(Tensor<f32>),
    Bitmap { rows: usize, cols: usize, bits: Vec<bool> },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    records: Vec<(String, Record)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_tensor(&mut self, name: &str, t: Tensor<f32>) {
        self.records.push((name.to_string(), Record::Tensor(t)));
    }

    pub fn push_bitmap(&mut self, name: &str, rows: usize, cols: usize, bits: Vec<bool>) {
        debug_assert_eq!(bits.len(), rows * cols);
        self.records.push((name.to_string(), Record::Bitmap { rows, cols, bits }));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<f32>> {
        match self.get(name) {
            Some(Record::Tensor(t)) => Ok(t),
            _ => Err(GltError::Contract(format!("checkpoint has no tensor {name:?}"))),
        }
    }

    pub fn bitmap(&self, name: &str) -> Result<&[bool]> {
        match self.get(name) {
            Some(Record::Bitmap { bits, .. }) => Ok(bits),
            _ => Err(GltError::Contract(format!("checkpoint has no bitmap {name:?}"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, rec) in &self.records {
            let (kind, rows, cols) = match rec {
                Record::Tensor(t) => (KIND_TENSOR, t.rows(), t.cols()),
                Record::Bitmap { rows, cols, .. } => (KIND_BITMAP, *rows, *cols),
            };
            out.push(kind);
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(rows as u32).to_le_bytes());
            out.extend_from_slice(&(cols as u32).to_le_bytes());
            match rec {
                Record::Tensor(t) => {
                    for v in t.as_slice() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Record::Bitmap { bits, .. } => {
                    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
                    for (k, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
                        bytes[k / 8] |= 1 << (k % 8);
                    }
                    out.extend_from_slice(&bytes);
                }
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { path, bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(r.err("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(&format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let kind = r.take(1)?[0];
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.err("record name is not UTF-8"))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| r.err("record dimensions overflow"))?;
            let rec = match kind {
                KIND_TENSOR => {
                    let raw = r.take(len.checked_mul(4).ok_or_else(|| r.err("record too large"))?)?;
                    let data = raw
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect();
                    Record::Tensor(Tensor::from_vec(rows, cols, data)?)
                }
                KIND_BITMAP => {
                    let raw = r.take(len.div_ceil(8))?;
                    let bits = (0..len).map(|k| raw[k / 8] >> (k % 8) & 1 == 1).collect();
                    Record::Bitmap { rows, cols, bits }
                }
                other => return Err(r.err(&format!("unknown record kind {other}"))),
            };
            records.push((name, rec));
        }
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes after last record"));
        }
        Ok(Checkpoint { records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| GltError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| GltError::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

struct Reader<'b> {
    path: &'b Path,
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Reader<'b> {
    fn err(&self, msg: &str) -> GltError {
        GltError::format(self.path, 0, format!("byte {}: {msg}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'b [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err("unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn push_weights(ck: &mut Checkpoint, prefix: &str, w: &Weights<f32>) {
    for l in 0..2 {
        ck.push_tensor(&format!("{prefix}theta{l}"), w.theta[l].clone());
        if let Some(b) = &w.bias[l] {
            ck.push_tensor(&format!("{prefix}bias{l}"), b.clone());
        }
    }
}

fn read_weights(ck: &Checkpoint, prefix: &str) -> Result<Weights<f32>> {
    let theta = [ck.tensor(&format!("{prefix}theta0"))?.clone(), ck.tensor(&format!("{prefix}theta1"))?.clone()];
    let bias = [0, 1].map(|l| ck.tensor(&format!("{prefix}bias{l}")).ok().cloned());
    Ok(Weights { theta, bias })
}

/// Live weights, their snapshot, and optionally the masks.
pub fn save_model(
    path: &Path,
    params: &GcnParams<f32>,
    edge_mask: Option<&EdgeMask<f32>>,
    weight_mask: Option<&WeightMask<f32>>,
) -> Result<()> {
    let mut ck = Checkpoint::new();
    push_weights(&mut ck, "", &params.live);
    push_weights(&mut ck, "snapshot/", params.snapshot());
    if let Some(m) = weight_mask {
        for l in 0..2 {
            ck.push_tensor(&format!("mask/theta{l}"), m.values[l].clone());
            let (r, c) = m.values[l].shape();
            ck.push_bitmap(&format!("alive/theta{l}"), r, c, m.alive[l].clone());
        }
    }
    if let Some(m) = edge_mask {
        ck.push_tensor("mask/edges", Tensor::from_vec(m.len(), 1, m.values.clone())?);
        ck.push_bitmap("alive/edges", m.len(), 1, m.alive.clone());
    }
    ck.write(path)
}

pub struct LoadedModel {
    pub params: GcnParams<f32>,
    pub edge_mask: Option<EdgeMask<f32>>,
    pub weight_mask: Option<WeightMask<f32>>,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let ck = Checkpoint::read(path)?;
    let params = GcnParams::from_parts(read_weights(&ck, "")?, read_weights(&ck, "snapshot/")?)?;
    let weight_mask = match ck.tensor("mask/theta0") {
        Ok(m0) => Some(WeightMask {
            values: [m0.clone(), ck.tensor("mask/theta1")?.clone()],
            alive: [ck.bitmap("alive/theta0")?.to_vec(), ck.bitmap("alive/theta1")?.to_vec()],
        }),
        Err(_) => None,
    };
    let edge_mask = match ck.tensor("mask/edges") {
        Ok(m) => Some(EdgeMask {
            values: m.as_slice().to_vec(),
            alive: ck.bitmap("alive/edges")?.to_vec(),
        }),
        Err(_) => None,
    };
    Ok(LoadedModel {
        params,
        edge_mask,
        weight_mask,
    })
}

/// Binary ticket masks (liveness over the original edges and weights).
pub fn save_ticket(path: &Path, ticket: &TicketMasks, params: &GcnParams<f32>) -> Result<()> {
    let dims = params.dims();
    let edges = EdgeMask::<f32>::from_alive(ticket.edge_alive.clone());
    let weights = WeightMask::<f32>::from_alive(dims, ticket.weight_alive.clone())?;
    let mut rewound = params.clone();
    rewound.rewind();
    save_model(path, &rewound, Some(&edges), Some(&weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GcnDims;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut params = GcnParams::<f32>::init(GcnDims::new(5, 3, 2), true, 4).unwrap();
        params.live.theta[1].as_mut_slice()[0] = 42.0;
        let mut wm = WeightMask::<f32>::ones(params.dims());
        wm.alive[0][3] = false;
        wm.values[0].as_mut_slice()[3] = 0.0;
        wm.values[1].as_mut_slice()[1] = 0.25;
        let em = EdgeMask {
            values: vec![0.5, 0.0, 1.0, 0.75, 1.0, 1.0, 1.0, 1.0, 0.0],
            alive: vec![true, false, true, true, true, true, true, true, false],
        };
        save_model(&path, &params, Some(&em), Some(&wm)).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.edge_mask.unwrap(), em);
        assert_eq!(back.weight_mask.unwrap(), wm);
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new("x.ckpt");
        assert!(matches!(Checkpoint::from_bytes(p, b"NOTACKPT\x01\0\0\0\0\0\0\0"), Err(GltError::Format { .. })));
        let mut ck = Checkpoint::new();
        ck.push_tensor("a", Tensor::filled(2, 2, 1.0));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(p, &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(p, &extra).is_err());
        assert_eq!(Checkpoint::from_bytes(p, &bytes).unwrap(), ck);
    }

    #[test]
    fn header_layout() {
        let mut ck = Checkpoint::new();
        ck.push_bitmap("b", 1, 10, (0..10).map(|k| k % 3 == 0).collect());
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(bytes[16], KIND_BITMAP);
        // bits 0, 3, 6, 9 set
        assert_eq!(&bytes[bytes.len() - 2..], &[0b0100_1001, 0b0000_0010]);
    }
}
