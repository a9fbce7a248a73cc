//! Portable on-disk dataset format, split generation and fixture graphs.
//!
//! A dataset directory holds:
//!
//! | file          | content                                                        |
//! |---------------|----------------------------------------------------------------|
//! | `meta`        | TOML: name, node/feature/class counts, SHA-256 of features.bin |
//! | `edges.tsv`   | one `i<TAB>j` line per undirected edge, `i < j`, sorted         |
//! | `features.bin`| row-major little-endian f32, `num_nodes x num_features`        |
//! | `labels.tsv`  | `node<TAB>class`; nodes without a line are unlabeled           |
//! | `splits`      | TOML: node and/or link splits (optional file)                  |

mod linqs;
mod portable;
mod splits;
mod synth;

pub use linqs::import_linqs;
pub use portable::{read_dataset, write_dataset, Meta};
pub use splits::{make_link_splits, make_node_splits, LinkSplit, NodeSplit, SplitSpec};
pub use synth::{synth_sbm, SbmParams};

use crate::graph::{EdgeCleaning, Graph};

/// A graph together with its evaluation splits.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub splits: SplitSpec,
    /// Edge counts before cleaning, when the graph came from raw pairs.
    pub cleaning: Option<EdgeCleaning>,
}
