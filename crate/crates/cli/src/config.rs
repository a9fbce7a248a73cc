//! Experiment configuration: a TOML file layered over task presets, with
//! command-line overrides on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glt_core::glt::GltConfig;
use glt_core::ugs::UgsConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    NodeClassification,
    LinkPrediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Dense,
    Ugs,
    Glt,
    RandomPrune,
    RandomGlt,
    Analyze,
}

/// Sizes used when node splits are generated rather than read from the
/// dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSplitSizes {
    pub per_class: usize,
    pub num_val: usize,
    pub num_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub mode: Mode,
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub hidden: usize,
    /// Embedding width of the link task (node classification uses the
    /// class count).
    pub link_dim: usize,
    pub bias: bool,
    pub normalize_features: bool,
    pub node_splits: NodeSplitSizes,
    pub glt: GltConfig,
}

impl ExperimentConfig {
    pub fn preset(task: TaskKind, paper_faithful: bool) -> Self {
        let ugs = match (task, paper_faithful) {
            (TaskKind::NodeClassification, _) => UgsConfig::default(),
            (TaskKind::LinkPrediction, false) => UgsConfig::link_prediction(),
            (TaskKind::LinkPrediction, true) => UgsConfig {
                lr: 1e-3,
                mask_lr_g: 1e-3,
                mask_lr_theta: 1e-3,
                ..UgsConfig::link_prediction()
            },
        };
        let hidden = match (task, paper_faithful) {
            (_, true) => 512,
            (TaskKind::NodeClassification, false) => 16,
            (TaskKind::LinkPrediction, false) => 64,
        };
        ExperimentConfig {
            task,
            mode: Mode::Glt,
            dataset: PathBuf::new(),
            output: PathBuf::from("out"),
            seeds: vec![0, 1, 2],
            hidden,
            link_dim: 32,
            bias: true,
            normalize_features: true,
            node_splits: NodeSplitSizes {
                per_class: 20,
                num_val: 500,
                num_test: 1000,
            },
            glt: GltConfig { ugs, ..GltConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            bail!("no dataset given (set `dataset` in the config or pass --dataset)");
        }
        if !self.dataset.join("meta").is_file() {
            bail!("dataset directory {} does not exist or has no meta file", self.dataset.display());
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.hidden == 0 || self.link_dim == 0 {
            bail!("layer widths must be positive");
        }
        self.glt.validate()?;
        Ok(())
    }
}

/// Builds a config from, in increasing precedence: the task preset, the
/// file, and `overrides` (dotted keys such as `glt.ugs.lr`).
pub fn load(
    file: Option<&Path>,
    task: Option<TaskKind>,
    paper_faithful: bool,
    overrides: &[(String, Value)],
) -> Result<ExperimentConfig> {
    let file_table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            text.parse::<Table>().with_context(|| format!("{}: invalid TOML", p.display()))?
        }
        None => Table::new(),
    };
    let task = match task {
        Some(t) => t,
        None => match file_table.get("task") {
            Some(v) => v.clone().try_into().context("invalid `task`")?,
            None => TaskKind::NodeClassification,
        },
    };
    let mut table = Table::try_from(ExperimentConfig::preset(task, paper_faithful))?;
    merge(&mut table, file_table);
    table.insert("task".into(), Value::try_from(task)?);
    for (key, value) in overrides {
        set_dotted(&mut table, key, value.clone())?;
    }
    let config: ExperimentConfig = Value::Table(table).try_into().context("invalid configuration")?;
    Ok(config)
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        cur = match cur.entry(p).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => bail!("override {key:?}: {p:?} is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as a TOML value when possible and
/// as a bare string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let value = format!("v = {v}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}
