mod config;
mod experiment;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use glt_core::dataset::{import_linqs, make_link_splits, make_node_splits, read_dataset, synth_sbm, write_dataset, SbmParams};
use toml::Value;

use config::{parse_override, ExperimentConfig, Mode, TaskKind};

#[derive(Parser)]
#[command(name = "glt", version, about = "Joint graph/weight sparsification and lottery tickets for GCNs")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Portable dataset directory.
    #[arg(short, long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<TaskKind>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Hidden width 512 and the published per-task hyperparameters.
    #[arg(long)]
    paper_faithful: bool,
    /// Set any config key, e.g. `--set glt.ugs.gamma1=1e-3`.
    #[arg(long = "set", value_parser = parse_override)]
    set: Vec<(String, Value)>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TrainMode {
    Dense,
    Ugs,
}

#[derive(Subcommand)]
enum Command {
    /// Dense training, or a single mask-learning round.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "dense")]
        mode: TrainMode,
    },
    /// Iterative ticket search.
    Glt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rounds: Option<usize>,
        /// Also retrain the final ticket from a fresh random initialization.
        #[arg(long)]
        random_glt: bool,
    },
    /// Ticket search plus matched random pruning and random reinitialization.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Runs the `mode` named in the config.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Clustering, betweenness and (for a ticket) MACs.
    Analyze {
        #[arg(short, long)]
        dataset: PathBuf,
        /// Ticket or model checkpoint with an edge bitmap.
        #[arg(long)]
        ticket: Option<PathBuf>,
        /// With a link ticket, the task and seed that produced it.
        #[arg(long, value_enum, default_value = "node-classification")]
        task: TaskKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip betweenness (quadratic in the node count).
        #[arg(long)]
        no_betweenness: bool,
    },
    /// Writes seeded splits into a dataset directory.
    MakeSplits {
        #[arg(short, long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Link splits (85/5/10 with fixed negatives) instead of node splits.
        #[arg(long)]
        link: bool,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 500)]
        num_val: usize,
        #[arg(long, default_value_t = 1000)]
        num_test: usize,
    },
    /// Writes a stochastic block model graph in the portable format.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        p_in: Option<f64>,
        #[arg(long)]
        p_out: Option<f64>,
        #[arg(long)]
        feature_dim: Option<usize>,
    },
    /// Converts LINQS `.content`/`.cites` files (optionally gzipped).
    ImportLinqs {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn build_config(common: Common, extra: &[(String, Value)]) -> Result<ExperimentConfig> {
    let mut ov = Vec::new();
    if let Some(d) = common.dataset {
        ov.push(("dataset".to_string(), Value::String(d.display().to_string())));
    }
    if let Some(o) = common.out {
        ov.push(("output".to_string(), Value::String(o.display().to_string())));
    }
    if let Some(s) = common.seeds {
        ov.push(("seeds".to_string(), Value::Array(s.into_iter().map(|x| Value::Integer(x as i64)).collect())));
    }
    if let Some(h) = common.hidden {
        ov.push(("hidden".to_string(), Value::Integer(h as i64)));
    }
    ov.extend(extra.iter().cloned());
    ov.extend(common.set);
    config::load(common.config.as_deref(), common.task, common.paper_faithful, &ov)
}

fn mode_value(m: Mode) -> Value {
    Value::try_from(m).expect("mode serializes")
}

fn rounds_override(rounds: Option<usize>) -> Vec<(String, Value)> {
    rounds
        .map(|r| vec![("glt.max_rounds".to_string(), Value::Integer(r as i64))])
        .unwrap_or_default()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, mode } => {
            let mode = match mode {
                TrainMode::Dense => Mode::Dense,
                TrainMode::Ugs => Mode::Ugs,
            };
            let cfg = build_config(common, &[("mode".into(), mode_value(mode))])?;
            experiment::run(&cfg, false)?;
        }
        Command::Glt {
            common,
            rounds,
            random_glt,
        } => {
            let mode = if random_glt { Mode::RandomGlt } else { Mode::Glt };
            let mut extra = rounds_override(rounds);
            extra.push(("mode".into(), mode_value(mode)));
            let cfg = build_config(common, &extra)?;
            experiment::run(&cfg, false)?;
        }
        Command::Sweep { common, rounds } => {
            let cfg = build_config(common, &rounds_override(rounds))?;
            experiment::run(&cfg, true)?;
        }
        Command::Run { common } => {
            let cfg = build_config(common, &[])?;
            if cfg.mode == Mode::Analyze {
                let ds = experiment::load_dataset(&cfg.dataset, false)?;
                print!("{}", experiment::analyze(&ds.graph, None, true)?);
            } else {
                experiment::run(&cfg, false)?;
            }
        }
        Command::Analyze {
            dataset,
            ticket,
            task,
            seed,
            no_betweenness,
        } => {
            let ds = experiment::load_dataset(&dataset, false)?;
            let graph = match task {
                TaskKind::NodeClassification => ds.graph.clone(),
                TaskKind::LinkPrediction => {
                    let cfg = ExperimentConfig {
                        dataset: dataset.clone(),
                        ..ExperimentConfig::preset(task, false)
                    };
                    experiment::prepare(&cfg, &ds, seed)?.graph
                }
            };
            print!("{}", experiment::analyze(&graph, ticket.as_deref(), !no_betweenness)?);
        }
        Command::MakeSplits {
            dataset,
            seed,
            link,
            per_class,
            num_val,
            num_test,
        } => {
            let mut ds = read_dataset(&dataset)?;
            if link {
                ds.splits.link = Some(make_link_splits(&ds.graph, seed)?);
            } else {
                ds.splits.node = Some(make_node_splits(&ds.graph, per_class, num_val, num_test, seed)?);
            }
            ds.splits.seed = Some(seed);
            write_dataset(&dataset, &ds)?;
        }
        Command::Synth {
            out,
            seed,
            nodes,
            classes,
            p_in,
            p_out,
            feature_dim,
        } => {
            let d = SbmParams::default();
            let params = SbmParams {
                nodes: nodes.unwrap_or(d.nodes),
                classes: classes.unwrap_or(d.classes),
                p_in: p_in.unwrap_or(d.p_in),
                p_out: p_out.unwrap_or(d.p_out),
                feature_dim: feature_dim.unwrap_or(d.feature_dim),
                ..d
            };
            write_out(&out, &synth_sbm(&params, seed)?)?;
        }
        Command::ImportLinqs {
            content,
            cites,
            name,
            out,
        } => {
            let ds = import_linqs(&name, &content, &cites)?;
            write_out(&out, &ds)?;
        }
    }
    Ok(())
}

fn write_out(out: &Path, ds: &glt_core::dataset::Dataset) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_dataset(out, ds)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
