//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 on a runtime failure, 2 on a usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::{mape, read_dataset, split, synth_dataset, write_dataset, FamilyMix, MapeReport, SplitSpec};
use crate::gnn::{
    evaluate, load_model, predict, predict_record, save_model, train_with, Architecture, TrainConfig, DEFAULT_HIDDEN,
};
use crate::graph_ir::{parse_graph_json, ZooFamily};
use crate::mig::{mig_profile, MigProfile};
use crate::numerics::DEFAULT_LR;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dippm", version, about = "Predict latency, memory and energy of a computation graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Mlp,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic dataset (JSON Lines).
    Dataset {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Comma-separated families, optionally weighted: `mlp:1,vggish:2`.
        #[arg(long, default_value = "mlp,vggish,resnetish")]
        families: String,
        #[arg(long, env = "DIPPM_SEED")]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split 70/15/15, train, and write the model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: u64,
        #[arg(long, env = "DIPPM_SEED")]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LR)]
        lr: f64,
        /// Train the static-feature MLP instead of the graph model.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long, default_value_t = DEFAULT_HIDDEN, value_parser = clap::value_parser!(usize))]
        hidden: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict cost and MIG profile for one graph.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Re-run shape inference at this batch size.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        batch: Option<u64>,
    },
    /// Per-target MAPE of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictReport {
    pub latency_ms: f64,
    pub memory_mb: f64,
    pub energy_j: f64,
    pub mig: Option<MigProfile>,
    pub model_name: String,
    pub vocab_version: String,
}

#[derive(Serialize)]
struct EvalReport {
    mape: MapeReport,
    n: usize,
}

fn io_err(path: &std::path::Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::IoFailure(format!("{}: {e}", path.display()))
}

fn cmd_dataset(n: u64, families: &str, seed: u64, out: &std::path::Path, stdout: &mut dyn Write) -> Result<()> {
    let mix: FamilyMix = families.parse()?;
    let records = synth_dataset(n as usize, &mix, seed)?;
    write_dataset(&records, out)?;
    let mut histogram: BTreeMap<&str, usize> = ZooFamily::ALL.iter().map(|f| (f.name(), 0)).collect();
    for r in &records {
        let family = r.model_name.split('_').next().unwrap_or("");
        *histogram.entry(family).or_default() += 1;
    }
    let io = io_err(out);
    writeln!(stdout, "records={}", records.len()).map_err(&io)?;
    for (family, count) in histogram {
        writeln!(stdout, "family={family} count={count}").map_err(&io)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v}"))
}

fn cmd_train(
    config: &TrainConfig,
    data: &std::path::Path,
    out: &std::path::Path,
    stdout: &mut dyn Write,
) -> Result<()> {
    let records = read_dataset(data)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_set, val_set, test_set) = split(&records, &SplitSpec::standard(config.seed))?;
    let mut write_err = None;
    let outcome = train_with(&train_set, &val_set, config, |s| {
        let line = format!("epoch={} train_mape={} val_mape={}", s.epoch, s.train_mape, fmt_opt(s.val_mape));
        if let Err(e) = writeln!(stdout, "{line}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::IoFailure(e.to_string()));
    }
    save_model(&outcome.model, out)?;
    let test = if test_set.is_empty() { None } else { Some(evaluate(&outcome.model, &test_set)?.overall) };
    writeln!(stdout, "test_mape={}", fmt_opt(test)).map_err(|e| Error::IoFailure(e.to_string()))
}

pub fn predict_report(model: &crate::gnn::DippmModel, graph_json: &str, batch: Option<usize>) -> Result<PredictReport> {
    let mut graph = parse_graph_json(graph_json)?;
    if let Some(b) = batch {
        graph = graph.with_batch(b)?;
    }
    let y = predict(model, &graph)?;
    Ok(PredictReport {
        latency_ms: y.latency_ms,
        memory_mb: y.memory_mb,
        energy_j: y.energy_j,
        mig: mig_profile(y.memory_mb)?,
        model_name: graph.name.clone(),
        vocab_version: model.vocab_version.clone(),
    })
}

fn cmd_predict(
    model: &std::path::Path,
    graph: &std::path::Path,
    batch: Option<u64>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model = load_model(model)?;
    let text = std::fs::read_to_string(graph).map_err(io_err(graph))?;
    let report = predict_report(&model, &text, batch.map(|b| b as usize))?;
    let json = serde_json::to_string(&report).expect("report serializes");
    writeln!(stdout, "{json}").map_err(|e| Error::IoFailure(e.to_string()))
}

fn cmd_eval(model: &std::path::Path, data: &std::path::Path, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(model)?;
    let records = read_dataset(data)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = records.iter().map(|r| predict_record(&model, r)).collect::<Result<Vec<_>>>()?;
    let actuals: Vec<_> = records.iter().map(|r| r.target).collect();
    let report = EvalReport { mape: mape(&preds, &actuals)?, n: records.len() };
    let json = serde_json::to_string(&report).expect("report serializes");
    writeln!(stdout, "{json}").map_err(|e| Error::IoFailure(e.to_string()))
}

/// Executes a parsed command, writing results to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Dataset { n, families, seed, out } => cmd_dataset(n, &families, seed, &out, stdout),
        Command::Train { data, epochs, seed, lr, baseline, hidden, out } => {
            let config = TrainConfig {
                epochs: epochs as usize,
                lr,
                seed,
                hidden,
                architecture: match baseline {
                    Some(Baseline::Mlp) => Architecture::Mlp,
                    None => Architecture::Sage,
                },
                ..TrainConfig::default()
            };
            cmd_train(&config, &data, &out, stdout)
        }
        Command::Predict { model, graph, batch } => cmd_predict(&model, &graph, batch, stdout),
        Command::Eval { model, data } => cmd_eval(&model, &data, stdout),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::InvalidConfig(_) => 2,
                _ => 1,
            }
        }
    }
}
