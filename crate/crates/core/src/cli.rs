//! Command-line interface.
//!
//! Every command is deterministic given its flags and input files. Results go
//! to stdout as JSON (or CSV for tables); failures print one JSON object to
//! stderr and exit with 2 for invalid input or 3 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::data::{evaluate, generate_sbm, load_dataset, save_dataset, Dataset, FeatureFormat, Pipeline, SbmSpec};
use crate::error::{Error, Result};
use crate::forget::ForgetRequest;
use crate::model::{Model, ModelConfig};
use crate::numerics::kernel::DEFAULT_CHUNK;
use crate::numerics::mat::softmax_rows;
use crate::numerics::Precision;
use crate::router::{route, RoutingDecision, DEFAULT_TAU};
use crate::sweep::{run_sweep, SweepConfig, SweepReport};
use crate::unlearn::{audit, bench_unlearn, unlearn, write_bench_csv, BenchGrid, Strategy};

fn parse_pipeline(s: &str) -> std::result::Result<Pipeline, String> {
    match s {
        "A" | "a" => Ok(Pipeline::A),
        "B" | "b" => Ok(Pipeline::B),
        _ => Err(format!("unknown pipeline {s:?} (A or B)")),
    }
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "cfgraph", version, about = "Closed-form node classification with exact graph unlearning")]
pub struct Cli {
    /// Adjusted-homophily threshold for routing.
    #[arg(long, global = true, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Storage precision of features and weights (fp32 or fp64).
    #[arg(long, global = true, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    /// Seed for every random stream the command uses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Query rows per kernel block.
    #[arg(long, global = true, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
    /// Unlearning strategy (khop, full or retrain).
    #[arg(long, global = true, value_parser = parse_strategy, default_value = "khop")]
    pub strategy: Strategy,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute training-graph adjusted homophily and pick a pipeline.
    Route {
        dataset: PathBuf,
        /// Hand-assign the pipeline instead of computing it.
        #[arg(long, value_parser = parse_pipeline)]
        pipeline: Option<Pipeline>,
    },
    /// Route, sweep the pipeline's grid, select on validation and save the model to --out.
    Fit {
        dataset: PathBuf,
        /// Sweep grid (TOML). Defaults to the built-in grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_pipeline)]
        pipeline: Option<Pipeline>,
        /// Where to write the sweep report; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write class probabilities of every live node as CSV.
    Predict { model: PathBuf, dataset: PathBuf },
    /// Score a model on one split.
    Eval {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
    },
    /// Apply a forget request (JSON) and save the updated model to --out.
    Unlearn {
        model: PathBuf,
        dataset: PathBuf,
        request: PathBuf,
        /// Also write the modified dataset here.
        #[arg(long)]
        out_dataset: Option<PathBuf>,
    },
    /// Unlearn with --strategy, retrain from scratch, and compare.
    VerifyExact {
        model: PathBuf,
        dataset: PathBuf,
        request: PathBuf,
    },
    /// Time the K-hop, full and retrain paths over a forget grid.
    BenchUnlearn {
        /// Dataset directory; or use --sbm.
        dataset: Option<PathBuf>,
        /// SBM specification (TOML) to generate instead of loading.
        #[arg(long, conflicts_with = "dataset")]
        sbm: Option<PathBuf>,
        /// Forget grid (TOML): kinds, sizes, repeats.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Model configuration (TOML with `pipeline = "A"` or `"B"`). Defaults to Pipeline A.
        #[arg(long)]
        model_config: Option<PathBuf>,
    },
    /// Generate a stochastic-block-model dataset into --out.
    GenSynth {
        /// SBM specification (TOML); the flags below are used otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0.05)]
        p_in: f64,
        #[arg(long, default_value_t = 0.005)]
        p_out: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        sep: f64,
        /// Write features as text instead of binary.
        #[arg(long)]
        text: bool,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn report_error(e: &Error) {
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
}

fn out_path(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| Error::InvalidConfig(format!("--out is required for {what}")))
}

fn write_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_request(path: &Path) -> Result<ForgetRequest> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn load_with_override(dir: &Path, pipeline: Option<Pipeline>) -> Result<Dataset> {
    let mut ds = load_dataset(dir)?;
    if pipeline.is_some() {
        ds.pipeline_override = pipeline;
    }
    Ok(ds)
}

#[derive(Serialize)]
struct FitReport<'a> {
    routing: &'a RoutingDecision,
    sweep: &'a SweepReport,
}

/// Runs a parsed command, writing results to `out`. Returns the exit code.
pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<i32> {
    match &cli.command {
        Command::Route { dataset, pipeline } => {
            let ds = load_with_override(dataset, *pipeline)?;
            write_json(out, &route(&ds, cli.tau)?)?;
        }
        Command::Fit {
            dataset,
            config,
            pipeline,
            report,
        } => {
            let model_path = out_path(cli, "fit")?;
            let ds = load_with_override(dataset, *pipeline)?;
            let decision = route(&ds, cli.tau)?;
            let mut grid = match config {
                Some(p) => SweepConfig::load(p)?,
                None => SweepConfig::default(),
            };
            if let Some(p) = cli.precision {
                grid.precision = p;
            }
            if let (Some(seed), Some(rff)) = (cli.seed, grid.pipeline_a.rff.as_mut()) {
                rff.seed = seed;
            }
            let (model, sweep) = run_sweep(&ds, &grid, decision.pipeline)?;
            model.save(&model_path)?;
            let r = FitReport {
                routing: &decision,
                sweep: &sweep,
            };
            match report {
                Some(p) => std::fs::write(p, serde_json::to_vec_pretty(&r)?)?,
                None => write_json(out, &r)?,
            }
        }
        Command::Predict { model, dataset } => {
            let m = Model::load(model)?;
            let ds = load_dataset(dataset)?;
            let p = softmax_rows(&m.predict_chunked(&ds, cli.chunk)?);
            let mut text = String::new();
            text.push_str("node");
            for j in 0..p.cols() {
                text.push_str(&format!(",p{j}"));
            }
            text.push('\n');
            for v in (0..ds.n()).filter(|&v| !ds.graph.is_deleted(v)) {
                text.push_str(&v.to_string());
                for x in p.row(v) {
                    text.push_str(&format!(",{x}"));
                }
                text.push('\n');
            }
            match &cli.out {
                Some(path) => std::fs::write(path, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Eval { model, dataset, split } => {
            let m = Model::load(model)?;
            let ds = load_dataset(dataset)?;
            let mask = match split {
                SplitName::Train => &ds.train,
                SplitName::Val => &ds.val,
                SplitName::Test => &ds.test,
            };
            let value = evaluate(&m.predict_chunked(&ds, cli.chunk)?, &ds, mask)?;
            let split = format!("{split:?}").to_lowercase();
            write_json(out, &json!({ "dataset": ds.name, "metric": ds.metric, "split": split, "value": value }))?;
        }
        Command::Unlearn {
            model,
            dataset,
            request,
            out_dataset,
        } => {
            let model_path = out_path(cli, "unlearn")?;
            let m = Model::load(model)?;
            let ds = load_dataset(dataset)?;
            let req = read_request(request)?;
            let outcome = unlearn(&m, &ds, &req, cli.strategy)?;
            outcome.model.save(&model_path)?;
            if let Some(dir) = out_dataset {
                save_dataset(&outcome.dataset, dir, FeatureFormat::Binary)?;
            }
            write_json(out, &outcome.report)?;
        }
        Command::VerifyExact { model, dataset, request } => {
            let m = Model::load(model)?;
            let ds = load_dataset(dataset)?;
            let req = read_request(request)?;
            let outcome = audit(&m, &ds, &req, cli.strategy)?;
            write_json(out, &outcome.report)?;
            let tol = m.precision().tolerance();
            let delta = outcome.report.delta_theta.unwrap_or(f64::INFINITY);
            if delta > tol {
                eprintln!(
                    "{}",
                    json!({
                        "error": "NotExact",
                        "message": format!("parameter difference {delta:e} exceeds tolerance {tol:e}"),
                    })
                );
                return Ok(3);
            }
        }
        Command::BenchUnlearn {
            dataset,
            sbm,
            grid,
            model_config,
        } => {
            let ds = match (dataset, sbm) {
                (Some(d), _) => load_dataset(d)?,
                (None, Some(s)) => {
                    let mut spec: SbmSpec = read_toml(s)?;
                    if let Some(seed) = cli.seed {
                        spec.seed = seed;
                    }
                    generate_sbm(&spec)?
                }
                (None, None) => return Err(Error::InvalidConfig("give a dataset directory or --sbm".into())),
            };
            let mut grid: BenchGrid = match grid {
                Some(p) => read_toml(p)?,
                None => BenchGrid::default(),
            };
            if let Some(seed) = cli.seed {
                grid.seed = seed;
            }
            let mut cfg: ModelConfig = match model_config {
                Some(p) => read_toml(p)?,
                None => ModelConfig::A(Default::default()),
            };
            if let Some(p) = cli.precision {
                cfg.set_precision(p);
            }
            cfg.validate()?;
            let rows = bench_unlearn(&ds, &cfg, &grid)?;
            match &cli.out {
                Some(p) => write_bench_csv(&rows, std::fs::File::create(p)?)?,
                None => write_bench_csv(&rows, &mut *out)?,
            }
        }
        Command::GenSynth {
            spec,
            n,
            classes,
            p_in,
            p_out,
            dim,
            sep,
            text,
        } => {
            let dir = out_path(cli, "gen-synth")?;
            let mut spec = match spec {
                Some(p) => read_toml(p)?,
                None => SbmSpec {
                    n: *n,
                    num_classes: *classes,
                    p_in: *p_in,
                    p_out: *p_out,
                    feature_dim: *dim,
                    class_mean_separation: *sep,
                    seed: 0,
                },
            };
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let ds = generate_sbm(&spec)?;
            let format = if *text { FeatureFormat::Text } else { FeatureFormat::Binary };
            save_dataset(&ds, &dir, format)?;
            write_json(
                out,
                &json!({ "name": ds.name, "n": ds.n(), "edges": ds.graph.num_edges(), "dir": dir }),
            )?;
        }
    }
    Ok(0)
}
