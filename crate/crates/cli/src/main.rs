//! `byzcount`: generate graphs, run counting experiments, sweep parameter
//! grids and summarize node-level output.

mod analyze;
mod stats;
mod sweep;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use byzcount::baseline::{run_support_estimation, BaselineSummary};
use byzcount::engine::{run_trial, write_node_csv, EngineError, ExperimentConfig, ExperimentResult};
use byzcount::graph::{augment_small_world, generate_h_graph, place_byzantine, write_graph, GraphError, NodeSet};
use byzcount::protocol::Color;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "BYZCOUNT_OUT";
const DEFAULT_OUT: &str = "results";

#[derive(Parser)]
#[command(name = "byzcount", version, about = "Byzantine counting experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a random H(n, d) graph as an edge list.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config, writing nodes.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long, value_enum, default_value_t = Protocol::Counting)]
        protocol: Protocol,
        /// Value Byzantine nodes inject under the baseline protocol.
        #[arg(long)]
        byz_value: Option<Color>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run every cell of a parameter grid, writing one aggregate row per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `out` field of the sweep file.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Per-trial estimate statistics from a nodes.csv file.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    Counting,
    Baseline,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 2,
            Failure::Config(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

pub fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Graph(GraphError::Io(e)) => Failure::Io(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| {
        if e.is_io() {
            Failure::Io(format!("{}: {e}", path.display()))
        } else {
            Failure::Config(format!("{}: {e}", path.display()))
        }
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// First line of every CSV we write: the resolved config as a comment.
pub fn write_config_comment<W: Write, T: serde::Serialize>(w: &mut W, cfg: &T) -> Result<(), Failure> {
    let json = serde_json::to_string(cfg).map_err(|e| Failure::Internal(e.to_string()))?;
    writeln!(w, "# {json}").map_err(|e| Failure::Io(e.to_string()))
}

/// Checks that every result must pass; a failure is a bug, not bad input.
pub fn check_invariants(r: &ExperimentResult) -> Result<(), Failure> {
    let m = &r.metrics;
    let problems = [
        (
            r.messages_total != r.messages_delivered + r.messages_dropped,
            "sent != delivered + dropped",
        ),
        (
            !(0.0..=1.0).contains(&m.success_fraction),
            "success fraction outside [0, 1]",
        ),
        (
            r.per_phase.iter().map(|p| p.rounds).sum::<u64>() != r.rounds_total,
            "per-phase rounds do not add up",
        ),
        (
            m.crashed_honest + m.deciders + m.non_deciders != m.honest,
            "honest node counts do not add up",
        ),
    ];
    match problems.iter().find(|(bad, _)| *bad) {
        Some((_, what)) => Err(Failure::Internal(format!("trial {}: {what}", r.trial))),
        None => Ok(()),
    }
}

fn cmd_gen(n: usize, d: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let g = generate_h_graph(n, d, seed).map_err(|e| Failure::Config(e.to_string()))?;
    g.validate().map_err(|e| Failure::Internal(e.to_string()))?;
    let mut w = create(out)?;
    write_graph(&g, &mut w).map_err(|e| match e {
        GraphError::Io(e) => Failure::Io(e.to_string()),
        e => Failure::Internal(e.to_string()),
    })?;
    w.flush().map_err(io_err(out))?;
    eprintln!("wrote {} edges to {}", g.edges().len(), out.display());
    Ok(())
}

fn resolve(config: &Path, seed: Option<u64>, trials: Option<u32>) -> Result<ExperimentConfig, Failure> {
    let mut cfg: ExperimentConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<u32>,
    protocol: Protocol,
    byz_value: Option<Color>,
    dry_run: bool,
) -> Result<(), Failure> {
    let cfg = resolve(config, seed, trials)?;
    if dry_run {
        println!(
            "{}",
            serde_json::to_string_pretty(&cfg).map_err(|e| Failure::Internal(e.to_string()))?
        );
        return Ok(());
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    if protocol == Protocol::Baseline {
        return run_baseline(&cfg, out, byz_value);
    }
    let results: Vec<ExperimentResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&cfg, t).map_err(Failure::from))
        .collect::<Result<_, _>>()?;
    for r in &results {
        check_invariants(r)?;
    }
    let nodes = out.join("nodes.csv");
    let mut w = create(&nodes)?;
    write_config_comment(&mut w, &cfg)?;
    write_node_csv(
        &mut w,
        results
            .iter()
            .flat_map(|r| r.per_node.iter().map(move |x| (r.trial, x))),
    )?;
    let summary = out.join("summary.json");
    let w = create(&summary)?;
    serde_json::to_writer_pretty(w, &results).map_err(|e| Failure::Io(e.to_string()))?;
    let agg = out.join("aggregate.csv");
    let mut w = create(&agg)?;
    write_config_comment(&mut w, &cfg)?;
    let mut table = csv::Writer::from_writer(&mut w);
    table.serialize(sweep::aggregate_row(0, &cfg, &results, "ok".into()))?;
    table.flush().map_err(io_err(&agg))?;
    for r in &results {
        eprintln!(
            "trial {}: success {:.3}, rounds {}, messages {}, status {:?}",
            r.trial, r.metrics.success_fraction, r.rounds_total, r.messages_total, r.status
        );
    }
    Ok(())
}

fn run_baseline(cfg: &ExperimentConfig, out: &Path, byz_value: Option<Color>) -> Result<(), Failure> {
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for trial in 0..cfg.trials {
        let seed = cfg.trial_seed(trial);
        let topo = augment_small_world(generate_h_graph(cfg.n, cfg.d, seed).map_err(EngineError::from)?);
        let byz = match cfg.delta {
            Some(delta) => place_byzantine(cfg.n, cfg.d, delta, seed).map_err(EngineError::from)?,
            None => NodeSet::empty(cfg.n),
        };
        let est = run_support_estimation(&topo, &byz, byz_value, cfg.n as u32, seed);
        summaries.push(BaselineSummary::new(&topo, &byz, byz_value, seed, &est));
        rows.extend(est.rows(&byz).into_iter().map(|r| (trial, r)));
    }
    let nodes = out.join("nodes.csv");
    let mut w = create(&nodes)?;
    write_config_comment(&mut w, cfg)?;
    write_node_csv(&mut w, rows.iter().map(|(t, r)| (*t, r)))?;
    let summary = out.join("summary.json");
    let doc = serde_json::json!({ "protocol": "baseline", "config": cfg, "trials": summaries });
    serde_json::to_writer_pretty(create(&summary)?, &doc).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Gen { n, d, seed, out } => cmd_gen(n, d, seed, &out),
        Cmd::Run {
            config,
            out,
            seed,
            trials,
            protocol,
            byz_value,
            dry_run,
        } => cmd_run(&config, &out, seed, trials, protocol, byz_value, dry_run),
        Cmd::Sweep {
            config,
            out,
            seed,
            trials,
            dry_run,
        } => sweep::cmd_sweep(&config, out.as_deref(), seed, trials, dry_run),
        Cmd::Analyze { config, out } => analyze::cmd_analyze(&config, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
