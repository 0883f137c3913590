//! Benchmark runner: builds a problem, runs the engine, writes a CSV trace.

pub mod config;
pub mod trace;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use dyntriv::manifolds::random_point_with;
use dyntriv::rng::{stream_rng, STREAM_INIT};
use dyntriv::{
    build_problem, gradcheck, Engine, EngineConfig, EngineError, OptimizerState, RunSummary,
    StopRule, TraceRecord, Trivialization,
};

pub use config::{FileConfig, RunConfig, RunFlags};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dyntriv", about = "Manifold optimization benchmarks with dynamic trivializations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one benchmark and write its loss trace
    Run(RunFlags),
    /// Compare a problem's gradient with central differences at random points
    Gradcheck {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
    },
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub summary: RunSummary,
    pub trace: Vec<TraceRecord>,
    pub rebases: u64,
    pub injectivity_violations: u64,
}

impl RunOutput {
    /// `name k=<K> triv=<kind> opt=<kind> final_loss=<v> steps=<n> membership=<v>`
    pub fn summary_line(&self) -> String {
        format!(
            "{} k={} triv={} opt={} final_loss={:.16e} steps={} membership={:.16e}",
            self.config.problem.name,
            self.config.rebase.label(),
            self.config.trivialization,
            self.config.optimizer,
            self.summary.final_loss,
            self.summary.steps,
            self.summary.final_membership,
        )
    }
}

/// A failed run with whatever trace was recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: CliError,
    pub trace: Vec<TraceRecord>,
}

impl From<CliError> for RunFailure {
    fn from(error: CliError) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

fn numerical(e: EngineError) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Runs a validated config without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunFailure> {
    let problem = build_problem(&cfg.problem).map_err(|e| CliError::Config(e.to_string()))?;
    let triv = Trivialization::new(cfg.trivialization, problem.manifold)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let start = random_point_with(&problem.manifold, &mut stream_rng(cfg.problem.seed, STREAM_INIT))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let opt = OptimizerState::new(cfg.optimizer, cfg.lr).map_err(|e| CliError::Config(e.to_string()))?;
    let engine_cfg = EngineConfig {
        rebase: cfg.rebase,
        carry_moments: cfg.carry_moments,
        trace_every: cfg.trace_every,
        injectivity_diagnostic: cfg.injectivity_diagnostic,
    };
    let mut engine = Engine::new(triv, start, opt, engine_cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let stop = StopRule {
        grad_tol: cfg.grad_tol,
        loss_tol: cfg.loss_tol,
    };
    match engine.run(&problem, cfg.max_steps, stop) {
        Ok(summary) => Ok(RunOutput {
            config: cfg.clone(),
            summary,
            trace: engine.history().to_vec(),
            rebases: engine.rebases(),
            injectivity_violations: engine.injectivity_violations(),
        }),
        Err(e) => Err(RunFailure {
            error: numerical(e),
            trace: engine.history().to_vec(),
        }),
    }
}

fn write_trace_file(cfg: &RunConfig, trace: &[TraceRecord]) -> Result<(), CliError> {
    if let Some(path) = &cfg.out {
        trace::write_csv_file(path, trace, cfg.wall_clock).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_cli_with(argv, &mut out, &mut err)
}

pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match cli.command {
        Command::Run(flags) => {
            let cfg = match RunConfig::resolve(&flags) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    if matches!(e, CliError::Usage(_)) {
                        let _ = writeln!(err, "usage: dyntriv run --problem <name> --n <size> [options]; see dyntriv run --help");
                    }
                    return e.exit_code();
                }
            };
            match execute(&cfg) {
                Ok(res) => {
                    if let Err(e) = write_trace_file(&cfg, &res.trace) {
                        let _ = writeln!(err, "{e}");
                        return e.exit_code();
                    }
                    let _ = writeln!(out, "{}", res.summary_line());
                    EXIT_OK
                }
                Err(fail) => {
                    if let Err(e) = write_trace_file(&cfg, &fail.trace) {
                        let _ = writeln!(err, "{e}");
                    }
                    let _ = writeln!(err, "{}", fail.error);
                    fail.error.exit_code()
                }
            }
        }
        Command::Gradcheck { problem, n, cols, seed, h } => {
            let flags = RunFlags {
                problem: Some(problem),
                n: Some(n),
                cols,
                seed: Some(seed),
                ..RunFlags::default()
            };
            let cfg = match RunConfig::merge(FileConfig::default(), &flags) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    return e.exit_code();
                }
            };
            let p = match build_problem(&cfg.problem) {
                Ok(p) => p,
                Err(e) => {
                    let _ = writeln!(err, "config error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let mut rng = stream_rng(seed, STREAM_INIT);
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                match random_point_with(&p.manifold, &mut rng) {
                    Ok(x) => worst = worst.max(gradcheck(&p, x.value(), h)),
                    Err(e) => {
                        let _ = writeln!(err, "numerical abort: {e}");
                        return EXIT_NUMERICAL;
                    }
                }
            }
            let optimum = p.optimum.map_or("unknown".to_string(), |v| format!("{v:.16e}"));
            let _ = writeln!(out, "{} optimum={optimum} gradcheck max_rel_err={worst:.3e}", p.name);
            EXIT_OK
        }
    }
}
