use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use dyntriv::{OptimizerKind, ProblemName, ProblemSpec, RebasePeriod, TrivKind};

use crate::CliError;

/// Rebase period as written in a config file: a positive integer or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodField {
    Steps(u64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

/// JSON form of a run. Every field is optional; flags fill or override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemFile,
    pub trivialization: Option<String>,
    pub rebase_period: Option<PeriodField>,
    pub optimizer: Option<String>,
    pub lr: Option<f64>,
    pub max_steps: Option<u64>,
    pub grad_tol: Option<f64>,
    pub loss_tol: Option<f64>,
    pub carry_moments: Option<bool>,
    pub trace_every: Option<usize>,
    pub injectivity_diagnostic: Option<bool>,
    pub wall_clock: Option<bool>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// JSON config file; flags given alongside it take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// procrustes | rayleigh | brockett | spd_recovery | hyperbolic_centroid
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem size
    #[arg(long)]
    pub n: Option<usize>,
    /// Stiefel column count (brockett)
    #[arg(long)]
    pub cols: Option<usize>,
    /// lie_exp | riemannian_exp | cayley | projector | squaring | cholesky
    #[arg(long)]
    pub triv: Option<String>,
    /// Rebase period: a positive integer or "inf"
    #[arg(long)]
    pub k: Option<String>,
    /// sgd | momentum | adagrad | rmsprop | adam
    #[arg(long)]
    pub opt: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum number of optimizer steps
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub loss_tol: Option<f64>,
    /// Keep optimizer moments across rebases
    #[arg(long)]
    pub carry_moments: bool,
    /// Keep every n-th trace row
    #[arg(long)]
    pub trace_every: Option<usize>,
    /// Count chart inputs outside the injectivity domain
    #[arg(long)]
    pub injectivity_diagnostic: bool,
    /// Write measured wall time instead of 0 in the wall_ms column
    #[arg(long)]
    pub wall_clock: bool,
    /// CSV trace path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub trivialization: TrivKind,
    pub rebase: RebasePeriod,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub max_steps: u64,
    pub grad_tol: Option<f64>,
    pub loss_tol: Option<f64>,
    pub carry_moments: bool,
    pub trace_every: usize,
    pub injectivity_diagnostic: bool,
    pub wall_clock: bool,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_STEPS: u64 = 1000;
pub const DEFAULT_SEED: u64 = 0;

fn parse_period(text: &str) -> Result<RebasePeriod, CliError> {
    if text.eq_ignore_ascii_case("inf") {
        return Ok(RebasePeriod::Never);
    }
    match text.parse::<usize>() {
        Ok(0) => Err(CliError::Config("K must be at least 1 or \"inf\"".into())),
        Ok(k) => Ok(RebasePeriod::Every(k)),
        Err(_) => Err(CliError::Config(format!(
            "K must be a positive integer or \"inf\", got {text:?}"
        ))),
    }
}

fn required<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{what}")))
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => Err(CliError::Config(format!(
            "{name} must be a non-negative number, got {x}"
        ))),
        other => Ok(other),
    }
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::merge(file, flags)
    }

    pub fn merge(file: FileConfig, flags: &RunFlags) -> Result<Self, CliError> {
        let name = required(flags.problem.clone().or(file.problem.name), "problem")?;
        let name = ProblemName::from_name(&name)
            .ok_or_else(|| CliError::Config(format!("unknown problem {name:?}")))?;
        let n = required(flags.n.or(file.problem.n), "n")?;
        let problem = ProblemSpec {
            name,
            n,
            k: flags.cols.or(file.problem.k),
            seed: flags.seed.or(file.problem.seed).unwrap_or(DEFAULT_SEED),
        };
        problem
            .manifold()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let triv = flags
            .triv
            .clone()
            .or(file.trivialization)
            .unwrap_or_else(|| TrivKind::RiemannianExp.name().to_string());
        let trivialization = TrivKind::from_name(&triv)
            .ok_or_else(|| CliError::Config(format!("unknown trivialization {triv:?}")))?;

        let rebase = match (&flags.k, file.rebase_period) {
            (Some(k), _) => parse_period(k)?,
            (None, Some(PeriodField::Steps(k))) => parse_period(&k.to_string())?,
            (None, Some(PeriodField::Text(t))) => parse_period(&t)?,
            (None, None) => RebasePeriod::Every(100),
        };

        let opt = flags
            .opt
            .clone()
            .or(file.optimizer)
            .unwrap_or_else(|| OptimizerKind::Adam.name().to_string());
        let optimizer = OptimizerKind::from_name(&opt)
            .ok_or_else(|| CliError::Config(format!("unknown optimizer {opt:?}")))?;

        let lr = flags.lr.or(file.lr).unwrap_or(1e-3);
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(CliError::Config(format!("lr must be positive, got {lr}")));
        }
        let max_steps = flags.steps.or(file.max_steps).unwrap_or(DEFAULT_STEPS);
        if max_steps == 0 {
            return Err(CliError::Config("steps must be at least 1".into()));
        }
        let trace_every = flags.trace_every.or(file.trace_every).unwrap_or(1);
        if trace_every == 0 {
            return Err(CliError::Config("trace_every must be at least 1".into()));
        }
        Ok(Self {
            problem,
            trivialization,
            rebase,
            optimizer,
            lr,
            max_steps,
            grad_tol: positive("grad_tol", flags.grad_tol.or(file.grad_tol))?,
            loss_tol: flags.loss_tol.or(file.loss_tol),
            carry_moments: flags.carry_moments || file.carry_moments.unwrap_or(false),
            trace_every,
            injectivity_diagnostic: flags.injectivity_diagnostic
                || file.injectivity_diagnostic.unwrap_or(false),
            wall_clock: flags.wall_clock || file.wall_clock.unwrap_or(false),
            out: flags.out.clone().or(file.out),
        })
    }
}
