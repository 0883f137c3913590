//! The dynamic trivialization loop.
//!
//! The engine holds a base point `B` and chart coordinates `y`. Each step
//! pulls the ambient gradient back through `φ_B`, lets a Euclidean optimizer
//! move `y`, and every `K` steps moves the base to `φ_B(y)` and resets `y`
//! to zero. `K = 1` with SGD is Riemannian gradient descent along `φ`;
//! `K = ∞` never rebases and optimizes `f ∘ φ_{B₀}` directly.

use std::time::Instant;

use thiserror::Error;

use crate::densela::Matrix;
use crate::manifolds::{algebra_from_coords, ManifoldKind, Point};
use crate::matexp::lie_injectivity_check;
use crate::optim::{OptimError, OptimizerState};
use crate::triv::{TrivError, TrivKind, Trivialization};

/// Objective `f` with its ambient (embedded) gradient. Both are evaluated on
/// the ambient matrix, so finite differences may leave the manifold.
pub trait Objective {
    fn eval(&self, x: &Matrix) -> f64;
    fn euclidean_grad(&self, x: &Matrix) -> Matrix;
}

/// Objective built from two closures.
pub struct FnObjective<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&Matrix) -> f64,
    G: Fn(&Matrix) -> Matrix,
{
    fn eval(&self, x: &Matrix) -> f64 {
        (self.f)(x)
    }

    fn euclidean_grad(&self, x: &Matrix) -> Matrix {
        (self.grad)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RebasePeriod {
    Every(usize),
    Never,
}

impl RebasePeriod {
    /// `None` means `∞`.
    pub fn from_option(k: Option<usize>) -> Self {
        match k {
            Some(k) => RebasePeriod::Every(k),
            None => RebasePeriod::Never,
        }
    }

    pub fn label(&self) -> String {
        match self {
            RebasePeriod::Every(k) => k.to_string(),
            RebasePeriod::Never => "inf".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rebase: RebasePeriod,
    /// Keep optimizer moments across a rebase instead of resetting them.
    pub carry_moments: bool,
    /// Record every `trace_every`-th step (the final evaluation is always kept).
    pub trace_every: usize,
    /// Count steps whose chart input lies outside the injectivity radius.
    pub injectivity_diagnostic: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            rebase: RebasePeriod::Every(100),
            carry_moments: false,
            trace_every: 1,
            injectivity_diagnostic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopRule {
    pub grad_tol: Option<f64>,
    pub loss_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub membership: f64,
    pub wall_ms: f64,
    /// Loss at the new base when this step ended in a rebase.
    pub post_rebase_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    GradTol,
    LossTol,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Triv(#[from] TrivError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("optimizer targets {optimizer} coordinates but the manifold has {manifold}")]
    DimensionMismatch { optimizer: usize, manifold: usize },
    #[error("rebase period must be at least 1")]
    ZeroPeriod,
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(u64),
    #[error("max_steps must be at least 1")]
    NoSteps,
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Loss and gradients at the current iterate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub point: Point,
    pub loss: f64,
    pub ambient_grad: Matrix,
    pub coords_grad: Vec<f64>,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub stop: StopReason,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub final_membership: f64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    triv: Trivialization,
    basis: Point,
    y: Vec<f64>,
    k_since_rebase: usize,
    optimizer: OptimizerState,
    config: EngineConfig,
    history: Vec<TraceRecord>,
    steps: u64,
    rebases: u64,
    injectivity_violations: u64,
    started: Instant,
}

impl Engine {
    pub fn new(
        triv: Trivialization,
        basis: Point,
        optimizer: OptimizerState,
        config: EngineConfig,
    ) -> Result<Self> {
        if config.rebase == RebasePeriod::Every(0) {
            return Err(EngineError::ZeroPeriod);
        }
        if basis.spec() != triv.spec() {
            return Err(EngineError::DimensionMismatch {
                optimizer: triv.spec().dim,
                manifold: basis.spec().dim,
            });
        }
        for buf in [&optimizer.m1, &optimizer.m2] {
            if !buf.is_empty() && buf.len() != triv.spec().dim {
                return Err(EngineError::DimensionMismatch {
                    optimizer: buf.len(),
                    manifold: triv.spec().dim,
                });
            }
        }
        let dim = triv.spec().dim;
        Ok(Self {
            triv,
            basis,
            y: vec![0.0; dim],
            k_since_rebase: 0,
            optimizer,
            config: EngineConfig {
                trace_every: config.trace_every.max(1),
                ..config
            },
            history: Vec::new(),
            steps: 0,
            rebases: 0,
            injectivity_violations: 0,
            started: Instant::now(),
        })
    }

    pub fn basis(&self) -> &Point {
        &self.basis
    }

    pub fn coords(&self) -> &[f64] {
        &self.y
    }

    pub fn k_since_rebase(&self) -> usize {
        self.k_since_rebase
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn trivialization(&self) -> &Trivialization {
        &self.triv
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn history(&self) -> &[TraceRecord] {
        &self.history
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rebases(&self) -> u64 {
        self.rebases
    }

    pub fn injectivity_violations(&self) -> u64 {
        self.injectivity_violations
    }

    /// The manifold point `φ_B(y)`.
    pub fn current_point(&self) -> Result<Point> {
        Ok(self.triv.value(&self.basis, &self.y)?)
    }

    pub fn evaluate(&self, obj: &dyn Objective) -> Result<Evaluation> {
        let point = self.current_point()?;
        let loss = obj.eval(point.value());
        if !loss.is_finite() {
            return Err(EngineError::NonFiniteLoss(self.steps));
        }
        let ambient_grad = obj.euclidean_grad(point.value());
        let coords_grad = self.triv.pullback_grad(&self.basis, &self.y, &ambient_grad)?;
        let grad_norm = coords_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok(Evaluation {
            point,
            loss,
            ambient_grad,
            coords_grad,
            grad_norm,
        })
    }

    fn record(&mut self, ev: &Evaluation, force: bool) -> usize {
        let rec = TraceRecord {
            step: self.steps,
            loss: ev.loss,
            grad_norm: ev.grad_norm,
            membership: ev.point.membership(),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            post_rebase_loss: None,
        };
        if force || self.steps % self.config.trace_every as u64 == 0 {
            self.history.push(rec);
        }
        self.history.len()
    }

    /// Applies the optimizer update for an evaluation taken at the current
    /// state, then rebases if the period is reached. Returns the loss at the
    /// new base when a rebase happened.
    pub fn apply(&mut self, ev: &Evaluation, obj: &dyn Objective) -> Result<Option<f64>> {
        if self.config.injectivity_diagnostic {
            self.diagnose_injectivity();
        }
        let (opt, y) = self.optimizer.step(&self.y, &ev.coords_grad)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TrivError::NonFiniteCoords.into());
        }
        self.optimizer = opt;
        self.y = y;
        self.steps += 1;
        self.k_since_rebase += 1;
        if let RebasePeriod::Every(k) = self.config.rebase {
            if self.k_since_rebase >= k {
                return self.rebase(obj).map(Some);
            }
        }
        Ok(None)
    }

    /// `B ← φ_B(y)`, `y ← 0`.
    pub fn rebase(&mut self, obj: &dyn Objective) -> Result<f64> {
        self.basis = self.current_point()?;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        self.k_since_rebase = 0;
        self.rebases += 1;
        if !self.config.carry_moments {
            self.optimizer = self.optimizer.reset();
        }
        Ok(obj.eval(self.basis.value()))
    }

    /// One full step: evaluate, record, update, maybe rebase.
    pub fn step(&mut self, obj: &dyn Objective) -> Result<Evaluation> {
        let ev = self.evaluate(obj)?;
        let len = self.record(&ev, false);
        let recorded = len > 0 && self.history[len - 1].step == self.steps;
        let post = self.apply(&ev, obj)?;
        if recorded {
            self.history[len - 1].post_rebase_loss = post;
        }
        Ok(ev)
    }

    /// Steps until `max_steps` updates were made or a stopping rule fires.
    /// The trace ends with the evaluation at the final iterate.
    pub fn run(&mut self, obj: &dyn Objective, max_steps: u64, stop: StopRule) -> Result<RunSummary> {
        if max_steps == 0 {
            return Err(EngineError::NoSteps);
        }
        let target = self.steps + max_steps;
        loop {
            let ev = self.evaluate(obj)?;
            let reason = if stop.loss_tol.is_some_and(|t| ev.loss <= t) {
                Some(StopReason::LossTol)
            } else if stop.grad_tol.is_some_and(|t| ev.grad_norm <= t) {
                Some(StopReason::GradTol)
            } else if self.steps >= target {
                Some(StopReason::MaxSteps)
            } else {
                None
            };
            if let Some(stop) = reason {
                self.record(&ev, true);
                return Ok(RunSummary {
                    steps: self.steps,
                    stop,
                    final_loss: ev.loss,
                    final_grad_norm: ev.grad_norm,
                    final_membership: ev.point.membership(),
                });
            }
            let len = self.record(&ev, false);
            let recorded = len > 0 && self.history[len - 1].step == self.steps;
            let post = self.apply(&ev, obj)?;
            if recorded {
                self.history[len - 1].post_rebase_loss = post;
            }
        }
    }

    /// Records, without acting on, a chart input outside the injectivity domain.
    fn diagnose_injectivity(&mut self) {
        let spec = self.triv.spec();
        let uses_exp = matches!(self.triv.kind(), TrivKind::LieExp | TrivKind::RiemannianExp);
        let skew = matches!(
            spec.kind,
            ManifoldKind::SpecialOrthogonal { .. } | ManifoldKind::RealTorus { .. }
        );
        if uses_exp && skew {
            let a = algebra_from_coords(spec, &self.y);
            if let Ok(false) = lie_injectivity_check(&a) {
                self.injectivity_violations += 1;
            }
        }
    }
}
