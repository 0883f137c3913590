//! Optimization on matrix manifolds through static and dynamic
//! trivializations.
//!
//! A constrained problem `min_{x ∈ M} f(x)` is rewritten as an unconstrained
//! one over chart coordinates `y` of a map `φ_B : T_B M → M`. The
//! [`engine::Engine`] runs any Euclidean optimizer on `y` and moves the base
//! `B` every `K` steps.

pub mod densela;
pub mod engine;
pub mod manifolds;
pub mod matexp;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod triv;

pub use densela::{LinalgError, Matrix};
pub use engine::{
    Engine, EngineConfig, EngineError, FnObjective, Objective, RebasePeriod, RunSummary,
    StopReason, StopRule, TraceRecord,
};
pub use manifolds::{ManifoldError, ManifoldKind, ManifoldSpec, Point};
pub use matexp::MatexpError;
pub use optim::{Hyper, OptimError, OptimizerKind, OptimizerState};
pub use problems::{build_problem, gradcheck, Problem, ProblemError, ProblemName, ProblemSpec};
pub use triv::{TrivError, TrivKind, Trivialization};
