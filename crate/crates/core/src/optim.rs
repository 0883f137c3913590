//! First-order optimizers on flat coordinate arrays.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite gradient entry at {0}")]
    NonFiniteGradient(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adagrad,
    RmsProp,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Sgd,
        OptimizerKind::Momentum,
        OptimizerKind::Adagrad,
        OptimizerKind::RmsProp,
        OptimizerKind::Adam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            alpha: 0.99,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step_count: u64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub hyper: Hyper,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        Self::with_hyper(kind, lr, Hyper::default())
    }

    pub fn with_hyper(kind: OptimizerKind, lr: f64, hyper: Hyper) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(OptimError::InvalidHyper(format!("lr must be positive, got {lr}")));
        }
        if !(hyper.eps > 0.0) {
            return Err(OptimError::InvalidHyper(format!("eps must be positive, got {}", hyper.eps)));
        }
        for (name, v) in [
            ("momentum", hyper.momentum),
            ("beta1", hyper.beta1),
            ("beta2", hyper.beta2),
            ("alpha", hyper.alpha),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(OptimError::InvalidHyper(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(Self {
            kind,
            lr,
            step_count: 0,
            m1: Vec::new(),
            m2: Vec::new(),
            hyper,
        })
    }

    /// Zeroes buffers and the step counter, keeping hyperparameters.
    pub fn reset(&self) -> Self {
        Self {
            step_count: 0,
            m1: Vec::new(),
            m2: Vec::new(),
            ..self.clone()
        }
    }

    /// One update. Returns the advanced state and the new iterate.
    pub fn step(&self, y: &[f64], g: &[f64]) -> Result<(Self, Vec<f64>)> {
        if y.len() != g.len() {
            return Err(OptimError::Length {
                expected: y.len(),
                got: g.len(),
            });
        }
        for buf in [&self.m1, &self.m2] {
            if !buf.is_empty() && buf.len() != y.len() {
                return Err(OptimError::Length {
                    expected: buf.len(),
                    got: y.len(),
                });
            }
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(OptimError::NonFiniteGradient(i));
        }
        let d = y.len();
        let h = self.hyper;
        let lr = self.lr;
        let mut next = self.clone();
        next.step_count += 1;
        let buf = |b: &Vec<f64>| if b.is_empty() { vec![0.0; d] } else { b.clone() };
        let y_new: Vec<f64> = match self.kind {
            OptimizerKind::Sgd => y.iter().zip(g).map(|(y, g)| y - lr * g).collect(),
            OptimizerKind::Momentum => {
                let mut v = buf(&self.m1);
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi = h.momentum * *vi + gi;
                }
                let out = y.iter().zip(&v).map(|(y, v)| y - lr * v).collect();
                next.m1 = v;
                out
            }
            OptimizerKind::Adagrad => {
                let mut acc = buf(&self.m2);
                for (a, gi) in acc.iter_mut().zip(g) {
                    *a += gi * gi;
                }
                let out = (0..d).map(|i| y[i] - lr * g[i] / (acc[i] + h.eps).sqrt()).collect();
                next.m2 = acc;
                out
            }
            OptimizerKind::RmsProp => {
                let mut acc = buf(&self.m2);
                for (a, gi) in acc.iter_mut().zip(g) {
                    *a = h.alpha * *a + (1.0 - h.alpha) * gi * gi;
                }
                let out = (0..d).map(|i| y[i] - lr * g[i] / (acc[i] + h.eps).sqrt()).collect();
                next.m2 = acc;
                out
            }
            OptimizerKind::Adam => {
                let mut m = buf(&self.m1);
                let mut v = buf(&self.m2);
                let t = next.step_count as i32;
                let c1 = 1.0 - h.beta1.powi(t);
                let c2 = 1.0 - h.beta2.powi(t);
                let mut out = Vec::with_capacity(d);
                for i in 0..d {
                    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                    let mhat = m[i] / c1;
                    let vhat = v[i] / c2;
                    out.push(y[i] - lr * mhat / (vhat.sqrt() + h.eps));
                }
                next.m1 = m;
                next.m2 = v;
                out
            }
        };
        Ok((next, y_new))
    }
}
