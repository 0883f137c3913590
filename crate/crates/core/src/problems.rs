//! Benchmark problems and gradient checking.
//!
//! Each problem draws its data from the problem stream of the run seed, so
//! the data does not depend on how the initial point is sampled.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::densela::{fro_inner, fro_norm, sym_eig, LinalgError, Matrix};
use crate::engine::Objective;
use crate::manifolds::{minkowski, random_point_with, ManifoldError, ManifoldKind, ManifoldSpec};
use crate::rng::{stream_rng, STREAM_PROBLEM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{problem} needs {expected}, got {got}")]
    IncompatibleManifold {
        problem: ProblemName,
        expected: &'static str,
        got: String,
    },
    #[error("{0} takes no column count")]
    UnexpectedCols(ProblemName),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemName {
    Procrustes,
    Rayleigh,
    Brockett,
    SpdRecovery,
    HyperbolicCentroid,
}

impl ProblemName {
    pub const ALL: [ProblemName; 5] = [
        ProblemName::Procrustes,
        ProblemName::Rayleigh,
        ProblemName::Brockett,
        ProblemName::SpdRecovery,
        ProblemName::HyperbolicCentroid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemName::Procrustes => "procrustes",
            ProblemName::Rayleigh => "rayleigh",
            ProblemName::Brockett => "brockett",
            ProblemName::SpdRecovery => "spd_recovery",
            ProblemName::HyperbolicCentroid => "hyperbolic_centroid",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    fn expected_manifold(self) -> &'static str {
        match self {
            ProblemName::Procrustes => "SO(n)",
            ProblemName::Rayleigh => "a sphere",
            ProblemName::Brockett => "a Stiefel manifold",
            ProblemName::SpdRecovery => "SPD(n)",
            ProblemName::HyperbolicCentroid => "a hyperboloid",
        }
    }

    fn accepts(self, kind: &ManifoldKind) -> bool {
        matches!(
            (self, kind),
            (ProblemName::Procrustes, ManifoldKind::SpecialOrthogonal { .. })
                | (ProblemName::Rayleigh, ManifoldKind::Sphere { .. })
                | (ProblemName::Brockett, ManifoldKind::Stiefel { .. })
                | (ProblemName::SpdRecovery, ManifoldKind::SymPosDef { .. })
                | (ProblemName::HyperbolicCentroid, ManifoldKind::Hyperbolic { .. })
        )
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Problem name, size and seed. `n` is the matrix size; for `rayleigh` it is
/// the ambient dimension of the sphere and for `hyperbolic_centroid` the
/// intrinsic dimension of the hyperboloid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: ProblemName,
    pub n: usize,
    pub k: Option<usize>,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn manifold(&self) -> Result<ManifoldSpec> {
        let n = self.n;
        if self.k.is_some() && self.name != ProblemName::Brockett {
            return Err(ProblemError::UnexpectedCols(self.name));
        }
        Ok(match self.name {
            ProblemName::Procrustes => ManifoldSpec::special_orthogonal(n)?,
            ProblemName::Rayleigh => ManifoldSpec::sphere(n.saturating_sub(1))?,
            ProblemName::Brockett => ManifoldSpec::stiefel(n, self.k.unwrap_or(1))?,
            ProblemName::SpdRecovery => ManifoldSpec::sym_pos_def(n)?,
            ProblemName::HyperbolicCentroid => ManifoldSpec::hyperbolic(n)?,
        })
    }
}

#[derive(Debug, Clone)]
enum Data {
    Procrustes { a: Matrix, b: Matrix },
    Quadratic { c: Matrix },
    Brockett { c: Matrix, weights: Vec<f64> },
    Recovery { target: Matrix },
    Centroid { anchors: Vec<Vec<f64>> },
}

/// A built benchmark objective.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: ProblemName,
    pub manifold: ManifoldSpec,
    /// Optimal value when it is known in closed form.
    pub optimum: Option<f64>,
    data: Data,
}

pub fn build_problem(p: &ProblemSpec) -> Result<Problem> {
    build_problem_on(p.name, p.manifold()?, p.seed)
}

pub fn build_problem_on(name: ProblemName, manifold: ManifoldSpec, seed: u64) -> Result<Problem> {
    if !name.accepts(&manifold.kind) {
        return Err(ProblemError::IncompatibleManifold {
            problem: name,
            expected: name.expected_manifold(),
            got: manifold.label(),
        });
    }
    let mut rng = stream_rng(seed, STREAM_PROBLEM);
    let (data, optimum) = match manifold.kind {
        ManifoldKind::SpecialOrthogonal { n } => {
            let q = random_point_with(&manifold, &mut rng)?.into_value();
            let a = gaussian(n, n, &mut rng);
            let b = &q * &a;
            (Data::Procrustes { a, b }, Some(0.0))
        }
        ManifoldKind::Sphere { n } => {
            let dim = n + 1;
            let g = gaussian(dim, dim, &mut rng);
            let c = (&g + &g.transpose()).scale(0.5 / (dim as f64).sqrt());
            let lmin = sym_eig(&c)?.values[0];
            (Data::Quadratic { c }, Some(lmin))
        }
        ManifoldKind::Stiefel { n, k } => {
            let g = gaussian(n, n, &mut rng);
            let c = (&g + &g.transpose()).scale(0.5 / (n as f64).sqrt());
            let weights: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
            let opt = brockett_optimum(&sym_eig(&c)?.values, &weights);
            (Data::Brockett { c, weights }, Some(opt))
        }
        ManifoldKind::SymPosDef { n } => {
            let g = gaussian(n, n, &mut rng);
            let mut t = (&g * &g.transpose()).scale(1.0 / n as f64);
            for i in 0..n {
                t[(i, i)] += 1.0;
            }
            (Data::Recovery { target: t }, Some(0.0))
        }
        ManifoldKind::Hyperbolic { .. } => {
            let anchors = (0..8)
                .map(|_| random_point_with(&manifold, &mut rng).map(|p| p.into_value().into_vec()))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            (Data::Centroid { anchors }, None)
        }
        _ => unreachable!("checked by accepts"),
    };
    Ok(Problem {
        name,
        manifold,
        optimum,
        data,
    })
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `Σ λᵢ wᵢ` with the ascending eigenvalues paired to descending weights.
pub fn brockett_optimum(eigenvalues_ascending: &[f64], weights_descending: &[f64]) -> f64 {
    eigenvalues_ascending
        .iter()
        .zip(weights_descending)
        .map(|(l, w)| l * w)
        .sum()
}

/// `arccosh(u)` and `arccosh(u) / √(u² − 1)`, the latter continued by 1 at `u = 1`.
fn arccosh_and_ratio(u: f64) -> (f64, f64) {
    let u = u.max(1.0);
    let d = u - 1.0;
    if d < 1e-8 {
        // arccosh(1 + d) = √(2d)(1 − d/12 + …), √(u² − 1) = √(2d)√(1 + d/2)
        let s = (2.0 * d).sqrt();
        (s * (1.0 - d / 12.0), (1.0 - d / 12.0) / (1.0 + d / 2.0).sqrt())
    } else {
        let a = u.acosh();
        (a, a / (u * u - 1.0).sqrt())
    }
}

impl Problem {
    pub fn eval_at(&self, x: &Matrix) -> f64 {
        match &self.data {
            Data::Procrustes { a, b } => 0.5 * fro_norm(&(&(x * a) - b)).powi(2),
            Data::Quadratic { c } => fro_inner(x, &(c * x)).unwrap_or(f64::NAN),
            Data::Brockett { c, weights } => {
                let cx = c * x;
                (0..x.cols())
                    .map(|j| weights[j] * dot_col(x, &cx, j))
                    .sum()
            }
            Data::Recovery { target } => 0.5 * fro_norm(&(x - target)).powi(2),
            Data::Centroid { anchors } => {
                let m = anchors.len() as f64;
                anchors
                    .iter()
                    .map(|z| arccosh_and_ratio(-minkowski(x.as_slice(), z)).0.powi(2))
                    .sum::<f64>()
                    / m
            }
        }
    }

    pub fn grad_at(&self, x: &Matrix) -> Matrix {
        match &self.data {
            Data::Procrustes { a, b } => &(&(x * a) - b) * &a.transpose(),
            Data::Quadratic { c } => (c * x).scale(2.0),
            Data::Brockett { c, weights } => {
                let cx = c * x;
                Matrix::from_fn(x.rows(), x.cols(), |i, j| 2.0 * cx[(i, j)] * weights[j])
            }
            Data::Recovery { target } => x - target,
            Data::Centroid { anchors } => {
                let n = x.rows() - 1;
                let m = anchors.len() as f64;
                let mut g = vec![0.0; n + 1];
                for z in anchors {
                    let (_, ratio) = arccosh_and_ratio(-minkowski(x.as_slice(), z));
                    // d/dx of arccosh(u)² with u = −⟨x, z⟩_H
                    for (i, gi) in g.iter_mut().enumerate() {
                        let jz = if i == n { -z[i] } else { z[i] };
                        *gi -= 2.0 * ratio * jz / m;
                    }
                }
                Matrix::column_vector(&g)
            }
        }
    }
}

fn dot_col(a: &Matrix, b: &Matrix, j: usize) -> f64 {
    (0..a.rows()).map(|i| a[(i, j)] * b[(i, j)]).sum()
}

impl Objective for Problem {
    fn eval(&self, x: &Matrix) -> f64 {
        self.eval_at(x)
    }

    fn euclidean_grad(&self, x: &Matrix) -> Matrix {
        self.grad_at(x)
    }
}

/// Largest relative error between `obj.euclidean_grad(x)` and central
/// differences over every ambient entry. `h` is clamped to `[1e-8, 1e-3]`.
pub fn gradcheck(obj: &dyn Objective, x: &Matrix, h: f64) -> f64 {
    let h = h.clamp(1e-8, 1e-3);
    let g = obj.euclidean_grad(x);
    let gmax = g.max_abs();
    let mut xp = x.clone();
    let mut worst: f64 = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = x[(i, j)];
            xp[(i, j)] = orig + h;
            let fp = obj.eval(&xp);
            xp[(i, j)] = orig - h;
            let fm = obj.eval(&xp);
            xp[(i, j)] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = g[(i, j)].abs().max(fd.abs()).max(1e-6 * gmax).max(f64::MIN_POSITIVE);
            worst = worst.max((g[(i, j)] - fd).abs() / denom);
        }
    }
    worst
}
