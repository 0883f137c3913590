//! Fixtures shared by the criterion benchmarks.

use dyntriv::manifolds::random_point;
use dyntriv::{Matrix, ManifoldSpec};

/// Skew-symmetric `n×n` matrix with entries of order `scale`.
pub fn skew(n: usize, seed: u64, scale: f64) -> Matrix {
    let q = random_point(&ManifoldSpec::special_orthogonal(n).expect("n >= 1"), seed)
        .expect("sampling SO(n)")
        .into_value();
    (&q - &q.transpose()).scale(0.5 * scale)
}

/// Dense `n×n` matrix with entries of order `scale`.
pub fn dense(n: usize, seed: u64, scale: f64) -> Matrix {
    let g = random_point(&ManifoldSpec::general_linear_plus(n).expect("n >= 1"), seed)
        .expect("sampling GL+(n)")
        .into_value();
    g.scale(scale / (n as f64).sqrt())
}
