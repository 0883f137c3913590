//! Matrix manifolds: membership residuals, tangent charts and sampling.
//!
//! Every point is stored as its ambient matrix (vectors are n×1). A chart
//! maps a flat coordinate array of length `dim` linearly onto the tangent
//! space at a base point; the optimizers only ever see those coordinates.
//!
//! | manifold   | ambient       | chart                                             |
//! |------------|---------------|---------------------------------------------------|
//! | SO(n)      | n×n           | strict lower triangle of skew `A`, `Ã = B A`       |
//! | torus      | 2b×2b         | one rate per 2×2 block, `Ã = B A`                  |
//! | St(n, k)   | n×k           | skew `A` (k×k) then `A⊥`, `Ã = B A + B⊥ A⊥`         |
//! | Sⁿ         | (n+1)×1       | orthonormal basis of `x⊥`                          |
//! | Hⁿ         | (n+1)×1       | Lorentz-orthonormal basis of the tangent plane     |
//! | SPD(n)     | n×n           | upper triangle of symmetric `A`, `Ã = S A S`, `S = B^½` |
//! | SL(n)      | n×n           | all entries but (n,n), traceless projection, `Ã = B A` |
//! | GL⁺(n)     | n×n           | all entries, `Ã = B A`                             |
//!
//! SPD off-diagonal coordinates carry a `1/√2` so the chart is an isometry
//! for the affine-invariant metric.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::densela::{
    det, fro_norm, lu_solve, qr_full, qr_thin, sym_eig, LinalgError, Matrix, SymEig,
};

/// Membership residual accepted for points handed to the engine.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Relative tangency residual accepted by [`Point::ambient_to_coords`].
pub const TANGENCY_TOL: f64 = 1e-8;
/// Smallest eigenvalue an SPD point may have.
pub const SPD_EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid manifold: {0}")]
    InvalidSpec(String),
    #[error("expected ambient shape {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("expected {expected} chart coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("point is off the manifold (violation {0:e})")]
    NotOnManifold(f64),
    #[error("vector is not tangent at the base point (residual {0:e})")]
    NotTangent(f64),
    #[error("point left the positive definite cone (smallest eigenvalue {0:e})")]
    LeftCone(f64),
    #[error("non-finite value")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    SpecialOrthogonal { n: usize },
    /// Real torus of `blocks` circles embedded as 2×2 rotation blocks.
    RealTorus { blocks: usize },
    Stiefel { n: usize, k: usize },
    /// Unit sphere Sⁿ ⊂ ℝⁿ⁺¹.
    Sphere { n: usize },
    /// Hyperboloid model Hⁿ ⊂ ℝⁿ⁺¹.
    Hyperbolic { n: usize },
    SymPosDef { n: usize },
    SpecialLinear { n: usize },
    GeneralLinearPlus { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub ambient_rows: usize,
    pub ambient_cols: usize,
    pub dim: usize,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind) -> Result<Self> {
        use ManifoldKind::*;
        let bad = |msg: &str| Err(ManifoldError::InvalidSpec(msg.to_string()));
        let (rows, cols, dim) = match kind {
            SpecialOrthogonal { n } if n >= 1 => (n, n, n * (n - 1) / 2),
            RealTorus { blocks } if blocks >= 1 => (2 * blocks, 2 * blocks, blocks),
            Stiefel { n, k } if k >= 1 && k <= n => (n, k, n * k - k * (k + 1) / 2),
            Stiefel { .. } => return bad("Stiefel requires 1 <= k <= n"),
            Sphere { n } if n >= 1 => (n + 1, 1, n),
            Hyperbolic { n } if n >= 1 => (n + 1, 1, n),
            SymPosDef { n } if n >= 1 => (n, n, n * (n + 1) / 2),
            SpecialLinear { n } if n >= 1 => (n, n, n * n - 1),
            GeneralLinearPlus { n } if n >= 1 => (n, n, n * n),
            _ => return bad("dimension parameters must be positive"),
        };
        Ok(Self {
            kind,
            ambient_rows: rows,
            ambient_cols: cols,
            dim,
        })
    }

    pub fn ambient_shape(&self) -> (usize, usize) {
        (self.ambient_rows, self.ambient_cols)
    }

    /// Short lowercase name, e.g. `so(4)` or `st(20,4)`.
    pub fn label(&self) -> String {
        use ManifoldKind::*;
        match self.kind {
            SpecialOrthogonal { n } => format!("so({n})"),
            RealTorus { blocks } => format!("torus({})", 2 * blocks),
            Stiefel { n, k } => format!("st({n},{k})"),
            Sphere { n } => format!("sphere({n})"),
            Hyperbolic { n } => format!("hyperbolic({n})"),
            SymPosDef { n } => format!("spd({n})"),
            SpecialLinear { n } => format!("sl({n})"),
            GeneralLinearPlus { n } => format!("glplus({n})"),
        }
    }

    fn check_shape(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.ambient_shape() {
            return Err(ManifoldError::Shape {
                expected: self.ambient_shape(),
                got: x.shape(),
            });
        }
        Ok(())
    }
}

macro_rules! spec_ctor {
    ($name:ident, $variant:ident { $($f:ident),* }) => {
        impl ManifoldSpec {
            pub fn $name($($f: usize),*) -> Result<Self> {
                Self::new(ManifoldKind::$variant { $($f),* })
            }
        }
    };
}

spec_ctor!(special_orthogonal, SpecialOrthogonal { n });
spec_ctor!(real_torus, RealTorus { blocks });
spec_ctor!(stiefel, Stiefel { n, k });
spec_ctor!(sphere, Sphere { n });
spec_ctor!(hyperbolic, Hyperbolic { n });
spec_ctor!(sym_pos_def, SymPosDef { n });
spec_ctor!(special_linear, SpecialLinear { n });
spec_ctor!(general_linear_plus, GeneralLinearPlus { n });

/// `⟨x, y⟩_H = Σ_{i≤n} x_i y_i − x_{n+1} y_{n+1}`.
pub fn minkowski(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() - 1;
    x[..n].iter().zip(&y[..n]).map(|(a, b)| a * b).sum::<f64>() - x[n] * y[n]
}

/// Scalar constraint violation of `x`; zero exactly on the manifold.
pub fn membership(spec: &ManifoldSpec, x: &Matrix) -> Result<f64> {
    use ManifoldKind::*;
    spec.check_shape(x)?;
    if !x.is_finite() {
        return Ok(f64::INFINITY);
    }
    let v = match spec.kind {
        SpecialOrthogonal { n } => {
            let orth = fro_norm(&(&(&x.transpose() * x) - &Matrix::identity(n)));
            orth + (-det(x)?).max(0.0)
        }
        RealTorus { blocks } => {
            let mut off = 0.0;
            let mut res = 0.0;
            for i in 0..2 * blocks {
                for j in 0..2 * blocks {
                    if i / 2 != j / 2 {
                        off += x[(i, j)] * x[(i, j)];
                    }
                }
            }
            for b in 0..blocks {
                let (a, bb, c, d) = (
                    x[(2 * b, 2 * b)],
                    x[(2 * b, 2 * b + 1)],
                    x[(2 * b + 1, 2 * b)],
                    x[(2 * b + 1, 2 * b + 1)],
                );
                res += (a - d).abs() + (bb + c).abs() + (a * a + c * c - 1.0).abs();
            }
            off.sqrt() + res
        }
        Stiefel { k, .. } => fro_norm(&(&(&x.transpose() * x) - &Matrix::identity(k))),
        Sphere { .. } => (fro_norm(x) - 1.0).abs(),
        Hyperbolic { n } => {
            let s = x.as_slice();
            (minkowski(s, s) + 1.0).abs() + (-s[n]).max(0.0)
        }
        SymPosDef { .. } => {
            let asym = fro_norm(&(x - &x.transpose()));
            let lmin = sym_eig(&x.sym_part())?.values[0];
            asym + (-lmin).max(0.0)
        }
        SpecialLinear { .. } => (det(x)? - 1.0).abs(),
        GeneralLinearPlus { .. } => {
            let d = det(x)?;
            if d > 0.0 {
                0.0
            } else {
                1.0 - d
            }
        }
    };
    Ok(v)
}

/// Factors cached on a point at construction.
#[derive(Debug, Clone)]
enum PointCache {
    None,
    /// `B⊥` completing a Stiefel frame to an orthogonal matrix.
    Complement(Matrix),
    /// Columns span the tangent space (sphere, hyperboloid).
    TangentBasis(Matrix),
    Spd {
        eig: SymEig,
        sqrt: Matrix,
        inv_sqrt: Matrix,
    },
}

/// A validated point with the factors its chart needs.
#[derive(Debug, Clone)]
pub struct Point {
    spec: ManifoldSpec,
    value: Matrix,
    cache: PointCache,
}

impl Point {
    /// Validates membership (≤ [`MEMBERSHIP_TOL`]) and builds the chart cache.
    pub fn new(spec: ManifoldSpec, value: Matrix) -> Result<Self> {
        Self::with_tolerance(spec, value, MEMBERSHIP_TOL)
    }

    pub fn with_tolerance(spec: ManifoldSpec, value: Matrix, tol: f64) -> Result<Self> {
        spec.check_shape(&value)?;
        if !value.is_finite() {
            return Err(ManifoldError::NonFinite);
        }
        let viol = membership(&spec, &value)?;
        if !(viol <= tol) {
            return Err(ManifoldError::NotOnManifold(viol));
        }
        let cache = build_cache(&spec, &value)?;
        Ok(Self { spec, value, cache })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn into_value(self) -> Matrix {
        self.value
    }

    pub fn membership(&self) -> f64 {
        membership(&self.spec, &self.value).unwrap_or(f64::INFINITY)
    }

    /// `B⊥` for Stiefel points.
    pub fn complement(&self) -> Option<&Matrix> {
        match &self.cache {
            PointCache::Complement(m) => Some(m),
            _ => None,
        }
    }

    /// Tangent basis for sphere and hyperboloid points.
    pub fn tangent_basis(&self) -> Option<&Matrix> {
        match &self.cache {
            PointCache::TangentBasis(m) => Some(m),
            _ => None,
        }
    }

    /// `(B^½, B^-½)` for SPD points.
    pub fn spd_roots(&self) -> Option<(&Matrix, &Matrix)> {
        match &self.cache {
            PointCache::Spd { sqrt, inv_sqrt, .. } => Some((sqrt, inv_sqrt)),
            _ => None,
        }
    }

    /// Eigendecomposition of an SPD point.
    pub fn spd_eig(&self) -> Option<&SymEig> {
        match &self.cache {
            PointCache::Spd { eig, .. } => Some(eig),
            _ => None,
        }
    }

    fn check_coords(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.spec.dim {
            return Err(ManifoldError::Dimension {
                expected: self.spec.dim,
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Linear chart from coordinates to the ambient tangent `Ã ∈ T_B M`.
    pub fn coords_to_ambient(&self, y: &[f64]) -> Result<Matrix> {
        use ManifoldKind::*;
        self.check_coords(y)?;
        let b = &self.value;
        Ok(match self.spec.kind {
            SpecialOrthogonal { .. }
            | RealTorus { .. }
            | SpecialLinear { .. }
            | GeneralLinearPlus { .. } => b * &algebra_from_coords(&self.spec, y),
            Stiefel { n, k } => {
                let (a, a_perp) = stiefel_blocks(n, k, y);
                let mut out = b * &a;
                if n > k {
                    out += &(self.complement().expect("stiefel cache") * &a_perp);
                }
                out
            }
            Sphere { .. } | Hyperbolic { .. } => {
                self.tangent_basis().expect("basis cache") * &Matrix::column_vector(y)
            }
            SymPosDef { .. } => {
                let (s, _) = self.spd_roots().expect("spd cache");
                &(s * &algebra_from_coords(&self.spec, y)) * s
            }
        })
    }

    /// Residual of the defining tangency relation, relative to `‖v‖`.
    pub fn tangency_residual(&self, v: &Matrix) -> Result<f64> {
        use ManifoldKind::*;
        self.spec.check_shape(v)?;
        let b = &self.value;
        let scale = fro_norm(v).max(1.0);
        let r = match self.spec.kind {
            SpecialOrthogonal { .. } | Stiefel { .. } => {
                let m = &b.transpose() * v;
                fro_norm(&m.sym_part())
            }
            RealTorus { blocks } => {
                let m = &b.transpose() * v;
                let mut r = 0.0;
                for i in 0..2 * blocks {
                    for j in 0..2 * blocks {
                        let allowed = i / 2 == j / 2 && i != j;
                        if !allowed {
                            r += m[(i, j)] * m[(i, j)];
                        }
                    }
                }
                for bl in 0..blocks {
                    let s = m[(2 * bl, 2 * bl + 1)] + m[(2 * bl + 1, 2 * bl)];
                    r += s * s;
                }
                r.sqrt()
            }
            Sphere { .. } => fro_inner_vec(b.as_slice(), v.as_slice()).abs(),
            Hyperbolic { .. } => minkowski(b.as_slice(), v.as_slice()).abs(),
            SymPosDef { .. } => fro_norm(&v.skew_part()),
            SpecialLinear { .. } => lu_solve(b, v)?.trace().abs(),
            GeneralLinearPlus { .. } => 0.0,
        };
        Ok(r / scale)
    }

    /// Inverse chart. Rejects vectors that are not tangent within
    /// [`TANGENCY_TOL`].
    pub fn ambient_to_coords(&self, v: &Matrix) -> Result<Vec<f64>> {
        use ManifoldKind::*;
        let res = self.tangency_residual(v)?;
        if res > TANGENCY_TOL {
            return Err(ManifoldError::NotTangent(res));
        }
        let b = &self.value;
        Ok(match self.spec.kind {
            SpecialOrthogonal { n } => {
                let m = &b.transpose() * v;
                lower_pairs(n)
                    .map(|(i, j)| 0.5 * (m[(i, j)] - m[(j, i)]))
                    .collect()
            }
            RealTorus { blocks } => {
                let m = &b.transpose() * v;
                (0..blocks)
                    .map(|k| 0.5 * (m[(2 * k + 1, 2 * k)] - m[(2 * k, 2 * k + 1)]))
                    .collect()
            }
            Stiefel { n, k } => {
                let m = &b.transpose() * v;
                let mut y: Vec<f64> = lower_pairs(k)
                    .map(|(i, j)| 0.5 * (m[(i, j)] - m[(j, i)]))
                    .collect();
                if n > k {
                    let perp = &self.complement().expect("stiefel cache").transpose() * v;
                    y.extend_from_slice(perp.as_slice());
                }
                y
            }
            Sphere { .. } => {
                let e = self.tangent_basis().expect("basis cache");
                (&e.transpose() * v).into_vec()
            }
            Hyperbolic { n } => {
                let e = self.tangent_basis().expect("basis cache");
                (0..n)
                    .map(|c| minkowski(&e.column(c), v.as_slice()))
                    .collect()
            }
            SymPosDef { n } => {
                let (_, si) = self.spd_roots().expect("spd cache");
                let a = (&(si * v) * si).sym_part();
                upper_pairs(n)
                    .map(|(i, j)| if i == j { a[(i, i)] } else { SQRT_2 * a[(i, j)] })
                    .collect()
            }
            SpecialLinear { n } => {
                let a = lu_solve(b, v)?;
                let ann = a[(n - 1, n - 1)];
                sl_slots(n)
                    .map(|(i, j)| if i == j { a[(i, i)] - ann } else { a[(i, j)] })
                    .collect()
            }
            GeneralLinearPlus { .. } => lu_solve(b, v)?.into_vec(),
        })
    }

    /// Frobenius adjoint of [`coords_to_ambient`](Self::coords_to_ambient):
    /// `g ↦ ∂/∂y ⟨g, Ã(y)⟩`.
    pub fn chart_adjoint(&self, g: &Matrix) -> Result<Vec<f64>> {
        use ManifoldKind::*;
        self.spec.check_shape(g)?;
        let b = &self.value;
        Ok(match self.spec.kind {
            SpecialOrthogonal { .. }
            | RealTorus { .. }
            | SpecialLinear { .. }
            | GeneralLinearPlus { .. } => algebra_adjoint(&self.spec, &(&b.transpose() * g)),
            Stiefel { n, k } => {
                let m = &b.transpose() * g;
                let mut out: Vec<f64> = lower_pairs(k).map(|(i, j)| m[(i, j)] - m[(j, i)]).collect();
                if n > k {
                    let perp = &self.complement().expect("stiefel cache").transpose() * g;
                    out.extend_from_slice(perp.as_slice());
                }
                out
            }
            Sphere { .. } | Hyperbolic { .. } => {
                (&self.tangent_basis().expect("basis cache").transpose() * g).into_vec()
            }
            SymPosDef { .. } => {
                let (s, _) = self.spd_roots().expect("spd cache");
                algebra_adjoint(&self.spec, &(&(s * g) * s))
            }
        })
    }
}

fn fro_inner_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(i, j)` with `i > j`, row-major.
pub(crate) fn lower_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n).flat_map(|i| (0..i).map(move |j| (i, j)))
}

/// `(i, j)` with `i <= j`, row-major.
pub(crate) fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// Every slot except `(n-1, n-1)`, row-major.
fn sl_slots(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n)
        .flat_map(move |i| (0..n).map(move |j| (i, j)))
        .filter(move |&(i, j)| !(i == n - 1 && j == n - 1))
}

/// Projection onto traceless matrices, `A - tr(A)/n I`.
pub fn sl_project(a: &Matrix) -> Matrix {
    let n = a.rows();
    let t = a.trace() / n as f64;
    let mut out = a.clone();
    for i in 0..n {
        out[(i, i)] -= t;
    }
    out
}

/// Algebra element for group-type charts (`Ã = B A`) and the symmetric
/// matrix of the SPD chart (`Ã = S A S`).
///
/// Panics for Stiefel, sphere and hyperboloid, which have no such element.
pub fn algebra_from_coords(spec: &ManifoldSpec, y: &[f64]) -> Matrix {
    use ManifoldKind::*;
    match spec.kind {
        SpecialOrthogonal { n } => {
            let mut a = Matrix::zeros(n, n);
            for ((i, j), &v) in lower_pairs(n).zip(y) {
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
            a
        }
        RealTorus { blocks } => {
            let mut a = Matrix::zeros(2 * blocks, 2 * blocks);
            for (k, &v) in y.iter().enumerate() {
                a[(2 * k + 1, 2 * k)] = v;
                a[(2 * k, 2 * k + 1)] = -v;
            }
            a
        }
        SymPosDef { n } => {
            let mut a = Matrix::zeros(n, n);
            for ((i, j), &v) in upper_pairs(n).zip(y) {
                if i == j {
                    a[(i, i)] = v;
                } else {
                    a[(i, j)] = v * FRAC_1_SQRT_2;
                    a[(j, i)] = v * FRAC_1_SQRT_2;
                }
            }
            a
        }
        SpecialLinear { n } => {
            let mut m = Matrix::zeros(n, n);
            for ((i, j), &v) in sl_slots(n).zip(y) {
                m[(i, j)] = v;
            }
            sl_project(&m)
        }
        GeneralLinearPlus { n } => Matrix::from_vec(n, n, y.to_vec())
            .unwrap_or_else(|_| Matrix::from_fn(n, n, |i, j| y[i * n + j])),
        Stiefel { .. } | Sphere { .. } | Hyperbolic { .. } => {
            panic!("{} has no algebra chart", spec.label())
        }
    }
}

/// Frobenius adjoint of [`algebra_from_coords`].
pub fn algebra_adjoint(spec: &ManifoldSpec, m: &Matrix) -> Vec<f64> {
    use ManifoldKind::*;
    match spec.kind {
        SpecialOrthogonal { n } => lower_pairs(n).map(|(i, j)| m[(i, j)] - m[(j, i)]).collect(),
        RealTorus { blocks } => (0..blocks)
            .map(|k| m[(2 * k + 1, 2 * k)] - m[(2 * k, 2 * k + 1)])
            .collect(),
        SymPosDef { n } => upper_pairs(n)
            .map(|(i, j)| {
                if i == j {
                    m[(i, i)]
                } else {
                    (m[(i, j)] + m[(j, i)]) * FRAC_1_SQRT_2
                }
            })
            .collect(),
        SpecialLinear { n } => {
            let p = sl_project(m);
            sl_slots(n).map(|(i, j)| p[(i, j)]).collect()
        }
        GeneralLinearPlus { .. } => m.as_slice().to_vec(),
        Stiefel { .. } | Sphere { .. } | Hyperbolic { .. } => {
            panic!("{} has no algebra chart", spec.label())
        }
    }
}

/// Splits Stiefel coordinates into the skew `A` (k×k) and `A⊥` ((n-k)×k).
pub(crate) fn stiefel_blocks(n: usize, k: usize, y: &[f64]) -> (Matrix, Matrix) {
    let nskew = k * (k - 1) / 2;
    let mut a = Matrix::zeros(k, k);
    for ((i, j), &v) in lower_pairs(k).zip(&y[..nskew]) {
        a[(i, j)] = v;
        a[(j, i)] = -v;
    }
    let a_perp = Matrix::from_fn(n - k, k, |i, j| y[nskew + i * k + j]);
    (a, a_perp)
}

fn build_cache(spec: &ManifoldSpec, b: &Matrix) -> Result<PointCache> {
    use ManifoldKind::*;
    Ok(match spec.kind {
        Stiefel { n, k } => {
            let q = qr_full(b)?.q;
            PointCache::Complement(q.block(0, k, n, n - k))
        }
        Sphere { n } => {
            let q = qr_full(b)?.q;
            PointCache::TangentBasis(q.block(0, 1, n + 1, n))
        }
        Hyperbolic { n } => PointCache::TangentBasis(hyperbolic_basis(b.as_slice(), n)),
        SymPosDef { .. } => {
            let eig = sym_eig(&b.sym_part())?;
            let lmin = eig.values[0];
            if lmin <= SPD_EIG_FLOOR {
                return Err(ManifoldError::LeftCone(lmin));
            }
            let sqrt = eig.apply(f64::sqrt);
            let inv_sqrt = eig.apply(|l| 1.0 / l.sqrt());
            PointCache::Spd {
                eig,
                sqrt,
                inv_sqrt,
            }
        }
        _ => PointCache::None,
    })
}

/// Lorentz-orthonormal basis of `T_x Hⁿ`: the spatial unit vectors projected
/// onto the tangent plane (`e + ⟨x, e⟩_H x`), then Gram–Schmidt in `⟨·,·⟩_H`.
/// The projection of the time axis is the one left out.
fn hyperbolic_basis(x: &[f64], n: usize) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: Vec<f64> = x.iter().map(|&xj| x[i] * xj).collect();
        v[i] += 1.0;
        for _pass in 0..2 {
            for u in &basis {
                let d = minkowski(u, &v);
                for (vj, uj) in v.iter_mut().zip(u) {
                    *vj -= d * uj;
                }
            }
        }
        let nrm = minkowski(&v, &v).max(0.0).sqrt();
        for vj in v.iter_mut() {
            *vj /= nrm;
        }
        basis.push(v);
    }
    Matrix::from_fn(n + 1, n, |r, c| basis[c][r])
}

/// Deterministic random point for the given seed.
pub fn random_point(spec: &ManifoldSpec, seed: u64) -> Result<Point> {
    random_point_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_point_with(spec: &ManifoldSpec, rng: &mut impl Rng) -> Result<Point> {
    use ManifoldKind::*;
    let value = match spec.kind {
        SpecialOrthogonal { n } => {
            let mut q = qr_thin(&gaussian(n, n, rng))?.q;
            if det(&q)? < 0.0 {
                for i in 0..n {
                    q[(i, 0)] = -q[(i, 0)];
                }
            }
            q
        }
        RealTorus { blocks } => {
            let mut m = Matrix::zeros(2 * blocks, 2 * blocks);
            for b in 0..blocks {
                let t: f64 = rng.random_range(-PI..PI);
                m[(2 * b, 2 * b)] = t.cos();
                m[(2 * b, 2 * b + 1)] = -t.sin();
                m[(2 * b + 1, 2 * b)] = t.sin();
                m[(2 * b + 1, 2 * b + 1)] = t.cos();
            }
            m
        }
        Stiefel { n, k } => qr_thin(&gaussian(n, k, rng))?.q,
        Sphere { n } => {
            let g = gaussian(n + 1, 1, rng);
            let nrm = fro_norm(&g);
            g.scale(1.0 / nrm)
        }
        Hyperbolic { n } => {
            let v = gaussian(n, 1, rng).scale(1.0 / (n as f64).sqrt());
            let r = fro_norm(&v);
            let c = if r > 0.0 { r.sinh() / r } else { 1.0 };
            let mut x: Vec<f64> = v.as_slice().iter().map(|vi| c * vi).collect();
            let spatial: f64 = x.iter().map(|t| t * t).sum();
            x.push((1.0 + spatial).sqrt());
            Matrix::column_vector(&x)
        }
        SymPosDef { n } => {
            let g = gaussian(n, n, rng);
            let mut m = &g * &g.transpose();
            for i in 0..n {
                m[(i, i)] += 1e-3;
            }
            m
        }
        SpecialLinear { n } => loop {
            let g = gaussian(n, n, rng);
            let d = det(&g)?;
            if d > 0.0 {
                break g.scale(d.powf(-1.0 / n as f64));
            }
        },
        GeneralLinearPlus { n } => {
            let mut g = gaussian(n, n, rng);
            if det(&g)? < 0.0 {
                for j in 0..n {
                    g[(0, j)] = -g[(0, j)];
                }
            }
            g
        }
    };
    Point::new(*spec, value)
}

/// Identity-like base point: `I`, `I_{n,k}`, `e₁`, the hyperboloid apex.
pub fn origin(spec: &ManifoldSpec) -> Result<Point> {
    use ManifoldKind::*;
    let (r, c) = spec.ambient_shape();
    let value = match spec.kind {
        Hyperbolic { n } => {
            let mut m = Matrix::zeros(n + 1, 1);
            m[(n, 0)] = 1.0;
            m
        }
        _ => Matrix::from_fn(r, c, |i, j| if i == j { 1.0 } else { 0.0 }),
    };
    Point::new(*spec, value)
}

/// All manifolds at a small size, used by tests and diagnostics.
pub fn catalog(n: usize) -> Vec<ManifoldSpec> {
    let n = n.max(3);
    vec![
        ManifoldSpec::special_orthogonal(n),
        ManifoldSpec::real_torus(n / 2),
        ManifoldSpec::stiefel(n, (n / 2).max(1)),
        ManifoldSpec::stiefel(n, n),
        ManifoldSpec::sphere(n),
        ManifoldSpec::hyperbolic(n),
        ManifoldSpec::sym_pos_def(n),
        ManifoldSpec::special_linear(n),
        ManifoldSpec::general_linear_plus(n),
    ]
    .into_iter()
    .map(|r| r.expect("catalog entries are valid"))
    .collect()
}
