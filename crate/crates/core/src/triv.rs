//! Trivializations `φ_B : T_B M → M` with value and pullback gradient.
//!
//! All maps take chart coordinates `y` (see [`crate::manifolds`]) and a base
//! point `B`. The pullback gradient is the gradient of `y ↦ f(φ_B(y))`
//! given the ambient gradient of `f` at `φ_B(y)`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::densela::{cholesky, fro_norm, lu_solve, qr_thin, svd, LinalgError, Lu, Matrix};
use crate::manifolds::{
    algebra_adjoint, algebra_from_coords, minkowski, stiefel_blocks, ManifoldError, ManifoldKind,
    ManifoldSpec, Point,
};
use crate::matexp::{dexpm, expm, expm_grad, lie_exp_grad, MatexpError};
use crate::rng::{stream_rng, STREAM_DIAGNOSTIC};

/// Step used by the finite-difference pullback fallback and the retraction check.
pub const FD_STEP: f64 = 1e-5;
/// Norm below which sphere and hyperboloid maps switch to series.
pub const SMALL_NORM: f64 = 1e-8;
/// Smallest Cholesky diagonal the Cholesky retraction accepts.
pub const CHOLESKY_DIAG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrivKind {
    LieExp,
    RiemannianExp,
    Cayley,
    Projector,
    Squaring,
    Cholesky,
}

impl TrivKind {
    pub const ALL: [TrivKind; 6] = [
        TrivKind::LieExp,
        TrivKind::RiemannianExp,
        TrivKind::Cayley,
        TrivKind::Projector,
        TrivKind::Squaring,
        TrivKind::Cholesky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrivKind::LieExp => "lie_exp",
            TrivKind::RiemannianExp => "riemannian_exp",
            TrivKind::Cayley => "cayley",
            TrivKind::Projector => "projector",
            TrivKind::Squaring => "squaring",
            TrivKind::Cholesky => "cholesky",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for TrivKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrivError {
    #[error("{kind} is not available on {manifold}")]
    Unsupported { kind: TrivKind, manifold: String },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Matexp(#[from] MatexpError),
    #[error("non-finite chart coordinates")]
    NonFiniteCoords,
    #[error("projector input has det = 0")]
    DegenerateProjection,
    #[error("Cholesky factor lost positivity (diagonal {0:e})")]
    CholeskyDiagonal(f64),
}

impl From<LinalgError> for TrivError {
    fn from(e: LinalgError) -> Self {
        TrivError::Manifold(ManifoldError::Linalg(e))
    }
}

pub type Result<T> = std::result::Result<T, TrivError>;

/// Block layout of the Stiefel geodesic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StiefelBlock {
    /// `[[A, -Rᵀ], [R, 0]]`, skew-symmetric.
    Transposed,
    /// `[[A, -R], [R, 0]]`.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trivialization {
    kind: TrivKind,
    spec: ManifoldSpec,
}

pub fn supports(kind: TrivKind, spec: &ManifoldSpec) -> bool {
    use ManifoldKind::*;
    use TrivKind::*;
    match kind {
        LieExp => matches!(
            spec.kind,
            SpecialOrthogonal { .. }
                | RealTorus { .. }
                | SpecialLinear { .. }
                | GeneralLinearPlus { .. }
        ),
        RiemannianExp => true,
        Cayley => matches!(spec.kind, SpecialOrthogonal { .. }),
        Projector => matches!(spec.kind, SpecialOrthogonal { .. } | Sphere { .. }),
        Squaring | Cholesky => matches!(spec.kind, SymPosDef { .. }),
    }
}

impl Trivialization {
    pub fn new(kind: TrivKind, spec: ManifoldSpec) -> Result<Self> {
        if !supports(kind, &spec) {
            return Err(TrivError::Unsupported {
                kind,
                manifold: spec.label(),
            });
        }
        Ok(Self { kind, spec })
    }

    pub fn kind(&self) -> TrivKind {
        self.kind
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    fn check(&self, base: &Point, y: &[f64]) -> Result<()> {
        if base.spec() != &self.spec {
            return Err(ManifoldError::InvalidSpec(format!(
                "base lives on {}, trivialization on {}",
                base.spec().label(),
                self.spec.label()
            ))
            .into());
        }
        if y.len() != self.spec.dim {
            return Err(ManifoldError::Dimension {
                expected: self.spec.dim,
                got: y.len(),
            }
            .into());
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TrivError::NonFiniteCoords);
        }
        Ok(())
    }

    /// `φ_B(y)` as a validated point.
    pub fn value(&self, base: &Point, y: &[f64]) -> Result<Point> {
        let m = self.value_matrix(base, y)?;
        Ok(Point::new(self.spec, m)?)
    }

    /// `φ_B(y)` without the membership check.
    pub fn value_matrix(&self, base: &Point, y: &[f64]) -> Result<Matrix> {
        use ManifoldKind::*;
        use TrivKind::*;
        self.check(base, y)?;
        let b = base.value();
        Ok(match (self.kind, self.spec.kind) {
            (LieExp, _) => {
                let at = base.coords_to_ambient(y)?;
                let x = Lu::factor(b)?.solve(&at)?;
                b * &expm(&x)?
            }
            (RiemannianExp, SpecialOrthogonal { .. } | RealTorus { .. }) => {
                b * &expm(&algebra_from_coords(&self.spec, y))?
            }
            (RiemannianExp, SpecialLinear { .. } | GeneralLinearPlus { .. }) => {
                let a = algebra_from_coords(&self.spec, y);
                let at = a.transpose();
                &(b * &expm(&at)?) * &expm(&(&a - &at))?
            }
            (RiemannianExp, Stiefel { n, k }) => {
                let (a, a_perp) = stiefel_blocks(n, k, y);
                stiefel_geodesic(b, base.complement(), &a, &a_perp, StiefelBlock::Transposed)?
            }
            (RiemannianExp, Sphere { .. }) => {
                let r = norm(y);
                let v = base.coords_to_ambient(y)?;
                let (c, s) = (r.cos(), sinc(r));
                &b.scale(c) + &v.scale(s)
            }
            (RiemannianExp, Hyperbolic { .. }) => {
                let r = norm(y);
                let v = base.coords_to_ambient(y)?;
                let (c, s) = (r.cosh(), sinhc(r));
                &b.scale(c) + &v.scale(s)
            }
            (RiemannianExp, SymPosDef { .. }) => {
                let (s, _) = base.spd_roots().expect("spd cache");
                let e = expm(&algebra_from_coords(&self.spec, y))?;
                (&(s * &e) * s).sym_part()
            }
            (Cayley, _) => {
                let a = algebra_from_coords(&self.spec, y);
                b * &half_cayley(&a)?.0
            }
            (Projector, SpecialOrthogonal { .. }) => {
                let w = b + &base.coords_to_ambient(y)?;
                polar_so(&w)?
            }
            (Projector, Sphere { .. }) => {
                let w = b + &base.coords_to_ambient(y)?;
                let r = fro_norm(&w);
                if r == 0.0 {
                    return Err(TrivError::DegenerateProjection);
                }
                w.scale(1.0 / r)
            }
            (Squaring, _) => {
                let at = base.coords_to_ambient(y)?;
                let (s, _) = base.spd_roots().expect("spd cache");
                let p = s + &sylvester_half(base, &at);
                (&p * &p).sym_part()
            }
            (Cholesky, _) => {
                let l = cholesky_factor(base, &base.coords_to_ambient(y)?)?.0;
                (&l * &l.transpose()).sym_part()
            }
            (kind, _) => unreachable!("{kind} rejected at construction"),
        })
    }

    /// Gradient of `y ↦ f(φ_B(y))` in chart coordinates, given the ambient
    /// gradient `g` of `f` at `φ_B(y)`.
    pub fn pullback_grad(&self, base: &Point, y: &[f64], g: &Matrix) -> Result<Vec<f64>> {
        use ManifoldKind::*;
        use TrivKind::*;
        self.check(base, y)?;
        if g.shape() != self.spec.ambient_shape() {
            return Err(ManifoldError::Shape {
                expected: self.spec.ambient_shape(),
                got: g.shape(),
            }
            .into());
        }
        let b = base.value();
        let grad = match (self.kind, self.spec.kind) {
            (LieExp, _) => {
                let at = base.coords_to_ambient(y)?;
                base.chart_adjoint(&lie_exp_grad(b, &at, g)?)?
            }
            (RiemannianExp, SpecialOrthogonal { .. } | RealTorus { .. }) => {
                let a = algebra_from_coords(&self.spec, y);
                let h = &b.transpose() * g;
                algebra_adjoint(&self.spec, &expm_grad(&a, &h)?)
            }
            (RiemannianExp, SpecialLinear { .. } | GeneralLinearPlus { .. }) => {
                let a = algebra_from_coords(&self.spec, y);
                let at = a.transpose();
                let d = &a - &at;
                let w = expm(&d)?;
                let ea = expm(&a)?;
                let h = &b.transpose() * g;
                let first = dexpm(&a, &(&h * &w.transpose()))?.transpose();
                let k = dexpm(&(-&d), &(&ea * &h))?;
                let grad_a = &(&first + &k) - &k.transpose();
                algebra_adjoint(&self.spec, &grad_a)
            }
            (RiemannianExp, Stiefel { .. }) | (Projector, SpecialOrthogonal { .. }) => {
                if y.iter().all(|&v| v == 0.0) {
                    // the differential at the origin is the identity
                    base.chart_adjoint(g)?
                } else {
                    // TODO: closed form via the n×n generator [[A, -A⊥ᵀ], [A⊥, 0]]
                    self.fd_pullback(base, y, g)?
                }
            }
            (RiemannianExp, Sphere { .. }) => {
                let r = norm(y);
                let v = base.coords_to_ambient(y)?;
                let gx = dot(g.as_slice(), b.as_slice());
                let gv = dot(g.as_slice(), v.as_slice());
                let c = -sinc(r) * gx + sinc_prime_over_r(r) * gv;
                base.chart_adjoint(&(&g.scale(sinc(r)) + &v.scale(c)))?
            }
            (RiemannianExp, Hyperbolic { n }) => {
                let r = norm(y);
                let v = base.coords_to_ambient(y)?;
                let gx = dot(g.as_slice(), b.as_slice());
                let gv = dot(g.as_slice(), v.as_slice());
                let c = sinhc(r) * gx + sinhc_prime_over_r(r) * gv;
                let mut jv = v.clone();
                jv[(n, 0)] = -jv[(n, 0)];
                base.chart_adjoint(&(&g.scale(sinhc(r)) + &jv.scale(c)))?
            }
            (RiemannianExp, SymPosDef { .. }) => {
                let (s, _) = base.spd_roots().expect("spd cache");
                let a = algebra_from_coords(&self.spec, y);
                let h = &(s * &g.sym_part()) * s;
                algebra_adjoint(&self.spec, &expm_grad(&a, &h)?)
            }
            (Cayley, _) => {
                let a = algebra_from_coords(&self.spec, y);
                let (c, m) = half_cayley(&a)?;
                let ipc = &Matrix::identity(c.rows()) + &c;
                let h = &(&ipc.transpose() * &(&b.transpose() * g)) * &m.transpose();
                algebra_adjoint(&self.spec, &h.scale(0.5))
            }
            (Projector, Sphere { .. }) => {
                let w = b + &base.coords_to_ambient(y)?;
                let r = fro_norm(&w);
                if r == 0.0 {
                    return Err(TrivError::DegenerateProjection);
                }
                let wg = dot(w.as_slice(), g.as_slice());
                let gw = &g.scale(1.0 / r) - &w.scale(wg / (r * r * r));
                base.chart_adjoint(&gw)?
            }
            (Squaring, _) => {
                let at = base.coords_to_ambient(y)?;
                let (s, _) = base.spd_roots().expect("spd cache");
                let p = s + &sylvester_half(base, &at);
                let gs = g.sym_part();
                let h = &(&gs * &p) + &(&p * &gs);
                base.chart_adjoint(&sylvester_half(base, &h))?
            }
            (Cholesky, _) => {
                let (l, l0) = cholesky_factor(base, &base.coords_to_ambient(y)?)?;
                let p = lower_half_mask(&(&l0.transpose() * &(&g.sym_part() * &l)).scale(2.0));
                let lu = Lu::factor(&l0.transpose())?;
                // L₀⁻ᵀ P L₀⁻¹
                let left = lu.solve(&p)?;
                let grad_at = lu.solve(&left.transpose())?.transpose();
                base.chart_adjoint(&grad_at)?
            }
            (kind, _) => unreachable!("{kind} rejected at construction"),
        };
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(TrivError::NonFiniteCoords);
        }
        Ok(grad)
    }

    /// Central differences of `⟨g, φ_B(y)⟩` per coordinate.
    fn fd_pullback(&self, base: &Point, y: &[f64], g: &Matrix) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(y.len());
        let mut yp = y.to_vec();
        for i in 0..y.len() {
            yp[i] = y[i] + FD_STEP;
            let fp = dot(g.as_slice(), self.value_matrix(base, &yp)?.as_slice());
            yp[i] = y[i] - FD_STEP;
            let fm = dot(g.as_slice(), self.value_matrix(base, &yp)?.as_slice());
            yp[i] = y[i];
            out.push((fp - fm) / (2.0 * FD_STEP));
        }
        Ok(out)
    }

    /// Largest deviation of the centred difference of `φ_B` along random unit
    /// chart directions from the chart image of that direction.
    pub fn is_retraction_check(&self, base: &Point, seed: u64) -> Result<f64> {
        let mut rng = stream_rng(seed, STREAM_DIAGNOSTIC);
        let dim = self.spec.dim;
        let mut worst: f64 = 0.0;
        for _ in 0..4 {
            let mut e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = norm(&e);
            e.iter_mut().for_each(|v| *v /= nrm);
            let plus: Vec<f64> = e.iter().map(|v| v * FD_STEP).collect();
            let minus: Vec<f64> = e.iter().map(|v| -v * FD_STEP).collect();
            let diff = &self.value_matrix(base, &plus)? - &self.value_matrix(base, &minus)?;
            let dev = &diff.scale(0.5 / FD_STEP) - &base.coords_to_ambient(&e)?;
            worst = worst.max(fro_norm(&dev));
        }
        Ok(worst)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(y: &[f64]) -> f64 {
    fro_norm(&Matrix::column_vector(y))
}

fn sinc(r: f64) -> f64 {
    if r < SMALL_NORM {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    }
}

fn sinhc(r: f64) -> f64 {
    if r < SMALL_NORM {
        1.0 + r * r / 6.0
    } else {
        r.sinh() / r
    }
}

/// `(r cos r - sin r) / r³`.
fn sinc_prime_over_r(r: f64) -> f64 {
    if r < 1e-2 {
        let r2 = r * r;
        -1.0 / 3.0 + r2 * (1.0 / 30.0 - r2 * (1.0 / 840.0 - r2 / 45360.0))
    } else {
        (r * r.cos() - r.sin()) / (r * r * r)
    }
}

/// `(r cosh r - sinh r) / r³`.
fn sinhc_prime_over_r(r: f64) -> f64 {
    if r < 1e-2 {
        let r2 = r * r;
        1.0 / 3.0 + r2 * (1.0 / 30.0 + r2 * (1.0 / 840.0 + r2 / 45360.0))
    } else {
        (r * r.cosh() - r.sinh()) / (r * r * r)
    }
}

/// `(C, M)` with `M = (I - A/2)⁻¹` and `C = (I + A/2) M`.
fn half_cayley(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    let id = Matrix::identity(n);
    let half = a.scale(0.5);
    let m = lu_solve(&(&id - &half), &id)?;
    let c = &(&id + &half) * &m;
    Ok((c, m))
}

/// Polar factor of `w` in SO(n); the last left singular vector flips when
/// the orthogonal factor would be a reflection.
fn polar_so(w: &Matrix) -> Result<Matrix> {
    let d = crate::densela::det(w)?;
    if d == 0.0 {
        return Err(TrivError::DegenerateProjection);
    }
    let f = svd(w);
    let mut u = f.u;
    let q = &u * &f.v.transpose();
    if crate::densela::det(&q)? < 0.0 {
        let last = u.cols() - 1;
        for i in 0..u.rows() {
            u[(i, last)] = -u[(i, last)];
        }
        return Ok(&u * &f.v.transpose());
    }
    Ok(q)
}

/// Solution `Z` of `S Z + Z S = X` for `S = B^½`, computed in `B`'s eigenbasis.
/// The map is self-adjoint in the Frobenius product.
fn sylvester_half(base: &Point, x: &Matrix) -> Matrix {
    let eig = base.spd_eig().expect("spd cache");
    let v = &eig.vectors;
    let xp = &(&v.transpose() * x) * v;
    let s: Vec<f64> = eig.values.iter().map(|l| l.sqrt()).collect();
    let zp = Matrix::from_fn(xp.rows(), xp.cols(), |i, j| xp[(i, j)] / (s[i] + s[j]));
    (&(v * &zp) * &v.transpose()).sym_part()
}

/// Strict lower triangle plus half the diagonal.
fn lower_half_mask(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        if i > j {
            m[(i, j)]
        } else if i == j {
            0.5 * m[(i, i)]
        } else {
            0.0
        }
    })
}

/// `(L, L₀)` with `L₀ = chol(B)` and `L = L₀ + L₀ Φ(L₀⁻¹ Ã L₀⁻ᵀ)`.
fn cholesky_factor(base: &Point, at: &Matrix) -> Result<(Matrix, Matrix)> {
    let l0 = cholesky(base.value())?;
    let lu = Lu::factor(&l0)?;
    let left = lu.solve(at)?;
    let x = lu.solve(&left.transpose())?.transpose();
    let l = &l0 + &(&l0 * &lower_half_mask(&x.sym_part()));
    let dmin = (0..l.rows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(dmin > CHOLESKY_DIAG_FLOOR) {
        return Err(TrivError::CholeskyDiagonal(dmin));
    }
    Ok((l, l0))
}

/// Canonical-metric Stiefel geodesic from `B` with initial velocity
/// `B A + B⊥ A⊥`.
///
/// The normal part is factored as `Q R` with `Q = B⊥ Q̂`, `Q̂ R = A⊥`, so `Q`
/// stays exactly orthogonal to `B`. When `A⊥` is wide the factorization is
/// skipped (`Q = B⊥`, `R = A⊥`), which gives the same curve.
pub fn stiefel_geodesic(
    b: &Matrix,
    b_perp: Option<&Matrix>,
    a: &Matrix,
    a_perp: &Matrix,
    block: StiefelBlock,
) -> Result<Matrix> {
    let (n, k) = b.shape();
    if n == k {
        return Ok(b * &expm(a)?);
    }
    let b_perp = b_perp.expect("stiefel cache");
    let (q, r) = if a_perp.rows() >= k {
        let f = qr_thin(a_perp)?;
        (b_perp * &f.q, f.r)
    } else {
        (b_perp.clone(), a_perp.clone())
    };
    let p = r.rows();
    let upper_right = match block {
        StiefelBlock::Transposed => -&r.transpose(),
        StiefelBlock::AsPrinted => {
            if p != k {
                return Err(ManifoldError::InvalidSpec(
                    "printed block layout needs a square R".to_string(),
                )
                .into());
            }
            -&r
        }
    };
    let mut gen = Matrix::zeros(k + p, k + p);
    gen.set_block(0, 0, a);
    gen.set_block(0, k, &upper_right);
    gen.set_block(k, 0, &r);
    let e = expm(&gen)?;
    let frame = b.hstack(&q)?;
    Ok(&frame * &e.block(0, 0, k + p, k))
}

/// Chart image of the Riemannian gradient at `x`, for the metric the chart
/// of `spec` is an isometry for. Used as the reference for the `K = 1`
/// equivalence and exposed for diagnostics.
pub fn riemannian_grad(x: &Point, g: &Matrix) -> Result<Matrix> {
    use ManifoldKind::*;
    let b = x.value();
    Ok(match x.spec().kind {
        SpecialOrthogonal { .. } | RealTorus { .. } => {
            // the chart coordinates are orthonormal for ½ tr(XᵀY)
            let grad_coords = x.chart_adjoint(g)?;
            x.coords_to_ambient(&grad_coords)?
        }
        Stiefel { .. } => g - &(&(b * &g.transpose()) * b),
        Sphere { .. } => {
            let bg = dot(b.as_slice(), g.as_slice());
            g - &b.scale(bg)
        }
        Hyperbolic { n } => {
            let mut jg = g.clone();
            jg[(n, 0)] = -jg[(n, 0)];
            let c = minkowski(b.as_slice(), jg.as_slice());
            &jg + &b.scale(c)
        }
        SymPosDef { .. } => &(b * &g.sym_part()) * b,
        GeneralLinearPlus { .. } => &(b * &b.transpose()) * g,
        SpecialLinear { .. } => {
            let grad_coords = x.chart_adjoint(g)?;
            x.coords_to_ambient(&grad_coords)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::det;
    use crate::manifolds::{catalog, membership, origin, random_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pairs(n: usize) -> Vec<Trivialization> {
        let mut out = Vec::new();
        let mut specs = catalog(n);
        specs.push(ManifoldSpec::special_orthogonal(2).unwrap());
        specs.push(ManifoldSpec::stiefel(n + 1, 2).unwrap());
        for spec in specs {
            for kind in TrivKind::ALL {
                if let Ok(t) = Trivialization::new(kind, spec) {
                    out.push(t);
                }
            }
        }
        out
    }

    fn gaussian_vec(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
        (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Trust region where every map stays well conditioned.
    fn coord_scale(t: &Trivialization) -> f64 {
        match t.kind() {
            TrivKind::Squaring | TrivKind::Cholesky => 0.1,
            _ => 0.4,
        }
    }

    #[test]
    fn support_table() {
        let so = ManifoldSpec::special_orthogonal(3).unwrap();
        let st = ManifoldSpec::stiefel(4, 2).unwrap();
        let spd = ManifoldSpec::sym_pos_def(3).unwrap();
        assert!(Trivialization::new(TrivKind::Cayley, so).is_ok());
        assert!(Trivialization::new(TrivKind::Cayley, st).is_err());
        assert!(Trivialization::new(TrivKind::LieExp, st).is_err());
        assert!(Trivialization::new(TrivKind::Squaring, spd).is_ok());
        assert!(Trivialization::new(TrivKind::Projector, spd).is_err());
        for spec in catalog(3) {
            assert!(Trivialization::new(TrivKind::RiemannianExp, spec).is_ok());
        }
        assert_eq!(TrivKind::from_name("cayley"), Some(TrivKind::Cayley));
    }

    #[test]
    fn value_at_origin_is_base() {
        for n in [3, 4] {
            for t in pairs(n) {
                let base = random_point(t.spec(), 11).unwrap();
                let x = t.value_matrix(&base, &vec![0.0; t.spec().dim]).unwrap();
                let err = fro_norm(&(&x - base.value()));
                assert!(err <= 1e-12 * fro_norm(base.value()).max(1.0), "{:?} {}", t.kind(), t.spec().label());
            }
        }
    }

    #[test]
    fn sphere_quarter_circle() {
        let spec = ManifoldSpec::sphere(2).unwrap();
        let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
        let base = origin(&spec).unwrap();
        let v = Matrix::column_vector(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]);
        let y = base.ambient_to_coords(&v).unwrap();
        let x = t.value(&base, &y).unwrap();
        let want = Matrix::column_vector(&[0.0, 1.0, 0.0]);
        assert!(fro_norm(&(x.value() - &want)) < 1e-15);
    }

    #[test]
    fn cayley_matches_raw_map_on_doubled_input() {
        let spec = ManifoldSpec::special_orthogonal(2).unwrap();
        let t = Trivialization::new(TrivKind::Cayley, spec).unwrap();
        let base = origin(&spec).unwrap();
        let x = t.value(&base, &[2.0]).unwrap();
        let want = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        assert!(fro_norm(&(x.value() - &want)) < 1e-15);
        let raw = crate::matexp::cayley(&Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]])).unwrap();
        assert!(fro_norm(&(&raw - &want)) < 1e-15);
    }

    #[test]
    fn spd_exponential_of_diagonal() {
        let spec = ManifoldSpec::sym_pos_def(2).unwrap();
        let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
        let base = origin(&spec).unwrap();
        let y = base.ambient_to_coords(&Matrix::diag(&[1.0, 2.0])).unwrap();
        let x = t.value(&base, &y).unwrap();
        let e = std::f64::consts::E;
        let want = Matrix::diag(&[e, e * e]);
        assert!(fro_norm(&(x.value() - &want)) < 1e-14 * e * e);
    }

    #[test]
    fn membership_preserved_for_moderate_coords() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [3, 5] {
            for t in pairs(n) {
                let base = random_point(t.spec(), 2).unwrap();
                for _ in 0..5 {
                    let mut y = gaussian_vec(t.spec().dim, &mut rng, 1.0);
                    let nrm = norm(&y);
                    let target = match t.kind() {
                        TrivKind::Squaring | TrivKind::Cholesky => 0.3,
                        _ => rng.random_range(0.0..3.0),
                    };
                    y.iter_mut().for_each(|v| *v *= target / nrm);
                    let x = t.value_matrix(&base, &y).unwrap();
                    let m = membership(t.spec(), &x).unwrap();
                    let scale = match t.spec().kind {
                        ManifoldKind::SpecialLinear { .. } | ManifoldKind::Hyperbolic { .. } => {
                            fro_norm(&x).max(1.0).powi(2)
                        }
                        _ => 1.0,
                    };
                    assert!(m <= 1e-8 * scale, "{:?} {} {m}", t.kind(), t.spec().label());
                }
            }
        }
    }

    #[test]
    fn special_linear_keeps_unit_determinant() {
        let spec = ManifoldSpec::special_linear(4).unwrap();
        let base = random_point(&spec, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [TrivKind::LieExp, TrivKind::RiemannianExp] {
            let t = Trivialization::new(kind, spec).unwrap();
            for _ in 0..10 {
                let y = gaussian_vec(spec.dim, &mut rng, 0.3);
                let x = t.value_matrix(&base, &y).unwrap();
                assert!((det(&x).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lie_and_riemannian_agree_on_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 3, 6] {
            let spec = ManifoldSpec::special_orthogonal(n).unwrap();
            let base = random_point(&spec, n as u64).unwrap();
            let lie = Trivialization::new(TrivKind::LieExp, spec).unwrap();
            let rie = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
            for _ in 0..5 {
                let y = gaussian_vec(spec.dim, &mut rng, 1.0);
                let a = lie.value_matrix(&base, &y).unwrap();
                let b = rie.value_matrix(&base, &y).unwrap();
                assert!(fro_norm(&(&a - &b)) <= 1e-12);
            }
        }
    }

    /// f(X) = tr(CX): compares the pullback gradient with central differences.
    #[test]
    fn pullback_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [3, 4, 6] {
            for t in pairs(n) {
                let spec = *t.spec();
                let base = random_point(&spec, 100 + n as u64).unwrap();
                let (r, c) = spec.ambient_shape();
                let cm = Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal));
                let f = |y: &[f64]| dot(cm.as_slice(), t.value_matrix(&base, y).unwrap().as_slice());
                for trial in 0..2 {
                    let y = if trial == 0 {
                        vec![0.0; spec.dim]
                    } else {
                        gaussian_vec(spec.dim, &mut rng, coord_scale(&t))
                    };
                    let got = t.pullback_grad(&base, &y, &cm).unwrap();
                    let h = 1e-6;
                    let mut fd = Vec::with_capacity(spec.dim);
                    for i in 0..spec.dim {
                        let mut yp = y.clone();
                        yp[i] += h;
                        let mut ym = y.clone();
                        ym[i] -= h;
                        fd.push((f(&yp) - f(&ym)) / (2.0 * h));
                    }
                    let err = norm(&got.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
                    let rel = err / norm(&fd).max(1e-12);
                    assert!(rel <= 1e-6, "{:?} {} trial {trial}: {rel:e}", t.kind(), spec.label());
                }
            }
        }
    }

    #[test]
    fn zero_ambient_gradient_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in pairs(3) {
            let base = random_point(t.spec(), 1).unwrap();
            let y = gaussian_vec(t.spec().dim, &mut rng, 0.1);
            let (r, c) = t.spec().ambient_shape();
            let g = t.pullback_grad(&base, &y, &Matrix::zeros(r, c)).unwrap();
            assert!(g.iter().all(|v| *v == 0.0), "{:?} {}", t.kind(), t.spec().label());
        }
    }

    #[test]
    fn lie_pullback_at_identity_is_projected_expm_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = ManifoldSpec::special_orthogonal(4).unwrap();
        let t = Trivialization::new(TrivKind::LieExp, spec).unwrap();
        let base = origin(&spec).unwrap();
        let y = gaussian_vec(spec.dim, &mut rng, 0.7);
        let g = Matrix::from_fn(4, 4, |_, _| rng.sample(StandardNormal));
        let got = t.pullback_grad(&base, &y, &g).unwrap();
        let a = algebra_from_coords(&spec, &y);
        let want = algebra_adjoint(&spec, &expm_grad(&a, &g).unwrap());
        for (u, v) in got.iter().zip(&want) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn retraction_check_passes_everywhere() {
        for n in [3, 5] {
            for t in pairs(n) {
                let base = random_point(t.spec(), 17).unwrap();
                let dev = t.is_retraction_check(&base, 1).unwrap();
                let bound = 1e-4 * (1.0 + fro_norm(base.value()));
                assert!(dev <= bound, "{:?} {}: {dev:e}", t.kind(), t.spec().label());
                assert_eq!(dev, t.is_retraction_check(&base, 1).unwrap());
            }
        }
    }

    #[test]
    fn retraction_check_on_so2_is_nearly_exact() {
        let spec = ManifoldSpec::special_orthogonal(2).unwrap();
        let t = Trivialization::new(TrivKind::LieExp, spec).unwrap();
        let base = origin(&spec).unwrap();
        // centred difference of sin h / h: error h²/6
        let dev = t.is_retraction_check(&base, 0).unwrap();
        assert!(dev <= FD_STEP * FD_STEP, "{dev:e}");
    }

    #[test]
    fn stiefel_printed_block_breaks_membership() {
        let spec = ManifoldSpec::stiefel(6, 3).unwrap();
        let base = random_point(&spec, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut worst_printed: f64 = 0.0;
        for _ in 0..5 {
            let y = gaussian_vec(spec.dim, &mut rng, 1.0);
            let (a, a_perp) = stiefel_blocks(6, 3, &y);
            let good = stiefel_geodesic(base.value(), base.complement(), &a, &a_perp, StiefelBlock::Transposed).unwrap();
            assert!(membership(&spec, &good).unwrap() <= 1e-12);
            let printed = stiefel_geodesic(base.value(), base.complement(), &a, &a_perp, StiefelBlock::AsPrinted).unwrap();
            worst_printed = worst_printed.max(membership(&spec, &printed).unwrap());
        }
        assert!(worst_printed > 1e-3, "{worst_printed:e}");
    }

    #[test]
    fn projector_rejects_singular_input() {
        let spec = ManifoldSpec::special_orthogonal(2).unwrap();
        let t = Trivialization::new(TrivKind::Projector, spec).unwrap();
        let base = origin(&spec).unwrap();
        // I + [[0,-1],[1,0]]·y has det 1 + y², never zero; use the SVD path directly
        assert!(matches!(polar_so(&Matrix::zeros(2, 2)), Err(TrivError::DegenerateProjection)));
        assert!(t.value(&base, &[10.0]).is_ok());
    }

    #[test]
    fn cholesky_rejects_loss_of_positivity() {
        let spec = ManifoldSpec::sym_pos_def(2).unwrap();
        let t = Trivialization::new(TrivKind::Cholesky, spec).unwrap();
        let base = origin(&spec).unwrap();
        assert!(matches!(t.value(&base, &[-2.0, 0.0, 0.0]), Err(TrivError::CholeskyDiagonal(_))));
    }

    #[test]
    fn non_finite_coords_rejected() {
        let spec = ManifoldSpec::sphere(2).unwrap();
        let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
        let base = origin(&spec).unwrap();
        assert!(matches!(t.value(&base, &[f64::NAN, 0.0]), Err(TrivError::NonFiniteCoords)));
    }

    #[test]
    fn riemannian_grad_is_pullback_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for spec in catalog(4) {
            let t = Trivialization::new(TrivKind::RiemannianExp, spec).unwrap();
            let x = random_point(&spec, 6).unwrap();
            let (r, c) = spec.ambient_shape();
            let g = Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal));
            let coords = t.pullback_grad(&x, &vec![0.0; spec.dim], &g).unwrap();
            let via_chart = x.coords_to_ambient(&coords).unwrap();
            let reference = riemannian_grad(&x, &g).unwrap();
            let err = fro_norm(&(&via_chart - &reference));
            assert!(err <= 1e-12 * fro_norm(&reference).max(1.0) * fro_norm(x.value()).max(1.0).powi(2), "{} {err:e}", spec.label());
        }
    }
}
