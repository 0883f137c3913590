//! Matrix exponential, its Fréchet derivative, and the adjoint formulas that
//! turn an ambient gradient at `e^A` into a gradient with respect to `A`.
//!
//! `expm` is the degree-{3,5,7,9,13} Padé scaling-and-squaring method.
//! The Fréchet derivative `L(A, E) = (d exp)_A(E)` is read off the top-right
//! block of `exp([[A, E], [0, A]])`. For the Frobenius inner product the
//! adjoint of `L(A, ·)` is `L(Aᵀ, ·)`, which is all the gradient routines
//! below rely on.

use thiserror::Error;

use crate::densela::{fro_norm, lu_solve, sym_eig, LinalgError, Lu, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatexpError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("injectivity check needs a symmetric or skew-symmetric matrix (residual {0:e})")]
    UnsupportedStructure(f64),
}

pub type Result<T> = std::result::Result<T, MatexpError>;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Result of [`expm_report`]: the exponential plus the parameters used.
#[derive(Debug, Clone)]
pub struct ExpmReport {
    pub value: Matrix,
    pub squarings: u32,
    pub pade_degree: u32,
}

fn require_square(a: &Matrix, op: &'static str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare {
            op,
            rows: a.rows(),
            cols: a.cols(),
        }
        .into())
    }
}

fn require_same(a: &Matrix, b: &Matrix, op: &'static str) -> Result<()> {
    require_square(a, op)?;
    if a.shape() != b.shape() {
        return Err(LinalgError::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        }
        .into());
    }
    Ok(())
}

/// Picks the Padé degree and number of squarings from the 1-norm.
fn select_parameters(norm: f64) -> (u32, u32) {
    for (theta, m) in [(THETA_3, 3), (THETA_5, 5), (THETA_7, 7), (THETA_9, 9)] {
        if norm <= theta {
            return (m, 0);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    (13, s)
}

fn axpy_sum(terms: &[(f64, &Matrix)], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, n);
    for &(c, m) in terms {
        for (o, v) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *o += c * v;
        }
    }
    out
}

fn add_identity(m: &mut Matrix, c: f64) {
    for i in 0..m.rows() {
        m[(i, i)] += c;
    }
}

/// Odd part `U` and even part `V` of the degree-m Padé numerator.
fn pade_uv(a: &Matrix, m: u32) -> (Matrix, Matrix) {
    let n = a.rows();
    let a2 = a * a;
    if m == 13 {
        let b = &B13;
        let a4 = &a2 * &a2;
        let a6 = &a2 * &a4;
        let w1 = axpy_sum(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
        let mut w2 = axpy_sum(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
        add_identity(&mut w2, b[1]);
        let z1 = axpy_sum(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
        let mut z2 = axpy_sum(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
        add_identity(&mut z2, b[0]);
        let mut w = &a6 * &w1;
        w += &w2;
        let u = a * &w;
        let mut v = &a6 * &z1;
        v += &z2;
        return (u, v);
    }
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let mut powers = vec![Matrix::identity(n), a2];
    while powers.len() * 2 <= m as usize {
        let next = &powers[powers.len() - 1] * &powers[1];
        powers.push(next);
    }
    let mut w = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        w += &p.scale(b[2 * k + 1]);
        v += &p.scale(b[2 * k]);
    }
    (a * &w, v)
}

/// Matrix exponential with the scaling and Padé parameters used.
pub fn expm_report(a: &Matrix) -> Result<ExpmReport> {
    require_square(a, "expm")?;
    let n = a.rows();
    if n == 0 {
        return Ok(ExpmReport {
            value: Matrix::zeros(0, 0),
            squarings: 0,
            pade_degree: 3,
        });
    }
    let (m, s) = select_parameters(a.norm1());
    let scaled = a.scale(0.5f64.powi(s as i32));
    let (u, v) = pade_uv(&scaled, m);
    let q = &v - &u;
    let p = &v + &u;
    let mut x = lu_solve(&q, &p)?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(ExpmReport {
        value: x,
        squarings: s,
        pade_degree: m,
    })
}

pub fn expm(a: &Matrix) -> Result<Matrix> {
    Ok(expm_report(a)?.value)
}

/// Fréchet derivative `L(A, E)` of the exponential via the block identity
/// `exp([[A, E], [0, A]]) = [[e^A, L(A, E)], [0, e^A]]`.
pub fn dexpm(a: &Matrix, e: &Matrix) -> Result<Matrix> {
    require_same(a, e, "dexpm")?;
    let n = a.rows();
    let enorm = e.norm1();
    if enorm == 0.0 {
        return Ok(Matrix::zeros(n, n));
    }
    // L is linear in E; rescale so E does not inflate the squaring count.
    let target = a.norm1().max(1.0);
    let c = target / enorm;
    let mut big = Matrix::zeros(2 * n, 2 * n);
    big.set_block(0, 0, a);
    big.set_block(n, n, a);
    big.set_block(0, n, &e.scale(c));
    let ex = expm(&big)?;
    Ok(ex.block(0, n, n, n).scale(1.0 / c))
}

/// Joint evaluation of `e^A` and `L(A, E)` by differentiating the Padé
/// approximant and the squaring recurrence. Same contract as [`dexpm`];
/// one n×n pass instead of a 2n×2n exponential.
pub fn dexpm_coupled(a: &Matrix, e: &Matrix) -> Result<(Matrix, Matrix)> {
    require_same(a, e, "dexpm_coupled")?;
    let n = a.rows();
    let (m, s) = select_parameters(a.norm1());
    let scale = 0.5f64.powi(s as i32);
    let a = a.scale(scale);
    let e = e.scale(scale);

    let a2 = &a * &a;
    let m2 = &(&a * &e) + &(&e * &a);
    let (u, v, lu, lv) = if m == 13 {
        let b = &B13;
        let a4 = &a2 * &a2;
        let m4 = &(&a2 * &m2) + &(&m2 * &a2);
        let a6 = &a2 * &a4;
        let m6 = &(&a2 * &m4) + &(&m2 * &a4);
        let w1 = axpy_sum(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
        let mut w2 = axpy_sum(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
        add_identity(&mut w2, b[1]);
        let z1 = axpy_sum(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
        let mut z2 = axpy_sum(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
        add_identity(&mut z2, b[0]);
        let lw1 = axpy_sum(&[(b[13], &m6), (b[11], &m4), (b[9], &m2)], n);
        let lw2 = axpy_sum(&[(b[7], &m6), (b[5], &m4), (b[3], &m2)], n);
        let lz1 = axpy_sum(&[(b[12], &m6), (b[10], &m4), (b[8], &m2)], n);
        let lz2 = axpy_sum(&[(b[6], &m6), (b[4], &m4), (b[2], &m2)], n);

        let mut w = &a6 * &w1;
        w += &w2;
        let mut lw = &a6 * &lw1;
        lw += &(&m6 * &w1);
        lw += &lw2;
        let u = &a * &w;
        let mut lu = &a * &lw;
        lu += &(&e * &w);
        let mut v = &a6 * &z1;
        v += &z2;
        let mut lv = &a6 * &lz1;
        lv += &(&m6 * &z1);
        lv += &lz2;
        (u, v, lu, lv)
    } else {
        let b: &[f64] = match m {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        let mut powers = vec![Matrix::identity(n), a2];
        let mut dpowers = vec![Matrix::zeros(n, n), m2];
        while powers.len() * 2 <= m as usize {
            let k = powers.len() - 1;
            let next = &powers[k] * &powers[1];
            let dnext = &(&dpowers[k] * &powers[1]) + &(&powers[k] * &dpowers[1]);
            powers.push(next);
            dpowers.push(dnext);
        }
        let mut w = Matrix::zeros(n, n);
        let mut v = Matrix::zeros(n, n);
        let mut lw = Matrix::zeros(n, n);
        let mut lv = Matrix::zeros(n, n);
        for k in 0..powers.len() {
            w += &powers[k].scale(b[2 * k + 1]);
            v += &powers[k].scale(b[2 * k]);
            lw += &dpowers[k].scale(b[2 * k + 1]);
            lv += &dpowers[k].scale(b[2 * k]);
        }
        let u = &a * &w;
        let mut lu = &a * &lw;
        lu += &(&e * &w);
        (u, v, lu, lv)
    };

    let q = &v - &u;
    let lu_q = Lu::factor(&q)?;
    let r = lu_q.solve(&(&v + &u))?;
    // q L = (Lu + Lv) + (Lu - Lv) r
    let rhs = &(&lu + &lv) + &(&(&lu - &lv) * &r);
    let mut l = lu_q.solve(&rhs)?;
    let mut x = r;
    for _ in 0..s {
        l = &(&x * &l) + &(&l * &x);
        x = &x * &x;
    }
    Ok((x, l))
}

/// Gradient of `A ↦ f(e^A)` given the ambient gradient `g` of `f` at `e^A`:
/// `L(Aᵀ, g)`, the Frobenius adjoint of `L(A, ·)` applied to `g`.
pub fn expm_grad(a: &Matrix, g: &Matrix) -> Result<Matrix> {
    require_same(a, g, "expm_grad")?;
    dexpm(&a.transpose(), g)
}

/// Gradient of `Ã ↦ f(B exp(B⁻¹Ã))` for the Frobenius metric:
/// `B⁻ᵀ L((B⁻¹Ã)ᵀ, Bᵀ g)`, with every inverse applied as a solve.
pub fn lie_exp_grad(b: &Matrix, a: &Matrix, g: &Matrix) -> Result<Matrix> {
    require_same(b, a, "lie_exp_grad")?;
    require_same(b, g, "lie_exp_grad")?;
    let lu = Lu::factor(b)?;
    let x = lu.solve(a)?;
    let inner = dexpm(&x.transpose(), &(&b.transpose() * g))?;
    Ok(Lu::factor(&b.transpose())?.solve(&inner)?)
}

/// Left-invariant variant: `B L((B⁻¹Ã)ᵀ, B⁻¹ g)`. This is the adjoint of
/// `X ↦ B L(B⁻¹Ã, B⁻¹X)` for `⟨X, Y⟩_B = tr((B⁻¹X)ᵀ B⁻¹Y)` on both sides.
pub fn lie_exp_grad_left_invariant(b: &Matrix, a: &Matrix, g: &Matrix) -> Result<Matrix> {
    require_same(b, a, "lie_exp_grad_left_invariant")?;
    require_same(b, g, "lie_exp_grad_left_invariant")?;
    let lu = Lu::factor(b)?;
    let x = lu.solve(a)?;
    let binv_g = lu.solve(g)?;
    Ok(b * &dexpm(&x.transpose(), &binv_g)?)
}

/// The Cayley map `(I + A)(I - A)⁻¹`.
pub fn cayley(a: &Matrix) -> Result<Matrix> {
    require_square(a, "cayley")?;
    let n = a.rows();
    let id = Matrix::identity(n);
    // (I + A) and (I - A)⁻¹ commute
    Ok(lu_solve(&(&id - a), &(&id + a))?)
}

/// Default margin for [`lie_injectivity_check`].
pub const INJECTIVITY_TOL: f64 = 1e-8;

/// Whether every eigenvalue of `a` has `|Im λ| < π - tol`, the region on
/// which the exponential is a diffeomorphism. Only symmetric (real spectrum)
/// and skew-symmetric inputs are supported.
pub fn lie_injectivity_check(a: &Matrix) -> Result<bool> {
    lie_injectivity_check_with(a, INJECTIVITY_TOL)
}

pub fn lie_injectivity_check_with(a: &Matrix, tol: f64) -> Result<bool> {
    require_square(a, "lie_injectivity_check")?;
    let scale = fro_norm(a).max(1.0);
    let sym_res = fro_norm(&a.skew_part());
    if sym_res <= 1e-10 * scale {
        return Ok(true);
    }
    let skew_res = fro_norm(&a.sym_part());
    if skew_res > 1e-10 * scale {
        return Err(MatexpError::UnsupportedStructure(sym_res.min(skew_res)));
    }
    // spectrum of a skew matrix is ±iθ; -A² = AᵀA has eigenvalues θ²
    let s = a.skew_part();
    let neg_sq = &s.transpose() * &s;
    let eig = sym_eig(&neg_sq.sym_part())?;
    let theta_max = eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    Ok(theta_max < std::f64::consts::PI - tol)
}
