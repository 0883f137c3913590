//! Dense real linear algebra.
//!
//! Everything here works on [`Matrix`], a row-major `f64` matrix. The kernels
//! are plain loops: Householder QR, partial-pivoting LU, cyclic Jacobi for the
//! symmetric eigenproblem and one-sided Jacobi for the SVD. They are accurate
//! to working precision and fast enough for matrices up to a few hundred rows.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from user-supplied row-major data, rejecting
    /// wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "hadamard shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// Copy of the block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// `[self, other]` side by side.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(LinalgError::ShapeMismatch {
                op: "hstack",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(0, self.cols, other);
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(A + Aᵀ) / 2`.
    pub fn sym_part(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    /// `(A - Aᵀ) / 2`.
    pub fn skew_part(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] - self[(j, i)])
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    fn assert_same_shape(&self, other: &Matrix, op: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{op}: shape mismatch {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs, "add");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs, "sub");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.assert_same_shape(rhs, "add_assign");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        self.assert_same_shape(rhs, "sub_assign");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Panicking product, for internal use where shapes are known to agree.
impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        match matmul(self, rhs) {
            Ok(m) => m,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Mul<f64> for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: f64) -> Matrix {
        self.scale(rhs)
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(LinalgError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (n, m, p) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let out_row = &mut out[i * p..(i + 1) * p];
        for k in 0..m {
            let aik = a.data[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * p..(k + 1) * p];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(Matrix {
        rows: n,
        cols: p,
        data: out,
    })
}

pub fn fro_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(LinalgError::ShapeMismatch {
            op: "fro_inner",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

pub fn fro_norm(a: &Matrix) -> f64 {
    // scaled accumulation so huge or tiny entries do not overflow
    let scale = a.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = a.data.iter().map(|v| (v / scale).powi(2)).sum();
    scale * ss.sqrt()
}

fn require_square(a: &Matrix, op: &'static str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare {
            op,
            rows: a.rows,
            cols: a.cols,
        })
    }
}

/// LU factorization with partial pivoting, `P A = L U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    packed: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        require_square(a, "lu")?;
        let n = a.rows;
        let anorm = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || pmax < 1e-300 * anorm {
                return Err(LinalgError::Singular);
            }
            if piv != col {
                for j in 0..n {
                    lu.data.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
                sign = -sign;
            }
            let d = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / d;
                lu[(r, col)] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        let v = lu[(col, j)];
                        lu[(r, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Self {
            packed: lu,
            perm,
            sign,
        })
    }

    pub fn det(&self) -> f64 {
        let n = self.packed.rows;
        (0..n).fold(self.sign, |d, i| d * self.packed[(i, i)])
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.packed.rows;
        if b.rows != n {
            return Err(LinalgError::ShapeMismatch {
                op: "lu_solve",
                lhs: self.packed.shape(),
                rhs: b.shape(),
            });
        }
        let m = b.cols;
        let mut x = Matrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for i in 0..n {
            for k in 0..i {
                let l = self.packed[(i, k)];
                if l != 0.0 {
                    for j in 0..m {
                        let v = x[(k, j)];
                        x[(i, j)] -= l * v;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.packed[(i, k)];
                if u != 0.0 {
                    for j in 0..m {
                        let v = x[(k, j)];
                        x[(i, j)] -= u * v;
                    }
                }
            }
            let d = self.packed[(i, i)];
            for j in 0..m {
                x[(i, j)] /= d;
            }
        }
        Ok(x)
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Lu::factor(a)?.solve(b)
}

/// Determinant via LU; a singular matrix has determinant zero.
pub fn det(a: &Matrix) -> Result<f64> {
    match Lu::factor(a) {
        Ok(lu) => Ok(lu.det()),
        Err(LinalgError::Singular) => Ok(0.0),
        Err(e) => Err(e),
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    lu_solve(a, &Matrix::identity(a.rows))
}

#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder reflectors of `a` (m×n, m ≥ n). Returns the reflector
/// vectors, their scalings `tau` and the raw `r` (diagonal possibly negative).
fn householder(a: &Matrix) -> (Vec<Vec<f64>>, Vec<f64>, Matrix) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut vs = Vec::with_capacity(n);
    let mut taus = Vec::with_capacity(n);
    for j in 0..n {
        let x: Vec<f64> = (j..m).map(|i| w[(i, j)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(vec![0.0; m - j]);
            taus.push(0.0);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let tau = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        for c in j..n {
            let dot: f64 = (j..m).map(|i| v[i - j] * w[(i, c)]).sum();
            let f = tau * dot;
            for i in j..m {
                w[(i, c)] -= f * v[i - j];
            }
        }
        w[(j, j)] = alpha;
        for i in j + 1..m {
            w[(i, j)] = 0.0;
        }
        vs.push(v);
        taus.push(tau);
    }
    let r = Matrix::from_fn(n, n, |i, c| if i <= c { w[(i, c)] } else { 0.0 });
    (vs, taus, r)
}

/// Applies `H_0 H_1 … H_{n-1}` to the first `cols` columns of the identity.
fn form_q(m: usize, cols: usize, vs: &[Vec<f64>], taus: &[f64]) -> Matrix {
    let mut q = Matrix::from_fn(m, cols, |i, j| if i == j { 1.0 } else { 0.0 });
    for j in (0..vs.len()).rev() {
        let (v, tau) = (&vs[j], taus[j]);
        if tau == 0.0 {
            continue;
        }
        for c in 0..cols {
            let dot: f64 = (j..m).map(|i| v[i - j] * q[(i, c)]).sum();
            let f = tau * dot;
            if f != 0.0 {
                for i in j..m {
                    q[(i, c)] -= f * v[i - j];
                }
            }
        }
    }
    q
}

/// Thin Householder QR of an m×n matrix with m ≥ n. The diagonal of `r` is
/// non-negative.
pub fn qr_thin(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(LinalgError::ShapeMismatch {
            op: "qr_thin (needs rows >= cols)",
            lhs: a.shape(),
            rhs: (n, n),
        });
    }
    let (vs, taus, mut r) = householder(a);
    let mut q = form_q(m, n, &vs, &taus);
    fix_signs(&mut q, &mut r);
    Ok(QrFactors { q, r })
}

/// Full QR: `q` is m×m orthogonal, `r` is n×n (the top block of the full
/// triangular factor). The first n columns of `q` agree with [`qr_thin`].
pub fn qr_full(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(LinalgError::ShapeMismatch {
            op: "qr_full (needs rows >= cols)",
            lhs: a.shape(),
            rhs: (n, n),
        });
    }
    let (vs, taus, mut r) = householder(a);
    let mut q = form_q(m, m, &vs, &taus);
    fix_signs(&mut q, &mut r);
    Ok(QrFactors { q, r })
}

fn fix_signs(q: &mut Matrix, r: &mut Matrix) {
    for i in 0..r.rows {
        if r[(i, i)] < 0.0 {
            for c in 0..r.cols {
                r[(i, c)] = -r[(i, c)];
            }
            for row in 0..q.rows {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: Matrix,
}

const SYM_TOL: f64 = 1e-12;

fn check_symmetric(a: &Matrix) -> Result<()> {
    require_square(a, "sym_eig")?;
    let asym = fro_norm(&(a - &a.transpose()));
    if asym > SYM_TOL * fro_norm(a).max(1.0) {
        return Err(LinalgError::NotSymmetric(asym));
    }
    Ok(())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    check_symmetric(a)?;
    let n = a.rows;
    let mut w = a.sym_part();
    let mut v = Matrix::identity(n);
    let target = 1e-14 * fro_norm(&w);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)] * w[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

impl SymEig {
    /// `V f(Λ) Vᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n)
                    .map(|k| self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)])
                    .sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// m×p with orthonormal columns, p = min(m, n).
    pub u: Matrix,
    /// Descending, non-negative.
    pub sigma: Vec<f64>,
    /// n×p with orthonormal columns.
    pub v: Matrix,
}

/// Thin SVD by one-sided (Hestenes) Jacobi.
pub fn svd(a: &Matrix) -> SvdFactors {
    if a.rows < a.cols {
        let t = svd(&a.transpose());
        return SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let tiny = (m.max(n) as f64) * f64::EPSILON * smax;
    let mut uo = Matrix::zeros(m, n);
    let mut vo = Matrix::zeros(n, n);
    let mut deficient = Vec::new();
    for (c, &j) in order.iter().enumerate() {
        for i in 0..n {
            vo[(i, c)] = v[(i, j)];
        }
        if sigma[c] > tiny && sigma[c] > 0.0 {
            for i in 0..m {
                uo[(i, c)] = u[(i, j)] / sigma[c];
            }
        } else {
            deficient.push(c);
        }
    }
    complete_orthonormal(&mut uo, &deficient);
    SvdFactors { u: uo, sigma, v: vo }
}

/// Fills the listed columns of `q` with unit vectors orthogonal to all
/// other columns, drawing candidates from the standard basis.
fn complete_orthonormal(q: &mut Matrix, missing: &[usize]) {
    let m = q.rows;
    let mut filled: Vec<usize> = (0..q.cols).filter(|c| !missing.contains(c)).collect();
    let mut candidate = 0;
    for &c in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _pass in 0..2 {
                for &f in &filled {
                    let d: f64 = (0..m).map(|i| q[(i, f)] * e[i]).sum();
                    for (i, ei) in e.iter_mut().enumerate() {
                        *ei -= d * q[(i, f)];
                    }
                }
            }
            let nrm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 0.5 {
                for (i, ei) in e.iter().enumerate() {
                    q[(i, c)] = ei / nrm;
                }
                filled.push(c);
                break;
            }
        }
    }
}

/// Lower-triangular Cholesky factor `l` with `l lᵀ = a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}
