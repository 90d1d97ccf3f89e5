//! Minimal dense linear algebra kernel.
//!
//! Everything in the toolkit moves through [`Mat`], a row-major dense matrix
//! of `f64`. The kernel provides exactly the factorizations the recovery
//! pipelines need: LU solves, column-pivoted QR rank, a Jacobi
//! eigendecomposition for SPD inverse square roots, and incremental
//! Gram-Schmidt. No sparse storage, no nonsymmetric eigensolvers.

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "buffer of length {} cannot back a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dim("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Borrow row `i` as a slice (rows are contiguous).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Largest entry magnitude; 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * x`, i.e. `x^T self` read as a row; length `cols`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    /// Gram matrix `self * self^T` (symmetric, rows x rows).
    pub fn gram(&self) -> Mat {
        let n = self.rows;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }
}

/// Standard matrix product.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(Error::Dim(format!(
            "matmul {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aik * bv;
            }
        }
    }
    Ok(c)
}

/// Pivot threshold for LU solves, relative to the largest entry of `a`.
const LU_PIVOT_REL: f64 = 1e-12;

/// Solve `a * Z = b` by LU with partial pivoting.
pub fn solve_linear(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.rows != a.cols {
        return Err(Error::Dim(format!("solve_linear needs square a, got {}x{}", a.rows, a.cols)));
    }
    if b.rows != a.rows {
        return Err(Error::Dim(format!(
            "solve_linear rhs has {} rows, expected {}",
            b.rows, a.rows
        )));
    }
    let n = a.rows;
    let threshold = LU_PIVOT_REL * a.max_abs();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut pmax = 0.0;
        let mut prow = k;
        for i in k..n {
            let v = lu[i * n + k].abs();
            if v > pmax {
                pmax = v;
                prow = i;
            }
        }
        if pmax <= threshold {
            return Err(Error::Singular { pivot: pmax, threshold });
        }
        if prow != k {
            for j in 0..n {
                lu.swap(k * n + j, prow * n + j);
            }
            perm.swap(k, prow);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
        }
    }

    let mut z = Mat::zeros(n, b.cols);
    let mut col = vec![0.0; n];
    for c in 0..b.cols {
        for i in 0..n {
            col[i] = b.get(perm[i], c);
        }
        // forward substitution (unit lower)
        for i in 1..n {
            let mut s = col[i];
            for j in 0..i {
                s -= lu[i * n + j] * col[j];
            }
            col[i] = s;
        }
        // back substitution
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in (i + 1)..n {
                s -= lu[i * n + j] * col[j];
            }
            col[i] = s / lu[i * n + i];
        }
        for i in 0..n {
            z.set(i, c, col[i]);
        }
    }
    Ok(z)
}

/// Numerical rank: R-diagonal magnitudes above `tol * max_abs(a)` under
/// column-pivoted Householder QR.
pub fn rank_with_tol(a: &Mat, tol: f64) -> usize {
    assert!(tol > 0.0, "rank tolerance must be positive");
    let amax = a.max_abs();
    if amax == 0.0 || self_is_empty(a) {
        return 0;
    }
    let threshold = tol * amax;
    let (m, n) = (a.rows, a.cols);
    let mut r = a.data.clone();
    let steps = m.min(n);
    let mut rank = 0;

    for k in 0..steps {
        // fresh subcolumn norms; cheap at toolkit sizes and immune to
        // cancellation in downdating
        let mut best = 0.0;
        let mut bestj = k;
        for j in k..n {
            let mut s = 0.0;
            for i in k..m {
                let v = r[i * n + j];
                s += v * v;
            }
            if s > best {
                best = s;
                bestj = j;
            }
        }
        let pivot = best.sqrt();
        if pivot <= threshold {
            break;
        }
        rank += 1;
        if bestj != k {
            for i in 0..m {
                r.swap(i * n + k, i * n + bestj);
            }
        }
        // Householder vector for the subcolumn
        let alpha = if r[k * n + k] >= 0.0 { -pivot } else { pivot };
        let mut v: Vec<f64> = (k..m).map(|i| r[i * n + k]).collect();
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|x| x * x).sum::<f64>();
        r[k * n + k] = alpha;
        for i in (k + 1)..m {
            r[i * n + k] = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        for j in (k + 1)..n {
            let mut proj = 0.0;
            for i in k..m {
                proj += v[i - k] * r[i * n + j];
            }
            let scale = 2.0 * proj / vnorm2;
            for i in k..m {
                r[i * n + j] -= scale * v[i - k];
            }
        }
    }
    rank
}

fn self_is_empty(a: &Mat) -> bool {
    a.rows == 0 || a.cols == 0
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues and the orthogonal matrix of column eigenvectors.
pub fn jacobi_eigh(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if a.rows != a.cols {
        return Err(Error::Dim(format!("jacobi_eigh needs square input, got {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    let scale = a.frob_norm();
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok((if n == 1 { vec![m.get(0, 0)] } else { vec![] }, v));
    }
    const MAX_SWEEPS: usize = 64;
    let stop = 1e-14 * scale.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off.sqrt() <= stop {
            let lambda = (0..n).map(|i| m.get(i, i)).collect();
            return Ok((lambda, v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                // stable tangent of the rotation angle
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, c * mip - s * miq);
                    m.set(i, q, s * mip + c * miq);
                }
                for j in 0..n {
                    let mpj = m.get(p, j);
                    let mqj = m.get(q, j);
                    m.set(p, j, c * mpj - s * mqj);
                    m.set(q, j, s * mpj + c * mqj);
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    Err(Error::NoConvergence("Jacobi sweeps exhausted".into()))
}

/// Inverse square root of a symmetric positive definite matrix:
/// `B` symmetric with `B a B = I`, via `B = V diag(1/sqrt(lambda)) V^T`.
pub fn inv_sqrt_spd(a: &Mat) -> Result<Mat> {
    if a.rows != a.cols {
        return Err(Error::Dim(format!("inv_sqrt_spd needs square input, got {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    let amax = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-9 * amax.max(1.0) {
                return Err(Error::NotSpd(format!("asymmetry at ({i},{j})")));
            }
        }
    }
    let (lambda, v) = jacobi_eigh(a)?;
    let lmax = lambda.iter().fold(0.0_f64, |m, &l| m.max(l));
    let floor = 1e-12 * lmax;
    for &l in &lambda {
        if l <= floor {
            return Err(Error::NotSpd(format!(
                "eigenvalue {l:.3e} below SPD floor {floor:.3e}"
            )));
        }
    }
    let inv_sqrt: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    // B = V D V^T, filled symmetric by construction
    let mut b = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += v.get(i, k) * inv_sqrt[k] * v.get(j, k);
            }
            b.set(i, j, s);
            b.set(j, i, s);
        }
    }
    Ok(b)
}

/// Gram-Schmidt residual of `v` against an orthonormal `basis`.
/// Returns the normalized residual if its norm exceeds `tol * ||v||`,
/// otherwise `None` (`v` is numerically in the span).
pub fn orthobasis_append(basis: &[Vec<f64>], v: &[f64], tol: f64) -> Option<Vec<f64>> {
    let vnorm = norm2(v);
    if vnorm == 0.0 {
        return None;
    }
    let mut r = v.to_vec();
    // two passes: classic "twice is enough" reorthogonalization
    for _ in 0..2 {
        for u in basis {
            let proj = dot(u, &r);
            for (ri, ui) in r.iter_mut().zip(u) {
                *ri -= proj * ui;
            }
        }
    }
    let rnorm = norm2(&r);
    if rnorm > tol * vnorm {
        for ri in r.iter_mut() {
            *ri /= rnorm;
        }
        Some(r)
    } else {
        None
    }
}

// ---- small vector helpers shared across the crate ----

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Nonzero count under a relative magnitude threshold: an entry counts as
/// nonzero iff `|v_i| > tol_rel * max_abs(v)`.
pub fn numerical_l0(v: &[f64], tol_rel: f64) -> usize {
    let m = norm_inf(v);
    if m == 0.0 {
        return 0;
    }
    let cut = tol_rel * m;
    v.iter().filter(|x| x.abs() > cut).count()
}

// ---- CSV fixtures ----

/// Format like C's `%.17g`: 17 significant digits, fixed or scientific
/// depending on the exponent, trailing zeros stripped.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..17).contains(&exp) {
        format!("{}e{}{:02}", trim_trailing_zeros(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let prec = (16 - exp).max(0) as usize;
        trim_trailing_zeros(&format!("{:.*}", prec, x))
    }
}

fn trim_trailing_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

impl Mat {
    /// Plain-text CSV: one row per line, comma separator, `%.17g` values.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|&v| fmt_g17(v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Mat> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(e) => return Err(Error::CsvParse(format!("line {}: {e}", lineno + 1))),
            }
        }
        if rows.is_empty() {
            return Err(Error::CsvParse("no rows".into()));
        }
        Mat::from_rows(&rows)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(Error::io(path.display().to_string()))
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Mat> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path.display().to_string()))?;
        Mat::from_csv_str(&s)
    }
}
