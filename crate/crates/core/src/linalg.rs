//! Small dense linear algebra: exact inversion, one-sided Jacobi SVD,
//! Moore-Penrose pseudoinverse and numerical rank.
//!
//! Support regions are local, so every matrix handled here has at most a few
//! hundred rows. Everything is row-major and allocation-light.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().cloned()).collect();
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c).clone();
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidMatrix(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k).clone();
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.data[r * other.cols + c].clone() + a.clone() * other.get(k, c).clone();
                    out.data[r * other.cols + c] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of a square matrix by Gauss-Jordan elimination with
    /// magnitude pivoting. Exact for rational scalars.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::InvalidMatrix(format!(
                "inverse of non-square {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !a.get(r, col).is_zero())
                .max_by(|&x, &y| {
                    a.get(x, col)
                        .abs()
                        .partial_cmp(&a.get(y, col).abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .ok_or_else(|| Error::NumericalFailure("singular matrix".into()))?;
            if pivot != col {
                for c in 0..n {
                    a.data.swap(pivot * n + c, col * n + c);
                    inv.data.swap(pivot * n + c, col * n + c);
                }
            }
            let p = a.get(col, col).clone();
            for c in 0..n {
                let v = a.get(col, c).clone() / p.clone();
                a.set(col, c, v);
                let w = inv.get(col, c).clone() / p.clone();
                inv.set(col, c, w);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col).clone();
                if f.is_zero() {
                    continue;
                }
                for c in 0..n {
                    let v = a.get(r, c).clone() - f.clone() * a.get(col, c).clone();
                    a.set(r, c, v);
                    let w = inv.get(r, c).clone() - f.clone() * inv.get(col, c).clone();
                    inv.set(r, c, w);
                }
            }
        }
        Ok(inv)
    }
}

impl<T: Real> DenseMatrix<T> {
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition `A = U diag(sigma) Vᵀ`, singular
/// values sorted in descending order. Singular vectors paired with an
/// exactly zero singular value may be returned as zero columns.
#[derive(Clone)]
pub struct Svd<T> {
    /// rows x k
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    /// cols x k
    pub v: DenseMatrix<T>,
}

impl<T: fmt::Debug> fmt::Debug for Svd<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Svd").field("sigma", &self.sigma).finish_non_exhaustive()
    }
}

const MAX_SWEEPS: usize = 80;

impl<T: Real> Svd<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        if a.rows >= a.cols {
            one_sided_jacobi(a)
        } else {
            let t = one_sided_jacobi(&a.transpose())?;
            Ok(Svd {
                u: t.v,
                sigma: t.sigma,
                v: t.u,
            })
        }
    }

    /// Cut-off below which singular values are treated as zero.
    pub fn threshold(&self, rcond: T) -> T {
        let smax = self.sigma.first().copied().unwrap_or_else(T::zero);
        smax * effective_rcond(self.u.rows, self.v.rows, rcond)
    }

    pub fn rank(&self, rcond: T) -> usize {
        let tol = self.threshold(rcond);
        self.sigma.iter().filter(|&&s| s > tol && s > T::zero()).count()
    }

    /// Ratio of the largest to the smallest retained singular value.
    pub fn condition(&self, rcond: T) -> T {
        let r = self.rank(rcond);
        if r == 0 {
            return T::infinity();
        }
        self.sigma[0] / self.sigma[r - 1]
    }

    pub fn pseudoinverse(&self, rcond: T) -> DenseMatrix<T> {
        let tol = self.threshold(rcond);
        let m = self.u.rows;
        let n = self.v.rows;
        let mut out = DenseMatrix::zeros(n, m);
        let ut = self.u.transpose();
        for (k, &s) in self.sigma.iter().enumerate() {
            if !(s > tol) || s == T::zero() {
                continue;
            }
            let inv = T::one() / s;
            let uk = ut.row(k);
            for i in 0..n {
                let vik = *self.v.get(i, k) * inv;
                if vik == T::zero() {
                    continue;
                }
                for (slot, &x) in out.row_mut(i).iter_mut().zip(uk) {
                    *slot = *slot + vik * x;
                }
            }
        }
        out
    }
}

fn effective_rcond<T: Real>(rows: usize, cols: usize, rcond: T) -> T {
    if rcond > T::zero() {
        rcond
    } else {
        T::from_usize_lossy(rows.max(cols)) * T::epsilon()
    }
}

/// Householder QR with column pivoting, `A P = Q R`, of a tall matrix
/// given by columns. Returns the thin `Q` (columns of length `m`), `R` by
/// columns (length `n`) and the permutation (`perm[k]` is the column of `A`
/// moved to position `k`).
fn pivoted_qr<T: Real>(mut w: Vec<Vec<T>>, m: usize, want_q: bool) -> (Vec<Vec<T>>, Vec<Vec<T>>, Vec<usize>) {
    let n = w.len();
    let two = T::one() + T::one();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let norm2 = |c: &Vec<T>| c[k..].iter().map(|v| *v * *v).sum::<T>();
        let mut best = k;
        let mut best_norm = norm2(&w[k]);
        for (j, col) in w.iter().enumerate().skip(k + 1) {
            let nj = norm2(col);
            if nj > best_norm {
                best = j;
                best_norm = nj;
            }
        }
        w.swap(k, best);
        perm.swap(k, best);
        let norm = best_norm.sqrt();
        if norm == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let mut v = w[k][k..].to_vec();
        let alpha = if v[0] >= T::zero() { -norm } else { norm };
        v[0] = v[0] - alpha;
        let vv: T = v.iter().map(|x| *x * *x).sum();
        for col in w.iter_mut().skip(k + 1) {
            let seg = &mut col[k..];
            let f = two * seg.iter().zip(&v).map(|(a, b)| *a * *b).sum::<T>() / vv;
            for (a, b) in seg.iter_mut().zip(&v) {
                *a = *a - f * *b;
            }
        }
        w[k][k] = alpha;
        for x in w[k][k + 1..].iter_mut() {
            *x = T::zero();
        }
        reflectors.push(v);
    }
    let r: Vec<Vec<T>> = w.iter().map(|col| col[..n].to_vec()).collect();
    if !want_q {
        return (Vec::new(), r, perm);
    }
    let mut q: Vec<Vec<T>> = (0..n)
        .map(|c| (0..m).map(|i| if i == c { T::one() } else { T::zero() }).collect())
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        let vv: T = v.iter().map(|x| *x * *x).sum();
        for col in q.iter_mut().skip(k) {
            let seg = &mut col[k..];
            let f = two * seg.iter().zip(v).map(|(a, b)| *a * *b).sum::<T>() / vv;
            if f == T::zero() {
                continue;
            }
            for (a, b) in seg.iter_mut().zip(v) {
                *a = *a - f * *b;
            }
        }
    }
    (q, r, perm)
}

/// Orthogonalises the columns `w` in place by Jacobi rotations, returning
/// the accumulated right rotation (columns of `V`).
fn jacobi_columns<T: Real>(w: &mut [Vec<T>], fro2: T) -> Result<Vec<Vec<T>>> {
    let n = w.len();
    let m = w.first().map_or(0, |c| c.len());
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();
    let tol = eps * T::from_usize_lossy(m.max(1)).sqrt();
    // Columns this small sit below any rank threshold; rotating them only
    // churns rounding noise.
    let negligible = tol * tol * fro2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        // Squared column norms, refreshed every sweep and updated exactly
        // by the rotation in between.
        let mut norms: Vec<T> = w.iter().map(|c| dot(c, c)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&w[i], &w[j]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
                norms[i] = alpha - t * gamma;
                norms[j] = beta + t * gamma;
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::NumericalFailure(format!("Jacobi SVD did not converge for {m}x{n} matrix")))
}

/// Hestenes one-sided Jacobi for a tall (or square) matrix.
///
/// Clearly tall matrices are first reduced by pivoted QR, `A P = Q R`, and
/// the rotations run on the columns of `Rᵀ`; that preconditioning cuts the
/// sweep count sharply. With `Rᵀ = U' Σ V'ᵀ` the factors of `A` are
/// `U = Q V'` and `V = P U'`.
fn one_sided_jacobi<T: Real>(a: &DenseMatrix<T>) -> Result<Svd<T>> {
    let m = a.rows;
    let n = a.cols;
    // Column-major working copy for cache-friendly column rotations.
    let cols: Vec<Vec<T>> = (0..n).map(|c| (0..m).map(|r| *a.get(r, c)).collect()).collect();
    let fro2: T = a.data.iter().map(|x| *x * *x).sum();
    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);

    if m > n + n / 4 {
        let (q, r, perm) = pivoted_qr(cols, m, true);
        let mut rt: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| r[j][i]).collect()).collect();
        let vr = jacobi_columns(&mut rt, fro2)?;
        for (k, (s, c)) in sorted_norms(&rt).into_iter().enumerate() {
            sigma.push(s);
            if s > T::zero() {
                for (j, &p) in perm.iter().enumerate() {
                    vm.set(p, k, rt[c][j] / s);
                }
                let mut col = vec![T::zero(); m];
                for (qj, &y) in q.iter().zip(&vr[c]) {
                    if y == T::zero() {
                        continue;
                    }
                    for (o, &qv) in col.iter_mut().zip(qj) {
                        *o = *o + qv * y;
                    }
                }
                for (row, x) in col.into_iter().enumerate() {
                    u.set(row, k, x);
                }
            }
        }
        return Ok(Svd { u, sigma, v: vm });
    }

    let mut w = cols;
    let v = jacobi_columns(&mut w, fro2)?;
    for (k, (s, c)) in sorted_norms(&w).into_iter().enumerate() {
        sigma.push(s);
        if s > T::zero() {
            for r in 0..m {
                u.set(r, k, w[c][r] / s);
            }
        }
        for r in 0..n {
            vm.set(r, k, v[c][r]);
        }
    }
    Ok(Svd { u, sigma, v: vm })
}

/// Column norms in descending order with their column indices. The stable
/// sort keeps ties in column order so results are deterministic.
fn sorted_norms<T: Real>(w: &[Vec<T>]) -> Vec<(T, usize)> {
    let mut order: Vec<(T, usize)> = w
        .iter()
        .enumerate()
        .map(|(c, col)| (col.iter().map(|x| *x * *x).sum::<T>().sqrt(), c))
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Dot product with split accumulators, which lets the compiler pipeline
/// the multiply-adds.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] = acc[0] + x[0] * y[0];
        acc[1] = acc[1] + x[1] * y[1];
        acc[2] = acc[2] + x[2] * y[2];
        acc[3] = acc[3] + x[3] * y[3];
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn rotate<T: Real>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(j);
    for (a, b) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Moore-Penrose pseudoinverse. `rcond = 0` selects `max(rows, cols) * eps`.
pub fn pseudoinverse<T: Real>(a: &DenseMatrix<T>, rcond: T) -> Result<DenseMatrix<T>> {
    check_rcond(rcond)?;
    Ok(Svd::new(a)?.pseudoinverse(rcond))
}

/// Number of singular values above `rcond * sigma_max`.
/// Cheap test that `a` (rows ≥ cols) has numerical rank below its column
/// count. Pivoted QR bounds `σ_min ≤ |r_nn|` and `|r_11| ≤ σ_max`, so a
/// small `|r_nn| / |r_11|` proves deficiency; `false` is inconclusive.
pub fn certainly_rank_deficient<T: Real>(a: &DenseMatrix<T>, rcond: T) -> bool {
    let (m, n) = a.shape();
    if n == 0 || m < n {
        return m < n;
    }
    let cols: Vec<Vec<T>> = (0..n).map(|c| (0..m).map(|r| *a.get(r, c)).collect()).collect();
    let (_, r, _) = pivoted_qr(cols, m, false);
    let first = r[0][0].abs();
    let last = r[n - 1][n - 1].abs();
    // Half the threshold keeps rounding from rejecting a borderline case
    // the SVD would accept.
    last <= T::lit(0.5) * effective_rcond(m, n, rcond) * first
}

pub fn numerical_rank<T: Real>(a: &DenseMatrix<T>, rcond: T) -> Result<usize> {
    check_rcond(rcond)?;
    Ok(Svd::new(a)?.rank(rcond))
}

fn check_rcond<T: Real>(rcond: T) -> Result<()> {
    if !(rcond >= T::zero()) || !rcond.is_finite() {
        return Err(Error::InvalidMatrix(format!("rcond must be finite and >= 0, got {rcond}")));
    }
    Ok(())
}
