//! Minimal dense linear algebra: vector kernels, a row-major dense matrix,
//! Cholesky solves, and a symmetric eigensolver (Householder tridiagonalization
//! followed by implicit-shift QL).
//!
//! Everything here is deliberately dependency-free so that results are
//! bit-reproducible across platforms and toolchain updates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigenvalue iteration failed to converge for index {index}")]
    EigenNoConvergence { index: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matvec_transpose(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.rows, "matvec_transpose dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(p[i], self.row(i), &mut out);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let (orow, dst) = (
                    &other.data[k * other.cols..(k + 1) * other.cols],
                    &mut out.data[i * other.cols..(i + 1) * other.cols],
                );
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    /// A^T A, exploiting symmetry of the result.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let a = row[i];
                if a == 0.0 {
                    continue;
                }
                for j in i..n {
                    out.data[i * n + j] += a * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i];
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        assert_eq!(self.rows, self.cols, "cholesky requires a square matrix");
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    ///
    /// Householder reduction to tridiagonal form followed by implicit-shift QL.
    /// Only the values are accumulated; cost is ~(4/3) n^3 flops.
    pub fn sym_eigenvalues(&self) -> Result<Vec<f64>, LinalgError> {
        assert_eq!(
            self.rows, self.cols,
            "sym_eigenvalues requires a square matrix"
        );
        let mut a = self.clone();
        let (mut d, mut e) = householder_tridiagonalize(&mut a);
        ql_implicit_shift(&mut d, &mut e)?;
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Ok(d)
    }
}

pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Reduce a symmetric matrix to tridiagonal form, returning (diagonal, subdiagonal).
///
/// Both triangles of `a` are kept in sync so the hot inner products run over
/// contiguous rows. `e[i]` is the coupling between rows i-1 and i, `e[0] = 0`.
fn householder_tridiagonalize(a: &mut DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return (d, e);
    }
    let mut u = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i; // active block is rows/cols 0..l
        let scale: f64 = a.row(i)[..l].iter().map(|v| v.abs()).sum();
        if scale == 0.0 || l == 1 {
            e[i] = a.get(i, l - 1);
            continue;
        }
        let mut h = 0.0;
        for k in 0..l {
            u[k] = a.get(i, k) / scale;
            h += u[k] * u[k];
        }
        let f = u[l - 1];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        u[l - 1] = f - g;

        // q = A u / h, then the correction that makes the update rank-2.
        let mut ufq = 0.0;
        for j in 0..l {
            let aj = &a.data[j * n..j * n + l];
            q[j] = dot(aj, &u[..l]) / h;
            ufq += q[j] * u[j];
        }
        let hh = ufq / (2.0 * h);
        for j in 0..l {
            q[j] -= hh * u[j];
        }
        // A <- A - u q^T - q u^T on the full active block.
        for j in 0..l {
            let (uj, qj) = (u[j], q[j]);
            let row = &mut a.data[j * n..j * n + l];
            for k in 0..l {
                row[k] -= uj * q[k] + qj * u[k];
            }
        }
        for j in 0..l {
            a.data[i * n + j] = 0.0;
            a.data[j * n + i] = 0.0;
        }
    }
    for i in 0..n {
        d[i] = a.get(i, i);
    }
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues land in `d`.
fn ql_implicit_shift(d: &mut [f64], e: &mut [f64]) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    // Shift the subdiagonal so e[i] couples d[i] and d[i+1].
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(LinalgError::EigenNoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric tridiagonal matrix (diagonal `d`,
/// subdiagonal `e` with `e[i]` coupling rows i and i+1) by Sturm-count
/// bisection. O(len) per probe.
pub fn tridiagonal_top_eigenvalue(d: &[f64], e: &[f64]) -> f64 {
    let k = d.len();
    debug_assert_eq!(e.len() + 1, k.max(1));
    if k == 0 {
        return 0.0;
    }
    if k == 1 {
        return d[0];
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let radius = if i == 0 {
            e[0].abs()
        } else if i == k - 1 {
            e[k - 2].abs()
        } else {
            e[i - 1].abs() + e[i].abs()
        };
        lo = lo.min(d[i] - radius);
        hi = hi.max(d[i] + radius);
    }
    let count_below = |x: f64| -> usize {
        let tiny = f64::MIN_POSITIVE;
        let mut count = 0usize;
        let mut q = d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..k {
            let denom = if q == 0.0 { tiny } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// |last component| of the unit top eigenvector of a symmetric tridiagonal
/// matrix, by inverse iteration at a slightly shifted eigenvalue. Feeds the
/// Lanczos residual certificate; a rough value is sufficient there.
pub fn tridiagonal_top_eigvec_last(d: &[f64], e: &[f64], theta: f64) -> f64 {
    let k = d.len();
    if k == 0 {
        return 0.0;
    }
    if k == 1 {
        return 1.0;
    }
    let shift = theta * (1.0 + 1e-11) + 1e-300;
    let mut w = vec![1.0 / (k as f64).sqrt(); k];
    for _ in 0..2 {
        // Thomas solve of (T - shift I) v = w with zero-pivot guards.
        let mut c = vec![0.0; k];
        let mut x = vec![0.0; k];
        let guard = |v: f64| {
            if v.abs() < 1e-280 {
                1e-280f64.copysign(if v == 0.0 { 1.0 } else { v })
            } else {
                v
            }
        };
        let mut b0 = guard(d[0] - shift);
        c[0] = e[0] / b0;
        x[0] = w[0] / b0;
        for i in 1..k {
            b0 = guard(d[i] - shift - e[i - 1] * c[i - 1]);
            if i < k - 1 {
                c[i] = e[i] / b0;
            }
            x[i] = (w[i] - e[i - 1] * x[i - 1]) / b0;
        }
        for i in (0..k - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        let nrm = norm2(&x);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return 1.0;
        }
        for v in x.iter_mut() {
            *v /= nrm;
        }
        w = x;
    }
    w[k - 1].abs()
}

/// In-place radix-2 complex FFT on separate re/im slices. `inverse = true`
/// applies the unscaled inverse transform (caller divides by n). Lengths must
/// be powers of two.
pub fn fft_radix2(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    debug_assert_eq!(n, im.len());
    debug_assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 0..n - 1 {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j & m != 0 {
            j ^= m;
            m >>= 1;
        }
        j |= m;
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ar, ai) = (re[start + k], im[start + k]);
                let (br, bi) = (re[start + k + len / 2], im[start + k + len / 2]);
                let (tr, ti) = (br * cr - bi * ci, br * ci + bi * cr);
                re[start + k] = ar + tr;
                im[start + k] = ai + ti;
                re[start + k + len / 2] = ar - tr;
                im[start + k + len / 2] = ai - ti;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// 2-D FFT on row-major data (rows x cols, both powers of two).
pub fn fft2(re: &mut [f64], im: &mut [f64], rows: usize, cols: usize, inverse: bool) {
    debug_assert_eq!(re.len(), rows * cols);
    for r in 0..rows {
        fft_radix2(
            &mut re[r * cols..(r + 1) * cols],
            &mut im[r * cols..(r + 1) * cols],
            inverse,
        );
    }
    let mut col_re = vec![0.0; rows];
    let mut col_im = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            col_re[r] = re[r * cols + c];
            col_im[r] = im[r * cols + c];
        }
        fft_radix2(&mut col_re, &mut col_im, inverse);
        for r in 0..rows {
            re[r * cols + c] = col_re[r];
            im[r * cols + c] = col_im[r];
        }
    }
}

/// Orthonormal n x n matrix generated from seeded Gaussian entries by two
/// passes of modified Gram-Schmidt.
pub fn random_orthogonal(n: usize, rng: &mut crate::rng::SplitMix64) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.standard_normal()).collect())
        .collect();
    for _pass in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let proj = dot(&cols[j], &cols[k]);
                let prev = cols[k].clone();
                axpy(-proj, &prev, &mut cols[j]);
            }
            let nrm = norm2(&cols[j]);
            assert!(nrm > 1e-12, "degenerate random draw");
            for v in cols[j].iter_mut() {
                *v /= nrm;
            }
        }
    }
    DenseMatrix::from_fn(n, n, |i, j| cols[j][i])
}
