//! Linear operators: apply/adjoint pairs with spectral constants.
//!
//! The solver never needs matrix entries, only `Op x` and `Op^T p`, so the
//! structured kinds (forward differences, periodic convolution, scaled
//! identity) are applied directly. Dense matrices cover everything else at
//! desk scale. Spectral quantities come in two flavours: the operator norm is
//! computed matrix-free (Lanczos on the Gram operator), while the smallest
//! strictly positive singular value is computed by a dense decomposition of
//! the Gram matrix with a rank cutoff.

use crate::linalg::{self, DenseMatrix};
use crate::rng::SplitMix64;
use thiserror::Error;

/// Rank cutoff for separating zero singular values: `RANK_CUTOFF_REL * sigma_max`.
pub const RANK_CUTOFF_REL: f64 = 1e-10;

/// Largest Gram dimension accepted by the dense spectral routines.
pub const DENSE_SPECTRUM_LIMIT: usize = 4608;

const LANCZOS_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch in {side}: operator expects {expected}, got {actual}")]
    DimensionMismatch {
        side: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("operator dimensions must be positive (got {rows} x {cols})")]
    EmptyOperator { rows: usize, cols: usize },
    #[error("convolution kernel must have odd size, got {size}")]
    EvenKernel { size: usize },
    #[error("kernel payload has {actual} entries, expected {expected}")]
    KernelSize { expected: usize, actual: usize },
    #[error("matrix payload has {actual} entries, expected {expected}")]
    DensePayload { expected: usize, actual: usize },
    #[error("operator entries must be finite")]
    NonFiniteEntries,
    #[error("spectral iteration exceeded {cap} iterations without reaching tolerance {tol:.1e}")]
    IterationCapExceeded { cap: usize, tol: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("operator is numerically zero; no positive singular value exists")]
    ZeroOperator,
    #[error(
        "dense spectral decomposition limited to dimension {limit}, operator Gram side is {dim}"
    )]
    DeskScaleExceeded { dim: usize, limit: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("constraint rows disagree: A maps into {a_out}, B into {b_out}, c has length {c_len}")]
    ConstraintRows {
        a_out: usize,
        b_out: usize,
        c_len: usize,
    },
}

/// Descriptor consumed by [`LinearOperator::build`]; mirrors the config-file
/// and CLI surface.
#[derive(Debug, Clone)]
pub enum OperatorDescriptor {
    Dense {
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
    },
    ScaledIdentity {
        dim: usize,
        scale: f64,
    },
    Difference1d {
        len: usize,
    },
    Difference2d {
        rows: usize,
        cols: usize,
    },
    Convolution2d {
        rows: usize,
        cols: usize,
        kernel_size: usize,
        kernel: Vec<f64>,
    },
}

/// A linear map with an exact adjoint.
#[derive(Debug, Clone)]
pub enum LinearOperator {
    Dense(DenseMatrix),
    ScaledIdentity {
        dim: usize,
        scale: f64,
    },
    /// Forward differences x_{i+1} - x_i on a 1-D signal of length `len`.
    Difference1d {
        len: usize,
    },
    /// Forward differences on a rows x cols grid, row-major pixels.
    /// Output layout: all horizontal differences (row-major), then all
    /// vertical differences. Downstream proximal steps are entrywise, so any
    /// fixed layout works; this one is part of the public contract.
    Difference2d {
        rows: usize,
        cols: usize,
    },
    /// 2-D convolution with periodic (circular) boundaries. Periodic wrap is
    /// what makes the adjoint an exact correlation with the same kernel.
    Convolution2d {
        rows: usize,
        cols: usize,
        kernel: Kernel2d,
    },
}

#[derive(Debug, Clone)]
pub struct Kernel2d {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2d {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self, OperatorError> {
        if size == 0 || size % 2 == 0 {
            return Err(OperatorError::EvenKernel { size });
        }
        if weights.len() != size * size {
            return Err(OperatorError::KernelSize {
                expected: size * size,
                actual: weights.len(),
            });
        }
        if !linalg::all_finite(&weights) {
            return Err(OperatorError::NonFiniteEntries);
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dirac kernel: 1 at the center.
    pub fn dirac(size: usize) -> Result<Self, OperatorError> {
        let mut w = vec![0.0; size * size];
        if size % 2 == 0 || size == 0 {
            return Err(OperatorError::EvenKernel { size });
        }
        w[(size / 2) * size + size / 2] = 1.0;
        Self::new(size, w)
    }
}

impl LinearOperator {
    pub fn build(desc: OperatorDescriptor) -> Result<Self, OperatorError> {
        match desc {
            OperatorDescriptor::Dense {
                rows,
                cols,
                entries,
            } => {
                if rows == 0 || cols == 0 {
                    return Err(OperatorError::EmptyOperator { rows, cols });
                }
                if entries.len() != rows * cols {
                    return Err(OperatorError::DensePayload {
                        expected: rows * cols,
                        actual: entries.len(),
                    });
                }
                if !linalg::all_finite(&entries) {
                    return Err(OperatorError::NonFiniteEntries);
                }
                Ok(Self::Dense(DenseMatrix::from_data(rows, cols, entries)?))
            }
            OperatorDescriptor::ScaledIdentity { dim, scale } => {
                if dim == 0 {
                    return Err(OperatorError::EmptyOperator {
                        rows: dim,
                        cols: dim,
                    });
                }
                if !scale.is_finite() {
                    return Err(OperatorError::NonFiniteEntries);
                }
                Ok(Self::ScaledIdentity { dim, scale })
            }
            OperatorDescriptor::Difference1d { len } => {
                if len < 2 {
                    return Err(OperatorError::EmptyOperator {
                        rows: len.saturating_sub(1),
                        cols: len,
                    });
                }
                Ok(Self::Difference1d { len })
            }
            OperatorDescriptor::Difference2d { rows, cols } => {
                if rows == 0 || cols == 0 || rows * cols < 2 {
                    return Err(OperatorError::EmptyOperator { rows, cols });
                }
                Ok(Self::Difference2d { rows, cols })
            }
            OperatorDescriptor::Convolution2d {
                rows,
                cols,
                kernel_size,
                kernel,
            } => {
                if rows == 0 || cols == 0 {
                    return Err(OperatorError::EmptyOperator { rows, cols });
                }
                Ok(Self::Convolution2d {
                    rows,
                    cols,
                    kernel: Kernel2d::new(kernel_size, kernel)?,
                })
            }
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::ScaledIdentity { dim, scale: 1.0 }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self::ScaledIdentity { dim, scale }
    }

    pub fn dense(m: DenseMatrix) -> Self {
        Self::Dense(m)
    }

    pub fn difference_1d(len: usize) -> Result<Self, OperatorError> {
        Self::build(OperatorDescriptor::Difference1d { len })
    }

    pub fn difference_2d(rows: usize, cols: usize) -> Result<Self, OperatorError> {
        Self::build(OperatorDescriptor::Difference2d { rows, cols })
    }

    pub fn convolution_2d(
        rows: usize,
        cols: usize,
        kernel: Kernel2d,
    ) -> Result<Self, OperatorError> {
        if rows == 0 || cols == 0 {
            return Err(OperatorError::EmptyOperator { rows, cols });
        }
        Ok(Self::Convolution2d { rows, cols, kernel })
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.cols(),
            Self::ScaledIdentity { dim, .. } => *dim,
            Self::Difference1d { len } => *len,
            Self::Difference2d { rows, cols } => rows * cols,
            Self::Convolution2d { rows, cols, .. } => rows * cols,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.rows(),
            Self::ScaledIdentity { dim, .. } => *dim,
            Self::Difference1d { len } => len - 1,
            Self::Difference2d { rows, cols } => 2 * rows * cols - rows - cols,
            Self::Convolution2d { rows, cols, .. } => rows * cols,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Dense(_) => "dense",
            Self::ScaledIdentity { .. } => "scaled-identity",
            Self::Difference1d { .. } => "difference-1d",
            Self::Difference2d { .. } => "difference-2d",
            Self::Convolution2d { .. } => "convolution-2d",
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if x.len() != self.in_dim() {
            return Err(OperatorError::DimensionMismatch {
                side: "apply",
                expected: self.in_dim(),
                actual: x.len(),
            });
        }
        Ok(match self {
            Self::Dense(m) => m.matvec(x),
            Self::ScaledIdentity { scale, .. } => linalg::scaled(x, *scale),
            Self::Difference1d { len } => (0..len - 1).map(|i| x[i + 1] - x[i]).collect(),
            Self::Difference2d { rows, cols } => {
                let (r, c) = (*rows, *cols);
                let mut out = Vec::with_capacity(2 * r * c - r - c);
                for i in 0..r {
                    for j in 0..c - 1 {
                        out.push(x[i * c + j + 1] - x[i * c + j]);
                    }
                }
                for i in 0..r - 1 {
                    for j in 0..c {
                        out.push(x[(i + 1) * c + j] - x[i * c + j]);
                    }
                }
                out
            }
            Self::Convolution2d { rows, cols, kernel } => {
                convolve_periodic(x, *rows, *cols, kernel, false)
            }
        })
    }

    pub fn adjoint_apply(&self, p: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if p.len() != self.out_dim() {
            return Err(OperatorError::DimensionMismatch {
                side: "adjoint_apply",
                expected: self.out_dim(),
                actual: p.len(),
            });
        }
        Ok(match self {
            Self::Dense(m) => m.matvec_transpose(p),
            Self::ScaledIdentity { scale, .. } => linalg::scaled(p, *scale),
            Self::Difference1d { len } => {
                let n = *len;
                let mut out = vec![0.0; n];
                for (i, &v) in p.iter().enumerate() {
                    out[i] -= v;
                    out[i + 1] += v;
                }
                out
            }
            Self::Difference2d { rows, cols } => {
                let (r, c) = (*rows, *cols);
                let mut out = vec![0.0; r * c];
                let mut idx = 0;
                for i in 0..r {
                    for j in 0..c - 1 {
                        let v = p[idx];
                        out[i * c + j] -= v;
                        out[i * c + j + 1] += v;
                        idx += 1;
                    }
                }
                for i in 0..r - 1 {
                    for j in 0..c {
                        let v = p[idx];
                        out[i * c + j] -= v;
                        out[(i + 1) * c + j] += v;
                        idx += 1;
                    }
                }
                out
            }
            Self::Convolution2d { rows, cols, kernel } => {
                convolve_periodic(p, *rows, *cols, kernel, true)
            }
        })
    }

    /// Spectral norm within relative tolerance `tol`.
    ///
    /// Lanczos with full reorthogonalization on the Gram operator `Op^T Op`.
    /// The top Ritz value is tracked by Sturm bisection, and iteration stops
    /// once the Lanczos residual certificate `beta_k |s_k|` bounds the
    /// eigenvalue error by `tol` times the Ritz value. The Krylov dimension
    /// is capped at 10 000; exceeding the cap is an error.
    pub fn operator_norm(&self, tol: f64) -> Result<f64, OperatorError> {
        if !(tol > 0.0) {
            return Err(OperatorError::InvalidTolerance(tol));
        }
        if let Self::ScaledIdentity { scale, .. } = self {
            return Ok(scale.abs());
        }
        let n = self.in_dim();
        let cap = LANCZOS_CAP.min(n);
        let mut rng = SplitMix64::new(0x5EED_1A11);
        let mut v = vec![0.0; n];
        rng.fill_standard_normal(&mut v);
        let nrm = linalg::norm2(&v);
        for x in v.iter_mut() {
            *x /= nrm;
        }
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for j in 0..cap {
            let mut w = self.adjoint_apply(&self.apply(&basis[j])?)?;
            let alpha = linalg::dot(&w, &basis[j]);
            alphas.push(alpha);
            // Full reorthogonalization keeps the tridiagonal faithful.
            for _ in 0..2 {
                for b in &basis {
                    let proj = linalg::dot(&w, b);
                    linalg::axpy(-proj, b, &mut w);
                }
            }
            let beta = linalg::norm2(&w);
            let ritz = linalg::tridiagonal_top_eigenvalue(&alphas, &betas);
            if beta <= 1e-14 * (1.0 + ritz.max(0.0)) {
                // Krylov space is invariant; the estimate is exact.
                return Ok(ritz.max(0.0).sqrt());
            }
            let last_component = linalg::tridiagonal_top_eigvec_last(&alphas, &betas, ritz);
            if beta * last_component <= 0.5 * tol * ritz.max(f64::MIN_POSITIVE) && alphas.len() >= 2
            {
                return Ok(ritz.max(0.0).sqrt());
            }
            if j + 1 == cap {
                break;
            }
            for x in w.iter_mut() {
                *x /= beta;
            }
            betas.push(beta);
            basis.push(w);
        }
        if cap == n {
            // The full Krylov space was built: the tridiagonal is exact.
            return Ok(linalg::tridiagonal_top_eigenvalue(&alphas, &betas)
                .max(0.0)
                .sqrt());
        }
        Err(OperatorError::IterationCapExceeded { cap, tol })
    }

    /// Smallest strictly positive singular value (the constant usually called
    /// theta), by dense eigendecomposition of the smaller Gram matrix with the
    /// rank cutoff [`RANK_CUTOFF_REL`]. Desk scale only.
    pub fn smallest_positive_singular_value(&self) -> Result<f64, OperatorError> {
        if let Self::ScaledIdentity { scale, .. } = self {
            return if *scale == 0.0 {
                Err(OperatorError::ZeroOperator)
            } else {
                Ok(scale.abs())
            };
        }
        let side = self.in_dim().min(self.out_dim());
        if side > DENSE_SPECTRUM_LIMIT {
            return Err(OperatorError::DeskScaleExceeded {
                dim: side,
                limit: DENSE_SPECTRUM_LIMIT,
            });
        }
        let gram = self.gram_matrix()?;
        let eigenvalues = gram.sym_eigenvalues()?;
        let sigma_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt();
        if sigma_max == 0.0 {
            return Err(OperatorError::ZeroOperator);
        }
        // Going through the Gram matrix squares the spectrum, so singular
        // values below sqrt(n * eps) * sigma_max are indistinguishable from
        // zero; the configured cutoff cannot be tighter than that floor.
        let gram_noise_floor = (32.0 * side as f64 * f64::EPSILON).sqrt();
        let cutoff = RANK_CUTOFF_REL.max(gram_noise_floor) * sigma_max;
        eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .find(|s| *s > cutoff)
            .ok_or(OperatorError::ZeroOperator)
    }

    /// Gram matrix on the smaller side: `Op^T Op` if `in_dim <= out_dim`,
    /// otherwise `Op Op^T`. Both share the nonzero singular values.
    pub fn gram_matrix(&self) -> Result<DenseMatrix, OperatorError> {
        let n = self.in_dim();
        let m = self.out_dim();
        let side = n.min(m);
        let mut g = DenseMatrix::zeros(side, side);
        let mut e = vec![0.0; side];
        for j in 0..side {
            e[j] = 1.0;
            let col = if n <= m {
                self.adjoint_apply(&self.apply(&e)?)?
            } else {
                self.apply(&self.adjoint_apply(&e)?)?
            };
            for i in 0..side {
                g.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        Ok(g)
    }

    /// Materialized matrix form, for desk-scale cross-checks and rank tests.
    pub fn to_dense(&self) -> Result<DenseMatrix, OperatorError> {
        let (m, n) = (self.out_dim(), self.in_dim());
        let mut out = DenseMatrix::zeros(m, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            for i in 0..m {
                out.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        Ok(out)
    }
}

/// Periodic 2-D convolution; `adjoint = true` applies the transpose, which is
/// correlation with the same kernel. Each (kernel row, image row) pair reduces
/// to a cyclically shifted row accumulation, done as two contiguous runs.
fn convolve_periodic(
    x: &[f64],
    rows: usize,
    cols: usize,
    kernel: &Kernel2d,
    adjoint: bool,
) -> Vec<f64> {
    let s = kernel.size as isize;
    let h = s / 2;
    let (r, c) = (rows as isize, cols as isize);
    let mut out = vec![0.0; rows * cols];
    for (i, out_row) in out.chunks_exact_mut(cols).enumerate() {
        let i = i as isize;
        for a in 0..s {
            let off_i = a - h;
            let ii = if adjoint {
                (i + off_i).rem_euclid(r)
            } else {
                (i - off_i).rem_euclid(r)
            };
            let xrow = &x[(ii * c) as usize..(ii * c + c) as usize];
            let krow = &kernel.weights[(a * s) as usize..(a * s + s) as usize];
            for b in 0..s {
                let w = krow[b as usize];
                if w == 0.0 {
                    continue;
                }
                let off_j = b - h;
                // source index for output j: (j -+ off_j) mod c
                let start = if adjoint {
                    off_j.rem_euclid(c)
                } else {
                    (-off_j).rem_euclid(c)
                } as usize;
                let head = cols - start;
                for j in 0..head {
                    out_row[j] += w * xrow[start + j];
                }
                for j in head..cols {
                    out_row[j] += w * xrow[j - head];
                }
            }
        }
    }
    out
}

/// Closed-form spectra for the structured kinds; used as independent oracles
/// in the verification suite.
pub mod reference_spectra {
    use std::f64::consts::PI;

    /// Singular values of the forward difference on `n` points: 2 sin(k pi / 2n), k = 1..n-1.
    pub fn difference_1d_extremes(n: usize) -> (f64, f64) {
        let smallest = 2.0 * (PI / (2.0 * n as f64)).sin();
        let largest = 2.0 * ((n as f64 - 1.0) * PI / (2.0 * n as f64)).sin();
        (smallest, largest)
    }

    /// Extreme singular values of the stacked 2-D forward difference on an
    /// r x c grid. The Gram eigenvalues are 4 sin^2(i pi / 2r) + 4 sin^2(j pi / 2c).
    pub fn difference_2d_extremes(rows: usize, cols: usize) -> (f64, f64) {
        let lam = |i: usize, n: usize| 4.0 * ((i as f64) * PI / (2.0 * n as f64)).sin().powi(2);
        let largest = (lam(rows - 1, rows) + lam(cols - 1, cols)).sqrt();
        let smallest_pos = lam(1, rows).min(lam(1, cols)).sqrt();
        (smallest_pos, largest)
    }

    /// Singular values of a periodic convolution are the magnitudes of the
    /// 2-D DFT of the kernel embedded on the grid. Direct separable DFT;
    /// returns the magnitudes unsorted.
    pub fn convolution_2d_singular_values(
        rows: usize,
        cols: usize,
        kernel_size: usize,
        kernel: &[f64],
    ) -> Vec<f64> {
        let h = (kernel_size / 2) as isize;
        let mut embedded = vec![0.0f64; rows * cols];
        for a in 0..kernel_size as isize {
            for b in 0..kernel_size as isize {
                let i = (a - h).rem_euclid(rows as isize) as usize;
                let j = (b - h).rem_euclid(cols as isize) as usize;
                embedded[i * cols + j] += kernel[(a * kernel_size as isize + b) as usize];
            }
        }
        // Row DFTs then column DFTs on (re, im).
        let mut re = embedded;
        let mut im = vec![0.0f64; rows * cols];
        dft_rows(&mut re, &mut im, rows, cols);
        transpose_pair(&mut re, &mut im, rows, cols);
        dft_rows(&mut re, &mut im, cols, rows);
        re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).collect()
    }

    fn dft_rows(re: &mut [f64], im: &mut [f64], rows: usize, cols: usize) {
        let mut out_re = vec![0.0; cols];
        let mut out_im = vec![0.0; cols];
        for r in 0..rows {
            let row_re = &re[r * cols..(r + 1) * cols];
            let row_im = &im[r * cols..(r + 1) * cols];
            for k in 0..cols {
                let mut sr = 0.0;
                let mut si = 0.0;
                for (n, (&xr, &xi)) in row_re.iter().zip(row_im).enumerate() {
                    let ang = -2.0 * PI * (k * n % cols) as f64 / cols as f64;
                    let (s, c) = ang.sin_cos();
                    sr += xr * c - xi * s;
                    si += xr * s + xi * c;
                }
                out_re[k] = sr;
                out_im[k] = si;
            }
            re[r * cols..(r + 1) * cols].copy_from_slice(&out_re);
            im[r * cols..(r + 1) * cols].copy_from_slice(&out_im);
        }
    }

    fn transpose_pair(re: &mut Vec<f64>, im: &mut Vec<f64>, rows: usize, cols: usize) {
        let mut tre = vec![0.0; rows * cols];
        let mut tim = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                tre[j * rows + i] = re[i * cols + j];
                tim[j * rows + i] = im[i * cols + j];
            }
        }
        *re = tre;
        *im = tim;
    }
}

/// The linear constraint `A x + B y = c`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub a: LinearOperator,
    pub b: LinearOperator,
    pub c: Vec<f64>,
}

impl ConstraintSystem {
    pub fn new(a: LinearOperator, b: LinearOperator, c: Vec<f64>) -> Result<Self, OperatorError> {
        if a.out_dim() != b.out_dim() || a.out_dim() != c.len() {
            return Err(OperatorError::ConstraintRows {
                a_out: a.out_dim(),
                b_out: b.out_dim(),
                c_len: c.len(),
            });
        }
        Ok(Self { a, b, c })
    }

    /// A x + B y - c
    pub fn residual(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let mut r = self.a.apply(x)?;
        let by = self.b.apply(y)?;
        for ((ri, bi), ci) in r.iter_mut().zip(&by).zip(&self.c) {
            *ri += bi - ci;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn adjoint_gap(op: &LinearOperator, rng: &mut SplitMix64) -> f64 {
        let mut x = vec![0.0; op.in_dim()];
        let mut p = vec![0.0; op.out_dim()];
        rng.fill_standard_normal(&mut x);
        rng.fill_standard_normal(&mut p);
        let lhs = linalg::dot(&op.apply(&x).unwrap(), &p);
        let rhs = linalg::dot(&x, &op.adjoint_apply(&p).unwrap());
        (lhs - rhs).abs() / (1.0 + lhs.abs())
    }

    #[test]
    fn identity_apply_is_identity() {
        let op = LinearOperator::identity(3);
        assert_eq!(op.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            op.adjoint_apply(&[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn difference_1d_annihilates_constants() {
        let op = LinearOperator::difference_1d(4).unwrap();
        assert_eq!(
            op.apply(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn difference_1d_hand_values() {
        let op = LinearOperator::difference_1d(4).unwrap();
        assert_eq!(
            op.apply(&[0.0, 1.0, 3.0, 6.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn difference_1d_adjoint_matches_transpose() {
        let op = LinearOperator::difference_1d(3).unwrap();
        assert_eq!(op.adjoint_apply(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0, 0.0]);
    }

    #[test]
    fn apply_rejects_wrong_dims() {
        let op = LinearOperator::difference_1d(4).unwrap();
        let err = op.apply(&[1.0, 2.0]).unwrap_err();
        match err {
            OperatorError::DimensionMismatch {
                expected, actual, ..
            } => {
                assert_eq!(expected, 4);
                assert_eq!(actual, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(op.adjoint_apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn dense_adjoint_inner_product_identity() {
        let mut rng = SplitMix64::new(17);
        let m = DenseMatrix::from_fn(5, 7, |_, _| rng.standard_normal());
        let op = LinearOperator::dense(m);
        for _ in 0..100 {
            assert!(adjoint_gap(&op, &mut rng) <= 1e-10);
        }
    }

    #[test]
    fn all_kinds_pass_adjoint_test() {
        let mut rng = SplitMix64::new(99);
        let kernel = Kernel2d::new(3, vec![0.1, 0.2, 0.1, 0.2, 0.5, 0.2, 0.1, 0.2, 0.3]).unwrap();
        let ops = vec![
            LinearOperator::identity(6),
            LinearOperator::scaled_identity(6, -1.0),
            LinearOperator::difference_1d(9).unwrap(),
            LinearOperator::difference_2d(4, 5).unwrap(),
            LinearOperator::convolution_2d(6, 5, kernel).unwrap(),
            LinearOperator::dense(DenseMatrix::from_fn(4, 6, |i, j| {
                (i * 7 + j) as f64 / 10.0 - 1.0
            })),
        ];
        for op in &ops {
            for _ in 0..100 {
                assert!(
                    adjoint_gap(op, &mut rng) <= 1e-10,
                    "kind {}",
                    op.kind_name()
                );
            }
        }
    }

    #[test]
    fn structured_operators_match_materialized_matrices() {
        // Independent explicit matrices, compared entrywise against to_dense().
        let op = LinearOperator::difference_1d(5).unwrap();
        let mut expect = DenseMatrix::zeros(4, 5);
        for i in 0..4 {
            expect.set(i, i, -1.0);
            expect.set(i, i + 1, 1.0);
        }
        assert_eq!(op.to_dense().unwrap(), expect);

        let op2 = LinearOperator::difference_2d(3, 3).unwrap();
        assert_eq!(op2.in_dim(), 9);
        assert_eq!(op2.out_dim(), 12);
        let dense = op2.to_dense().unwrap();
        // Row 0: horizontal difference at pixel (0,0): x[0][1]-x[0][0].
        assert_eq!(dense.get(0, 0), -1.0);
        assert_eq!(dense.get(0, 1), 1.0);
        // First vertical row is at offset 3*2=6: x[1][0]-x[0][0].
        assert_eq!(dense.get(6, 0), -1.0);
        assert_eq!(dense.get(6, 3), 1.0);
        for i in 0..12 {
            let s: f64 = (0..9).map(|j| dense.get(i, j)).sum();
            assert_eq!(s, 0.0, "difference rows sum to zero");
        }
    }

    #[test]
    fn dirac_kernel_is_identity() {
        let op = LinearOperator::convolution_2d(4, 4, Kernel2d::dirac(3).unwrap()).unwrap();
        let mut rng = SplitMix64::new(3);
        let mut x = vec![0.0; 16];
        rng.fill_standard_normal(&mut x);
        let y = op.apply(&x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(Kernel2d::new(2, vec![0.25; 4]).is_err());
        assert!(
            LinearOperator::build(OperatorDescriptor::Convolution2d {
                rows: 4,
                cols: 4,
                kernel_size: 4,
                kernel: vec![1.0 / 16.0; 16],
            })
            .is_err()
        );
    }

    #[test]
    fn build_rejects_bad_dims() {
        assert!(LinearOperator::build(OperatorDescriptor::Difference1d { len: 1 }).is_err());
        assert!(
            LinearOperator::build(OperatorDescriptor::Dense {
                rows: 0,
                cols: 2,
                entries: vec![]
            })
            .is_err()
        );
        assert!(
            LinearOperator::build(OperatorDescriptor::Dense {
                rows: 2,
                cols: 2,
                entries: vec![1.0]
            })
            .is_err()
        );
    }

    #[test]
    fn build_dense_1x1_identity() {
        let op = LinearOperator::build(OperatorDescriptor::Dense {
            rows: 1,
            cols: 1,
            entries: vec![1.0],
        })
        .unwrap();
        assert_eq!(op.apply(&[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn norm_of_identity_and_sign_flip() {
        let id = LinearOperator::identity(10);
        assert!((id.operator_norm(1e-10).unwrap() - 1.0).abs() < 1e-12);
        let neg = LinearOperator::scaled_identity(10, -1.0);
        assert!((neg.operator_norm(1e-10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_of_difference_matches_closed_form() {
        let op = LinearOperator::difference_1d(4).unwrap();
        let norm = op.operator_norm(1e-10).unwrap();
        let expect = 2.0 * (3.0 * std::f64::consts::PI / 8.0).sin();
        assert!((norm - expect).abs() < 1e-8, "{norm} vs {expect}");
    }

    #[test]
    fn theta_of_difference_matches_closed_form() {
        let op = LinearOperator::difference_1d(4).unwrap();
        let theta = op.smallest_positive_singular_value().unwrap();
        let expect = 2.0 * (std::f64::consts::PI / 8.0).sin();
        assert!((theta - expect).abs() < 1e-10, "{theta} vs {expect}");
    }

    #[test]
    fn theta_excludes_zero_singular_values() {
        let m = DenseMatrix::from_data(2, 2, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let op = LinearOperator::dense(m);
        assert!((op.smallest_positive_singular_value().unwrap() - 2.0).abs() < 1e-12);
        assert!(
            (LinearOperator::identity(5)
                .smallest_positive_singular_value()
                .unwrap()
                - 1.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn zero_operator_has_no_theta() {
        let op = LinearOperator::dense(DenseMatrix::zeros(3, 3));
        assert!(matches!(
            op.smallest_positive_singular_value(),
            Err(OperatorError::ZeroOperator)
        ));
        let zero_scale = LinearOperator::scaled_identity(3, 0.0);
        assert!(matches!(
            zero_scale.smallest_positive_singular_value(),
            Err(OperatorError::ZeroOperator)
        ));
    }

    #[test]
    fn norm_dominates_theta() {
        let mut rng = SplitMix64::new(8);
        let ops = vec![
            LinearOperator::difference_1d(12).unwrap(),
            LinearOperator::difference_2d(4, 6).unwrap(),
            LinearOperator::dense(DenseMatrix::from_fn(7, 5, |_, _| rng.standard_normal())),
        ];
        for op in &ops {
            let n = op.operator_norm(1e-10).unwrap();
            let t = op.smallest_positive_singular_value().unwrap();
            assert!(n >= t - 1e-12, "{} < {}", n, t);
        }
    }

    #[test]
    fn conv_singular_values_match_dense_gram() {
        let kernel = Kernel2d::new(3, vec![0.0, 0.1, 0.0, 0.1, 0.6, 0.1, 0.0, 0.1, 0.0]).unwrap();
        let op = LinearOperator::convolution_2d(4, 5, kernel.clone()).unwrap();
        let mut reference =
            reference_spectra::convolution_2d_singular_values(4, 5, 3, kernel.weights());
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gram = op.gram_matrix().unwrap();
        let sv: Vec<f64> = gram
            .sym_eigenvalues()
            .unwrap()
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        for (a, b) in sv.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn difference_2d_norm_and_theta_match_closed_form() {
        let op = LinearOperator::difference_2d(5, 7).unwrap();
        let (theta_ref, norm_ref) = reference_spectra::difference_2d_extremes(5, 7);
        let norm = op.operator_norm(1e-10).unwrap();
        let theta = op.smallest_positive_singular_value().unwrap();
        assert!((norm - norm_ref).abs() < 1e-8 * norm_ref);
        assert!((theta - theta_ref).abs() < 1e-8 * theta_ref);
    }

    #[test]
    fn constraint_system_checks_rows() {
        let a = LinearOperator::identity(3);
        let b = LinearOperator::identity(4);
        assert!(ConstraintSystem::new(a.clone(), b, vec![0.0; 3]).is_err());
        let b = LinearOperator::scaled_identity(3, -1.0);
        assert!(ConstraintSystem::new(a, b, vec![0.0; 3]).is_ok());
    }

    #[test]
    fn norm_linearity_of_apply() {
        let mut rng = SplitMix64::new(21);
        let op = LinearOperator::difference_2d(3, 4).unwrap();
        let mut x = vec![0.0; 12];
        let mut y = vec![0.0; 12];
        rng.fill_standard_normal(&mut x);
        rng.fill_standard_normal(&mut y);
        let (a, b) = (1.7, -0.3);
        let mut combo = vec![0.0; 12];
        for i in 0..12 {
            combo[i] = a * x[i] + b * y[i];
        }
        let lhs = op.apply(&combo).unwrap();
        let mut rhs = linalg::scaled(&op.apply(&x).unwrap(), a);
        linalg::axpy(b, &op.apply(&y).unwrap(), &mut rhs);
        let diff = linalg::sub(&lhs, &rhs);
        assert!(norm2(&diff) <= 1e-12 * (1.0 + norm2(&lhs)));
    }
}
