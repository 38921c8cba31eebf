//! Dense complex linear-algebra helpers on top of `faer`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use faer::c64;

pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// One circularly-symmetric complex Gaussian sample, `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows x cols` matrix of i.i.d. `CN(0, 1)` entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(rows, cols);
    for j in 0..cols {
        for v in out.col_as_slice_mut(j) {
            *v = complex_gaussian(rng);
        }
    }
    out
}

pub fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `a^H b`.
pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `A^H B` as a new matrix.
pub fn adjoint_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(a.ncols(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.adjoint(), b, ONE, Par::Seq);
    out
}

/// `A x` for a column-major slice `x`.
pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let mut out = vec![ZERO; a.nrows()];
    mat_vec_into(a, x, &mut out);
    out
}

/// `out = A x`.
pub fn mat_vec_into(a: MatRef<'_, c64>, x: &[c64], out: &mut [c64]) {
    let mut dst = faer::MatMut::from_column_major_slice_mut(out, a.nrows(), 1);
    matmul(
        dst.as_mut(),
        Accum::Replace,
        a,
        MatRef::from_column_major_slice(x, x.len(), 1),
        ONE,
        Par::Seq,
    );
}

/// `out = A^H x`.
pub fn adjoint_vec_into(a: MatRef<'_, c64>, x: &[c64], out: &mut [c64]) {
    let mut dst = faer::MatMut::from_column_major_slice_mut(out, a.ncols(), 1);
    matmul(
        dst.as_mut(),
        Accum::Replace,
        a.adjoint(),
        MatRef::from_column_major_slice(x, x.len(), 1),
        ONE,
        Par::Seq,
    );
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values()
        .expect("svd converges")
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Largest eigenvalue of a Hermitian matrix (lower triangle is read).
pub fn hermitian_max_eigenvalue(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("hermitian evd converges");
    ev.last().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CholeskyError {
    #[error("matrix is not numerically positive definite (failed at pivot block starting at {0})")]
    NotPositiveDefinite(usize),
    #[error("block dimensions do not match: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn log_det_hpd(a: MatRef<'_, c64>) -> Result<f64, CholeskyError> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| CholeskyError::NotPositiveDefinite(0))?;
    let l = llt.L();
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Lower Cholesky factor `L` of a Hermitian positive-definite matrix `G = L L^H`
/// that grows one diagonal block at a time.
///
/// Appending the block `[C; D]` (cross block `C = G_old,new`, diagonal block
/// `D = G_new,new`) costs one triangular solve against the existing factor plus
/// a small Cholesky of the Schur complement `D - X^H X` with `X = L^{-1} C`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    l: Mat<c64>,
    dim: usize,
}

impl BlockCholesky {
    pub fn with_capacity(capacity: usize) -> Self {
        Self { l: Mat::zeros(capacity, capacity), dim: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self) -> MatRef<'_, c64> {
        self.l.as_ref().submatrix(0, 0, self.dim, self.dim)
    }

    /// Appends a diagonal block. `cross` is `dim x b`, `diag` is `b x b`.
    pub fn push_block(
        &mut self,
        cross: MatRef<'_, c64>,
        diag: MatRef<'_, c64>,
    ) -> Result<(), CholeskyError> {
        let b = diag.nrows();
        if diag.ncols() != b || cross.nrows() != self.dim || cross.ncols() != b {
            return Err(CholeskyError::Shape {
                expected: format!("cross {}x{b}, diag {b}x{b}", self.dim),
                got: format!(
                    "cross {}x{}, diag {}x{}",
                    cross.nrows(),
                    cross.ncols(),
                    diag.nrows(),
                    diag.ncols()
                ),
            });
        }
        if self.dim + b > self.l.nrows() {
            let capacity = (self.dim + b).max(2 * self.l.nrows());
            let mut grown = Mat::<c64>::zeros(capacity, capacity);
            grown
                .as_mut()
                .submatrix_mut(0, 0, self.dim, self.dim)
                .copy_from(self.factor());
            self.l = grown;
        }
        let n = self.dim;

        let mut x = cross.to_owned();
        if n > 0 {
            self.l
                .as_ref()
                .submatrix(0, 0, n, n)
                .solve_lower_triangular_in_place(x.as_mut());
        }
        let mut schur = diag.to_owned();
        if n > 0 {
            matmul(schur.as_mut(), Accum::Add, x.adjoint(), x.as_ref(), -ONE, Par::Seq);
        }
        let llt = schur
            .llt(Side::Lower)
            .map_err(|_| CholeskyError::NotPositiveDefinite(n))?;

        self.l.as_mut().submatrix_mut(n, 0, b, n).copy_from(x.adjoint());
        self.l
            .as_mut()
            .submatrix_mut(n, n, b, b)
            .copy_from_triangular_lower(llt.L());
        self.dim += b;
        Ok(())
    }

    /// Solves `G x = rhs` with the current factor.
    pub fn solve(&self, rhs: &[c64]) -> Vec<c64> {
        assert_eq!(rhs.len(), self.dim, "right-hand side length");
        let mut x = rhs.to_vec();
        {
            let mut view = faer::MatMut::from_column_major_slice_mut(&mut x, self.dim, 1);
            let l = self.factor();
            l.solve_lower_triangular_in_place(view.as_mut());
            l.adjoint().solve_upper_triangular_in_place(view.as_mut());
        }
        x
    }

    /// `(max L_ii / min L_ii)^2`, a cheap lower estimate of `cond_2(G)`.
    pub fn condition_estimate(&self) -> f64 {
        if self.dim == 0 {
            return 1.0;
        }
        let (lo, hi) = (0..self.dim)
            .map(|i| self.l[(i, i)].re)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (hi / lo).powi(2)
    }

    /// Natural log-determinant of `G`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim).map(|i| 2.0 * self.l[(i, i)].re.ln()).sum()
    }
}
