//! Block orthogonal matching pursuit and the genie-aided least-squares baseline.
//!
//! Each BOMP iteration picks the unselected block whose correlation with the
//! residual, `||B_n^H r||_2`, is largest, then refits all selected blocks by
//! least squares against the full model `y = sqrt(rho0 M) B_S s_S + z`.
//!
//! The least-squares step keeps a Cholesky factor of the support Gram matrix
//! `G_S = B_S^H B_S`. Its entries come from the Kronecker closed form
//! `(P_i^H P_j)(h_i^H h_j)/M`, and each new block extends the factor by one
//! block row, so `B` is never formed.

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{c64, norm2, BlockCholesky, CholeskyError, ZERO};
use crate::operator::{BlockOperator, OperatorError};
use crate::txchain::demodulate_qpsk;

/// Gram matrices with a condition estimate above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative margin inside which two correlation norms count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("{requested} iterations requested but at most {max} are possible")]
    TooManyIterations { requested: usize, max: usize },
    #[error("support Gram matrix is numerically singular (condition estimate {condition:.3e}) for blocks {support:?}")]
    SingularGram { support: Vec<usize>, condition: f64 },
    #[error("true support of size {support} does not fit in {iterations} blocks")]
    SupportTooLarge { support: usize, iterations: usize },
}

/// Stopping rule for [`bomp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BompParams {
    /// Fixed iteration count `K`.
    pub iterations: usize,
    /// Stop early once `||r||_2 <= tol`; 0 keeps the fixed-`K` behaviour.
    pub tol: f64,
}

impl BompParams {
    pub fn fixed(iterations: usize) -> Self {
        Self { iterations, tol: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Selected blocks in selection order.
    pub support: Vec<usize>,
    /// Stacked estimate of length `N d`, zero outside `support`.
    pub s_hat: Vec<c64>,
    /// Residual norm after each least-squares refit.
    pub residual_norms: Vec<f64>,
    /// Hard QPSK decisions per user; `None` for users outside the support.
    pub decided_bits: Vec<Option<Vec<u8>>>,
}

impl RecoveryResult {
    pub fn block(&self, n: usize, d: usize) -> &[c64] {
        &self.s_hat[n * d..(n + 1) * d]
    }
}

/// Incremental least-squares state over a growing block support.
#[derive(Debug, Clone)]
pub struct SupportLeastSquares {
    support: Vec<usize>,
    chol: BlockCholesky,
    /// `B_S^H y`, stacked in support order.
    rhs: Vec<c64>,
}

impl SupportLeastSquares {
    pub fn new(capacity_blocks: usize, block_len: usize) -> Self {
        Self {
            support: Vec::with_capacity(capacity_blocks),
            chol: BlockCholesky::with_capacity(capacity_blocks * block_len),
            rhs: Vec::with_capacity(capacity_blocks * block_len),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Adds block `n` to the support, extending the Gram factor by one block row.
    pub fn push(&mut self, op: &BlockOperator<'_>, y: &[c64], n: usize) -> Result<(), RecoveryError> {
        let cross = op.cross_gram_column(&self.support, n)?;
        let diag = op.cross_gram(n, n)?;
        self.support.push(n);
        match self.chol.push_block(cross.as_ref(), diag.as_ref()) {
            Ok(()) => {}
            Err(CholeskyError::NotPositiveDefinite(_)) => {
                return Err(RecoveryError::SingularGram {
                    support: self.support.clone(),
                    condition: f64::INFINITY,
                })
            }
            Err(e) => unreachable!("block shapes are consistent by construction: {e}"),
        }
        let condition = self.chol.condition_estimate();
        if !(condition <= MAX_CONDITION) {
            return Err(RecoveryError::SingularGram { support: self.support.clone(), condition });
        }
        self.rhs.extend(op.adjoint_block(n, y)?);
        Ok(())
    }

    /// `argmin_s ||y - sqrt(rho0 M) B_S s||_2`, stacked in support order.
    pub fn solve(&self, scale: f64) -> Vec<c64> {
        let mut s = self.chol.solve(&self.rhs);
        s.iter_mut().for_each(|v| *v /= scale);
        s
    }

    pub fn condition_estimate(&self) -> f64 {
        self.chol.condition_estimate()
    }
}

fn residual(op: &BlockOperator<'_>, y: &[c64], support: &[usize], coeffs: &[c64]) -> Result<Vec<c64>, RecoveryError> {
    let fit = op.apply_blocks(support, coeffs)?;
    let scale = op.scale();
    Ok(y.iter().zip(&fit).map(|(a, b)| a - b * scale).collect())
}

fn finish(op: &BlockOperator<'_>, support: Vec<usize>, coeffs: &[c64], residual_norms: Vec<f64>) -> RecoveryResult {
    let d = op.block_len();
    let mut s_hat = vec![ZERO; op.cols()];
    for (k, &n) in support.iter().enumerate() {
        s_hat[n * d..(n + 1) * d].copy_from_slice(&coeffs[k * d..(k + 1) * d]);
    }
    let mut result = RecoveryResult { support, s_hat, residual_norms, decided_bits: Vec::new() };
    result.decided_bits = decide_messages(&result, d, op.n_blocks());
    result
}

/// Picks the unselected block with the largest correlation norm; ties go to
/// the lower index.
fn select_block(correlation_norms: &[f64], selected: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (n, &v) in correlation_norms.iter().enumerate() {
        if selected[n] {
            continue;
        }
        match best {
            Some((_, b)) if v <= b * (1.0 + TIE_TOLERANCE) => {}
            _ => best = Some((n, v)),
        }
    }
    best.map(|(n, _)| n)
}

/// Block orthogonal matching pursuit.
pub fn bomp(op: &BlockOperator<'_>, y: &[c64], params: BompParams) -> Result<RecoveryResult, RecoveryError> {
    if y.len() != op.rows() {
        return Err(OperatorError::Length { expected: op.rows(), got: y.len() }.into());
    }
    let max = (op.rows() / op.block_len().max(1)).min(op.n_blocks());
    if params.iterations > max {
        return Err(RecoveryError::TooManyIterations { requested: params.iterations, max });
    }

    let scale = op.scale();
    let mut ls = SupportLeastSquares::new(params.iterations, op.block_len());
    let mut selected = vec![false; op.n_blocks()];
    let mut r = y.to_vec();
    let mut coeffs = Vec::new();
    let mut residual_norms = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        if norm2(&r) <= params.tol {
            break;
        }
        let corr = op.adjoint_all(&r)?;
        let norms: Vec<f64> = (0..op.n_blocks())
            .map(|n| norm2(corr.col_as_slice(n)))
            .collect();
        let Some(next) = select_block(&norms, &selected) else {
            break;
        };
        selected[next] = true;
        ls.push(op, y, next)?;
        coeffs = ls.solve(scale);
        r = residual(op, y, ls.support(), &coeffs)?;
        residual_norms.push(norm2(&r));
    }
    Ok(finish(op, ls.support().to_vec(), &coeffs, residual_norms))
}

/// Least squares on the true support padded with `K - |I|` random off-support
/// blocks, the baseline BOMP is compared against.
pub fn genie_ls<R: Rng + ?Sized>(
    op: &BlockOperator<'_>,
    y: &[c64],
    true_support: &[usize],
    iterations: usize,
    rng: &mut R,
) -> Result<RecoveryResult, RecoveryError> {
    if y.len() != op.rows() {
        return Err(OperatorError::Length { expected: op.rows(), got: y.len() }.into());
    }
    if true_support.len() > iterations {
        return Err(RecoveryError::SupportTooLarge { support: true_support.len(), iterations });
    }
    let max = (op.rows() / op.block_len().max(1)).min(op.n_blocks());
    if iterations > max {
        return Err(RecoveryError::TooManyIterations { requested: iterations, max });
    }
    let off: Vec<usize> = (0..op.n_blocks()).filter(|n| !true_support.contains(n)).collect();
    let extra = index::sample(rng, off.len(), iterations - true_support.len());
    let support: Vec<usize> = true_support
        .iter()
        .copied()
        .chain(extra.iter().map(|k| off[k]))
        .collect();

    let mut ls = SupportLeastSquares::new(iterations, op.block_len());
    for &n in &support {
        ls.push(op, y, n)?;
    }
    let coeffs = ls.solve(op.scale());
    let r = residual(op, y, &support, &coeffs)?;
    Ok(finish(op, support, &coeffs, vec![norm2(&r)]))
}

/// Hard decisions for every user in the support; users outside it get `None`.
pub fn decide_messages(result: &RecoveryResult, d: usize, n_users: usize) -> Vec<Option<Vec<u8>>> {
    let mut bits = vec![None; n_users];
    for &n in &result.support {
        bits[n] = Some(demodulate_qpsk(result.block(n, d)));
    }
    bits
}
