//! Coherence quantities of the block operator and the recovery conditions
//! built on them.
//!
//! * block-coherence `mu_B = (1/d) max_{i != j} ||B_i^H B_j||_2`
//! * sub-coherence `nu = max_n max_{i != j in block n} |b_i^H b_j|`
//! * `tau = max_j ||B_j^H z||_2` for the realized noise
//! * the BOMP support condition and its error bound
//! * the information-theoretic necessary condition
//!   `|S| <= (H(p_e) + log2 det(I + rho0 B_I B_I^H)) / (1 - p_e)`

use std::cmp::Ordering;

use faer::Mat;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::config::SystemConfig;
use crate::linalg::{adjoint_product, c64, hermitian_max_eigenvalue, log_det_hpd, norm2, spectral_norm};
use crate::operator::{BlockOperator, OperatorError};
use crate::rng::{StreamRole, TrialSeeds};
use crate::txchain::{gen_channel, gen_messages, gen_noise, gen_precoders, MessageFrame, TxError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuaranteeError {
    #[error("block-coherence needs at least two blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("signal extremes need a non-empty active set")]
    EmptyActiveSet,
    #[error("error probability must lie in [0, 1), got {0}")]
    ErrorProbability(f64),
    #[error("the error bound is inapplicable: 1 - (d-1) nu - (K-1) d mu_B = {0:.3e} is not positive")]
    InapplicableBound(f64),
    #[error("Gram matrix of the active blocks is not positive definite")]
    Determinant,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Tx(#[from] TxError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    pub mu_block: f64,
    pub sub_coherence: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub tau: f64,
}

impl CoherenceReport {
    pub fn compute(op: &BlockOperator<'_>, messages: &MessageFrame, z: &[c64]) -> Result<Self, GuaranteeError> {
        let geometry = PrecoderGeometry::new(op);
        let (s_min, s_max) = signal_extremes(messages)?;
        Ok(Self {
            mu_block: geometry.block_coherence(op)?,
            sub_coherence: geometry.sub_coherence(op),
            s_min,
            s_max,
            tau: tau_of_noise(op, z)?,
        })
    }
}

/// Per-precoder quantities shared by the coherence computations.
struct PrecoderGeometry {
    /// `||P_n||_2`.
    spectral: Vec<f64>,
    /// `max_{i != j} |p_i^H p_j|` within `P_n`.
    max_offdiag: Vec<f64>,
}

impl PrecoderGeometry {
    fn new(op: &BlockOperator<'_>) -> Self {
        let (spectral, max_offdiag) = op
            .precoders()
            .precoders
            .iter()
            .map(|p| {
                let g = adjoint_product(p.as_ref(), p.as_ref());
                let mut off = 0.0f64;
                for j in 0..g.ncols() {
                    for i in j + 1..g.nrows() {
                        off = off.max(g[(i, j)].norm());
                    }
                }
                (hermitian_max_eigenvalue(g.as_ref()).max(0.0).sqrt(), off)
            })
            .unzip();
        Self { spectral, max_offdiag }
    }

    fn channel_energy(op: &BlockOperator<'_>, n: usize) -> f64 {
        op.channel_correlation(n, n).re
    }

    fn sub_coherence(&self, op: &BlockOperator<'_>) -> f64 {
        (0..op.n_blocks())
            .map(|n| Self::channel_energy(op, n) * self.max_offdiag[n])
            .fold(0.0, f64::max)
    }

    /// Exact maximum over block pairs. Pairs are visited in decreasing order of
    /// the upper bound `|h_i^H h_j|/M * ||P_i|| ||P_j||` and the scan stops once
    /// no remaining pair can beat the best exact value found.
    fn block_coherence(&self, op: &BlockOperator<'_>) -> Result<f64, GuaranteeError> {
        let n = op.n_blocks();
        if n < 2 {
            return Err(GuaranteeError::TooFewBlocks(n));
        }
        let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let c = op.channel_correlation(i, j).norm();
                let bound = c * self.spectral[i] * self.spectral[j] * (1.0 + 1e-9);
                pairs.push((bound, c, i, j));
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        let mut best = 0.0f64;
        for (bound, c, i, j) in pairs {
            if bound <= best {
                break;
            }
            let cross = adjoint_product(op.precoders().get(i).as_ref(), op.precoders().get(j).as_ref());
            best = best.max(c * spectral_norm(cross.as_ref()));
        }
        Ok(best / op.block_len() as f64)
    }
}

/// `mu_B = (1/d) max_{i != j} ||B_i^H B_j||_2` using the Kronecker closed form
/// `||B_i^H B_j|| = (|h_i^H h_j| / M) ||P_i^H P_j||`.
pub fn block_coherence(op: &BlockOperator<'_>) -> Result<f64, GuaranteeError> {
    PrecoderGeometry::new(op).block_coherence(op)
}

/// `nu = max_n (||h_n||^2 / M) max_{i != j} |p_i^H p_j|`; 0 when `d = 1`.
pub fn sub_coherence(op: &BlockOperator<'_>) -> f64 {
    PrecoderGeometry::new(op).sub_coherence(op)
}

/// `tau = max_j ||B_j^H z||_2`.
pub fn tau_of_noise(op: &BlockOperator<'_>, z: &[c64]) -> Result<f64, GuaranteeError> {
    let corr = op.adjoint_all(z)?;
    Ok((0..op.n_blocks())
        .map(|n| norm2(corr.col_as_slice(n)))
        .fold(0.0, f64::max))
}

/// Smallest and largest `||s_i||_2` over the active users.
pub fn signal_extremes(messages: &MessageFrame) -> Result<(f64, f64), GuaranteeError> {
    messages
        .active_set
        .iter()
        .map(|&n| norm2(&messages.symbols[n]))
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or(GuaranteeError::EmptyActiveSet)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeVerdict {
    pub condition9_holds: bool,
    pub lhs9: f64,
    pub rhs9: f64,
    /// Squared-error bound, `None` when its denominator is not positive.
    pub bound10: Option<f64>,
    /// `1 - (d-1) nu - (K-1) d mu_B`.
    pub bound10_denominator: f64,
}

/// Plain inputs of the support condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionInputs {
    pub rho0: f64,
    pub n_antennas: f64,
    pub msg_len: f64,
    pub n_active: f64,
    pub mu_block: f64,
    pub sub_coherence: f64,
    pub tau: f64,
    pub s_min: f64,
}

/// Both sides of the support condition, term by term:
///
/// ```text
/// rho0 M [1 - (d-1) nu]^2 s_l^2
///   >  tau^2
///    + rho0 M d mu_B { 2 (N_a - 1) [1 + (d-1) nu] + N_a^2 d mu_B } s_l^2
///    + 2 sqrt(rho0 M) tau { (2 N_a - 1) d mu_B + [1 + (d-1) nu] } s_l
/// ```
pub fn condition9_sides(x: &ConditionInputs) -> (f64, f64) {
    let ConditionInputs { rho0, n_antennas: m, msg_len: d, n_active: na, mu_block: mu, sub_coherence: nu, tau, s_min: sl } = *x;
    let within = 1.0 - (d - 1.0) * nu;
    let spread = 1.0 + (d - 1.0) * nu;
    let lhs = rho0 * m * within * within * sl * sl;
    let interference = rho0 * m * d * mu * (2.0 * (na - 1.0) * spread + na * na * d * mu) * sl * sl;
    let cross = 2.0 * (rho0 * m).sqrt() * tau * ((2.0 * na - 1.0) * d * mu + spread) * sl;
    (lhs, tau * tau + interference + cross)
}

/// Evaluates the support condition for `cfg.n_active` users and, when its
/// denominator is positive, the squared-error bound after `k` iterations.
pub fn check_theorem1(report: &CoherenceReport, cfg: &SystemConfig, k: usize) -> GuaranteeVerdict {
    let inputs = ConditionInputs {
        rho0: cfg.rho0(),
        n_antennas: cfg.n_antennas as f64,
        msg_len: cfg.msg_len as f64,
        n_active: cfg.n_active as f64,
        mu_block: report.mu_block,
        sub_coherence: report.sub_coherence,
        tau: report.tau,
        s_min: report.s_min,
    };
    let (lhs9, rhs9) = condition9_sides(&inputs);
    let d = inputs.msg_len;
    let denominator = 1.0 - (d - 1.0) * report.sub_coherence - (k as f64 - 1.0) * d * report.mu_block;
    let bound10 = (denominator > 0.0).then(|| {
        k as f64 * report.tau * report.tau / (denominator * denominator * inputs.rho0 * inputs.n_antennas)
    });
    GuaranteeVerdict { condition9_holds: lhs9 > rhs9, lhs9, rhs9, bound10, bound10_denominator: denominator }
}

/// Largest `N_a` in `1..=N` for which the support condition holds, or 0.
pub fn max_allowed_active(report: &CoherenceReport, cfg: &SystemConfig) -> usize {
    (1..=cfg.n_online)
        .filter(|&na| {
            let mut c = cfg.clone();
            c.n_active = na;
            check_theorem1(report, &c, na.min(cfg.bomp_iters)).condition9_holds
        })
        .max()
        .unwrap_or(0)
}

/// Whether `||s_hat - s||_2^2` respects the error bound.
pub fn theorem1_error_holds(verdict: &GuaranteeVerdict, s_true: &[c64], s_hat: &[c64]) -> Result<bool, GuaranteeError> {
    let bound = verdict
        .bound10
        .ok_or(GuaranteeError::InapplicableBound(verdict.bound10_denominator))?;
    let err: f64 = s_true.iter().zip(s_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err <= bound)
}

/// `log2 C(N, N_a) + sum b_i`, the bits needed to describe who sent what.
pub fn info_bits_lower(n: usize, n_active: usize, bits_per_user: &[f64]) -> f64 {
    let log2_binomial = if n_active == 0 || n_active == n {
        0.0
    } else {
        (ln_gamma(n as f64 + 1.0) - ln_gamma(n_active as f64 + 1.0) - ln_gamma((n - n_active) as f64 + 1.0))
            / std::f64::consts::LN_2
    };
    log2_binomial + bits_per_user.iter().sum::<f64>()
}

/// Binary entropy in bits, `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `(B_I^H B_I)` assembled block by block from the cross-Gram closed form.
pub fn active_gram(op: &BlockOperator<'_>, active_set: &[usize]) -> Result<Mat<c64>, GuaranteeError> {
    let d = op.block_len();
    let size = active_set.len() * d;
    let mut g = Mat::<c64>::zeros(size, size);
    for (a, &i) in active_set.iter().enumerate() {
        for (b, &j) in active_set.iter().enumerate() {
            g.as_mut()
                .submatrix_mut(a * d, b * d, d, d)
                .copy_from(op.cross_gram(i, j)?);
        }
    }
    Ok(g)
}

/// `log2 det(I + rho0 B_I^H B_I)`, equal to the `M T`-dimensional
/// `log2 det(I + rho0 B_I B_I^H)`.
pub fn log2_det_active(op: &BlockOperator<'_>, rho0: f64, active_set: &[usize]) -> Result<f64, GuaranteeError> {
    let mut g = active_gram(op, active_set)?;
    for col in 0..g.ncols() {
        g.col_as_slice_mut(col).iter_mut().for_each(|v| *v *= rho0);
        g[(col, col)] += c64::new(1.0, 0.0);
    }
    if g.nrows() == 0 {
        return Ok(0.0);
    }
    let ln = log_det_hpd(g.as_ref()).map_err(|_| GuaranteeError::Determinant)?;
    Ok(ln / std::f64::consts::LN_2)
}

/// Right side of the information-theoretic necessary condition.
pub fn theorem2_rhs(p_e: f64, rho0: f64, op: &BlockOperator<'_>, active_set: &[usize]) -> Result<f64, GuaranteeError> {
    if !(0.0..1.0).contains(&p_e) {
        return Err(GuaranteeError::ErrorProbability(p_e));
    }
    Ok((binary_entropy(p_e) + log2_det_active(op, rho0, active_set)?) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoBoundReport {
    pub s_bits_lower: f64,
    pub rhs11: f64,
    pub feasible: bool,
}

/// Evaluates the necessary condition for one realized frame.
pub fn info_bound(
    cfg: &SystemConfig,
    op: &BlockOperator<'_>,
    messages: &MessageFrame,
    p_e: f64,
) -> Result<InfoBoundReport, GuaranteeError> {
    let bits: Vec<f64> = messages.bits.iter().map(|b| b.len() as f64).collect();
    let s_bits_lower = info_bits_lower(cfg.n_online, messages.active_set.len(), &bits);
    let rhs11 = theorem2_rhs(p_e, cfg.rho0(), op, &messages.active_set)?;
    Ok(InfoBoundReport { s_bits_lower, rhs11, feasible: s_bits_lower <= rhs11 })
}

/// Everything the guarantees report shows for one channel realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationReport {
    pub realization: u64,
    pub coherence: CoherenceReport,
    pub verdict: GuaranteeVerdict,
    /// Present when an error probability was supplied.
    pub info: Option<InfoBoundReport>,
    pub max_allowed_active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeSurvey {
    pub realizations: Vec<RealizationReport>,
    /// Most frequent `max_allowed_active`; ties resolve to the smaller value.
    pub mode_max_allowed_active: usize,
}

/// Draws `realizations` independent frames for `cfg` and evaluates every
/// guarantee on each. The information bound, whose determinant dominates the
/// cost at large `N_a d`, is skipped when `p_e` is `None`. Realizations run on
/// the current rayon pool and are reported in order.
pub fn survey(cfg: &SystemConfig, realizations: u64, p_e: Option<f64>) -> Result<GuaranteeSurvey, GuaranteeError> {
    let rows = (0..realizations)
        .into_par_iter()
        .map(|r| evaluate_realization(cfg, r, p_e))
        .collect::<Result<Vec<_>, _>>()?;
    let mode = mode_of(rows.iter().map(|r| r.max_allowed_active));
    Ok(GuaranteeSurvey { realizations: rows, mode_max_allowed_active: mode })
}

pub fn evaluate_realization(
    cfg: &SystemConfig,
    realization: u64,
    p_e: Option<f64>,
) -> Result<RealizationReport, GuaranteeError> {
    let seeds = TrialSeeds::new(cfg.seed, realization);
    let channel = gen_channel(cfg.n_antennas, cfg.n_online, &mut seeds.stream(StreamRole::Channel));
    let precoders = gen_precoders(cfg, &mut seeds.stream(StreamRole::Precoder))?;
    let messages = gen_messages(cfg, &mut seeds.stream(StreamRole::Messages));
    let noise = gen_noise(cfg.n_antennas, cfg.frame_len, &mut seeds.stream(StreamRole::Noise));
    let op = BlockOperator::new(&channel, &precoders, cfg.rho0())?;
    let coherence = CoherenceReport::compute(&op, &messages, &noise.stacked())?;
    Ok(RealizationReport {
        realization,
        coherence,
        verdict: check_theorem1(&coherence, cfg, cfg.bomp_iters),
        info: p_e.map(|p| info_bound(cfg, &op, &messages, p)).transpose()?,
        max_allowed_active: max_allowed_active(&coherence, cfg),
    })
}

fn mode_of(values: impl Iterator<Item = usize>) -> usize {
    let mut values: Vec<usize> = values.collect();
    values.sort_unstable();
    let mut best = (0usize, 0usize);
    let mut k = 0;
    while k < values.len() {
        let run = values[k..].iter().take_while(|&&v| v == values[k]).count();
        if run > best.1 {
            best = (values[k], run);
        }
        k += run;
    }
    best.0
}
