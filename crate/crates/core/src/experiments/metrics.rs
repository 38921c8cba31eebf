use super::TrialOutcome;
use crate::config::SystemConfig;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Symbol errors over transmitted symbols of the true active users.
pub fn compute_ser(outcomes: &[TrialOutcome]) -> f64 {
    let (errors, total) = outcomes
        .iter()
        .fold((0usize, 0usize), |(e, t), o| (e + o.symbol_errors, t + o.symbols_total));
    ratio(errors, total)
}

/// Fraction of active-user messages with more than `threshold` bit errors,
/// recounted from the per-message bit errors.
pub fn compute_fer(outcomes: &[TrialOutcome], threshold: usize) -> f64 {
    let (errors, total) = outcomes.iter().fold((0usize, 0usize), |(e, t), o| {
        (
            e + o.message_bit_errors.iter().filter(|&&b| b > threshold).count(),
            t + o.message_bit_errors.len(),
        )
    });
    ratio(errors, total)
}

/// `(1 - p_fer) N_a d / (M T)`.
pub fn normalized_throughput(p_fer: f64, cfg: &SystemConfig) -> f64 {
    let delivered = (cfg.n_active * cfg.msg_len) as f64;
    let capacity = (cfg.n_antennas * cfg.frame_len) as f64;
    (1.0 - p_fer) * delivered / capacity
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
