use faer::Mat;
use rand::Rng;

use super::TxError;
use crate::config::{PrecoderKind, SystemConfig};
use crate::linalg::{c64, gaussian_matrix};

const MAX_ATTEMPTS: usize = 3;
/// Smallest admissible `min |R_ii| / max |R_ii|` of the QR factor.
const RANK_TOLERANCE: f64 = 1e-10;

/// One `T x d` precoding matrix per online user, every column of unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderBank {
    pub kind: PrecoderKind,
    pub precoders: Vec<Mat<c64>>,
}

impl PrecoderBank {
    pub fn len(&self) -> usize {
        self.precoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precoders.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.precoders.first().map_or(0, |p| p.nrows())
    }

    pub fn msg_len(&self) -> usize {
        self.precoders.first().map_or(0, |p| p.ncols())
    }

    pub fn get(&self, n: usize) -> &Mat<c64> {
        &self.precoders[n]
    }
}

/// Draws the precoders of all `N` users.
///
/// A draw whose QR factor is numerically rank deficient is discarded and
/// redrawn from the continuing stream, at most three draws per user.
pub fn gen_precoders<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<PrecoderBank, TxError> {
    let (t, d) = (cfg.frame_len, cfg.msg_len);
    let precoders = (0..cfg.n_online)
        .map(|user| {
            (0..MAX_ATTEMPTS)
                .find_map(|_| draw_precoder(cfg.precoder_kind, t, d, rng))
                .ok_or(TxError::RankDeficientPrecoder { user, attempts: MAX_ATTEMPTS })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PrecoderBank { kind: cfg.precoder_kind, precoders })
}

fn draw_precoder<R: Rng + ?Sized>(kind: PrecoderKind, t: usize, d: usize, rng: &mut R) -> Option<Mat<c64>> {
    let g = gaussian_matrix(t, d, rng);
    let qr = g.qr();
    let r = qr.thin_R();
    let (lo, hi) = (0..d)
        .map(|i| r[(i, i)].norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(lo > RANK_TOLERANCE * hi) {
        return None;
    }
    let mut p = match kind {
        PrecoderKind::OrthonormalColumns => qr.compute_thin_Q(),
        PrecoderKind::NormalizedGaussian => g,
    };
    for j in 0..d {
        let col = p.col_as_slice_mut(j);
        let norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for v in col {
            *v /= norm;
        }
    }
    Some(p)
}
