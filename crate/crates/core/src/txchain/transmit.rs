use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rand::Rng;

use super::{ChannelState, MessageFrame, PrecoderBank, TxError};
use crate::config::SystemConfig;
use crate::linalg::{c64, gaussian_matrix, mat_vec_into};

/// Additive `M x T` noise with i.i.d. `CN(0, 1)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub z: Mat<c64>,
}

impl NoiseRealization {
    pub fn zeros(n_antennas: usize, frame_len: usize) -> Self {
        Self { z: Mat::zeros(n_antennas, frame_len) }
    }

    /// `vec(Z)`.
    pub fn stacked(&self) -> Vec<c64> {
        stack_columns(&self.z)
    }
}

pub fn gen_noise<R: Rng + ?Sized>(n_antennas: usize, frame_len: usize, rng: &mut R) -> NoiseRealization {
    NoiseRealization { z: gaussian_matrix(n_antennas, frame_len, rng) }
}

/// One received frame: `Y` and its column stacking `vec(Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub y_mat: Mat<c64>,
    pub y_vec: Vec<c64>,
}

fn stack_columns(m: &Mat<c64>) -> Vec<c64> {
    (0..m.ncols()).flat_map(|j| m.col_as_slice(j).iter().copied()).collect()
}

fn check(what: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<(), TxError> {
    if expected == got {
        Ok(())
    } else {
        Err(TxError::Dimension {
            what,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        })
    }
}

/// `Y = sqrt(rho0) * sum_{n in I} h_n (P_n s_n)^T + Z`.
pub fn transmit(
    cfg: &SystemConfig,
    channel: &ChannelState,
    precoders: &PrecoderBank,
    messages: &MessageFrame,
    noise: &NoiseRealization,
) -> Result<ReceivedFrame, TxError> {
    let (m, n, t, d) = (cfg.n_antennas, cfg.n_online, cfg.frame_len, cfg.msg_len);
    check("channel", (m, n), (channel.h.nrows(), channel.h.ncols()))?;
    check("precoder count", (n, 1), (precoders.len(), 1))?;
    for p in &precoders.precoders {
        check("precoder", (t, d), (p.nrows(), p.ncols()))?;
    }
    check("messages", (n, d), (messages.n_users(), messages.msg_len()))?;
    check("noise", (m, t), (noise.z.nrows(), noise.z.ncols()))?;

    let active = &messages.active_set;
    let mut x = Mat::<c64>::zeros(t, active.len());
    let mut h_active = Mat::<c64>::zeros(m, active.len());
    for (k, &user) in active.iter().enumerate() {
        mat_vec_into(precoders.get(user).as_ref(), &messages.symbols[user], x.col_as_slice_mut(k));
        h_active.col_as_slice_mut(k).copy_from_slice(channel.user_slice(user));
    }
    let mut y = noise.z.clone();
    if !active.is_empty() {
        matmul(
            y.as_mut(),
            Accum::Add,
            h_active.as_ref(),
            x.transpose(),
            c64::new(cfg.rho0().sqrt(), 0.0),
            Par::Seq,
        );
    }
    let y_vec = stack_columns(&y);
    Ok(ReceivedFrame { y_mat: y, y_vec })
}
