//! The block sensing operator `B = [B_1, ..., B_N]`, `B_n = (P_n ⊗ h_n) / sqrt(M)`.
//!
//! `B` has `M T` rows and `N d` columns but is never stored. Products use the
//! identity `vec(A X C) = (C^T ⊗ A) vec(X)`: with `R` the `M x T` reshaping of
//! an `M T`-vector `r`,
//!
//! * `B_n s_n = vec(h_n (P_n s_n)^T) / sqrt(M)`
//! * `B_n^H r = P_n^H (R^T conj(h_n)) / sqrt(M)`
//! * `B_i^H B_j = (P_i^H P_j) (h_i^H h_j) / M`

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use thiserror::Error;

use crate::linalg::{adjoint_product, adjoint_vec_into, c64, inner, mat_vec_into, ONE, ZERO};
use crate::txchain::{ChannelState, PrecoderBank};

/// Largest `(M T) * (N d)` the dense oracle will materialize.
pub const DENSE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("block index {index} out of range for {n_blocks} blocks")]
    BlockIndex { index: usize, n_blocks: usize },
    #[error("channel has {channel} users but {precoders} precoders were given")]
    UserCount { channel: usize, precoders: usize },
    #[error("dense materialization of {rows}x{cols} exceeds {DENSE_LIMIT} entries")]
    TooLarge { rows: usize, cols: usize },
}

/// Matrix-free view of `B` over a channel and a precoder bank.
#[derive(Debug, Clone, Copy)]
pub struct BlockOperator<'a> {
    channel: &'a ChannelState,
    precoders: &'a PrecoderBank,
    rho0: f64,
}

impl<'a> BlockOperator<'a> {
    pub fn new(
        channel: &'a ChannelState,
        precoders: &'a PrecoderBank,
        rho0: f64,
    ) -> Result<Self, OperatorError> {
        if channel.n_users() != precoders.len() {
            return Err(OperatorError::UserCount {
                channel: channel.n_users(),
                precoders: precoders.len(),
            });
        }
        Ok(Self { channel, precoders, rho0 })
    }

    pub fn channel(&self) -> &'a ChannelState {
        self.channel
    }

    pub fn precoders(&self) -> &'a PrecoderBank {
        self.precoders
    }

    pub fn n_antennas(&self) -> usize {
        self.channel.n_antennas()
    }

    pub fn frame_len(&self) -> usize {
        self.precoders.frame_len()
    }

    pub fn block_len(&self) -> usize {
        self.precoders.msg_len()
    }

    pub fn n_blocks(&self) -> usize {
        self.channel.n_users()
    }

    /// `M T`.
    pub fn rows(&self) -> usize {
        self.n_antennas() * self.frame_len()
    }

    /// `N d`.
    pub fn cols(&self) -> usize {
        self.n_blocks() * self.block_len()
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    /// Model gain `sqrt(rho0 M)` in `y = sqrt(rho0 M) B s + z`.
    pub fn scale(&self) -> f64 {
        (self.rho0 * self.n_antennas() as f64).sqrt()
    }

    fn check_block(&self, n: usize) -> Result<(), OperatorError> {
        if n < self.n_blocks() {
            Ok(())
        } else {
            Err(OperatorError::BlockIndex { index: n, n_blocks: self.n_blocks() })
        }
    }

    fn check_len(expected: usize, got: usize) -> Result<(), OperatorError> {
        if expected == got {
            Ok(())
        } else {
            Err(OperatorError::Length { expected, got })
        }
    }

    /// `B s` for a full `N d`-vector (no model gain).
    pub fn apply(&self, s: &[c64]) -> Result<Vec<c64>, OperatorError> {
        Self::check_len(self.cols(), s.len())?;
        let d = self.block_len();
        let blocks: Vec<usize> = (0..self.n_blocks())
            .filter(|&n| s[n * d..(n + 1) * d].iter().any(|v| v.norm_sqr() > 0.0))
            .collect();
        let coeffs: Vec<c64> = blocks
            .iter()
            .flat_map(|&n| s[n * d..(n + 1) * d].iter().copied())
            .collect();
        self.apply_blocks(&blocks, &coeffs)
    }

    /// `B_S s_S` where `coeffs` stacks the `d`-blocks for `blocks` in order.
    pub fn apply_blocks(&self, blocks: &[usize], coeffs: &[c64]) -> Result<Vec<c64>, OperatorError> {
        let (m, t, d) = (self.n_antennas(), self.frame_len(), self.block_len());
        Self::check_len(blocks.len() * d, coeffs.len())?;
        for &n in blocks {
            self.check_block(n)?;
        }
        let mut y = vec![ZERO; m * t];
        if blocks.is_empty() {
            return Ok(y);
        }
        let mut x = Mat::<c64>::zeros(t, blocks.len());
        let mut h = Mat::<c64>::zeros(m, blocks.len());
        for (k, &n) in blocks.iter().enumerate() {
            mat_vec_into(self.precoders.get(n).as_ref(), &coeffs[k * d..(k + 1) * d], x.col_as_slice_mut(k));
            h.col_as_slice_mut(k).copy_from_slice(self.channel.user_slice(n));
        }
        let dst = faer::MatMut::from_column_major_slice_mut(&mut y, m, t);
        let inv_sqrt_m = c64::new(1.0 / (m as f64).sqrt(), 0.0);
        matmul(dst, Accum::Replace, h.as_ref(), x.transpose(), inv_sqrt_m, Par::Seq);
        Ok(y)
    }

    fn reshape<'r>(&self, r: &'r [c64]) -> MatRef<'r, c64> {
        MatRef::from_column_major_slice(r, self.n_antennas(), self.frame_len())
    }

    /// `B_n^H r`.
    pub fn adjoint_block(&self, n: usize, r: &[c64]) -> Result<Vec<c64>, OperatorError> {
        self.check_block(n)?;
        Self::check_len(self.rows(), r.len())?;
        let (m, t) = (self.n_antennas(), self.frame_len());
        let h = self.channel.user_slice(n);
        let w: Vec<c64> = (0..t).map(|ti| inner(h, &r[ti * m..(ti + 1) * m])).collect();
        let mut out = vec![ZERO; self.block_len()];
        adjoint_vec_into(self.precoders.get(n).as_ref(), &w, &mut out);
        let inv_sqrt_m = 1.0 / (m as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= inv_sqrt_m);
        Ok(out)
    }

    /// `B_n^H r` for every block at once, as the columns of a `d x N` matrix.
    pub fn adjoint_all(&self, r: &[c64]) -> Result<Mat<c64>, OperatorError> {
        Self::check_len(self.rows(), r.len())?;
        let (m, t, d, n_blocks) = (self.n_antennas(), self.frame_len(), self.block_len(), self.n_blocks());
        // V = R^T conj(H), column n is the time-domain matched filter of user n
        let mut v = Mat::<c64>::zeros(t, n_blocks);
        matmul(
            v.as_mut(),
            Accum::Replace,
            self.reshape(r).transpose(),
            self.channel.h.as_ref().conjugate(),
            ONE,
            Par::Seq,
        );
        let mut out = Mat::<c64>::zeros(d, n_blocks);
        let inv_sqrt_m = 1.0 / (m as f64).sqrt();
        for n in 0..n_blocks {
            adjoint_vec_into(self.precoders.get(n).as_ref(), v.col_as_slice(n), out.col_as_slice_mut(n));
            out.col_as_slice_mut(n).iter_mut().for_each(|x| *x *= inv_sqrt_m);
        }
        Ok(out)
    }

    /// `h_i^H h_j / M`.
    pub fn channel_correlation(&self, i: usize, j: usize) -> c64 {
        inner(self.channel.user_slice(i), self.channel.user_slice(j)) / self.n_antennas() as f64
    }

    /// `B_i^H B_j = (P_i^H P_j)(h_i^H h_j) / M`, a `d x d` matrix.
    pub fn cross_gram(&self, i: usize, j: usize) -> Result<Mat<c64>, OperatorError> {
        self.check_block(i)?;
        self.check_block(j)?;
        let c = self.channel_correlation(i, j);
        let mut g = adjoint_product(self.precoders.get(i).as_ref(), self.precoders.get(j).as_ref());
        for col in 0..g.ncols() {
            g.col_as_slice_mut(col).iter_mut().for_each(|x| *x *= c);
        }
        Ok(g)
    }

    /// `B_S^H B_n`, stacked over the blocks of `support` (`|S| d x d`).
    pub fn cross_gram_column(&self, support: &[usize], n: usize) -> Result<Mat<c64>, OperatorError> {
        self.check_block(n)?;
        let (t, d) = (self.frame_len(), self.block_len());
        let mut stacked = Mat::<c64>::zeros(t, support.len() * d);
        for (k, &i) in support.iter().enumerate() {
            self.check_block(i)?;
            stacked
                .as_mut()
                .submatrix_mut(0, k * d, t, d)
                .copy_from(self.precoders.get(i).as_ref());
        }
        let mut out = adjoint_product(stacked.as_ref(), self.precoders.get(n).as_ref());
        for (k, &i) in support.iter().enumerate() {
            let c = self.channel_correlation(i, n);
            let mut rows = out.as_mut().submatrix_mut(k * d, 0, d, d);
            for col in 0..d {
                for row in 0..d {
                    rows[(row, col)] *= c;
                }
            }
        }
        Ok(out)
    }

    /// Explicit `M T x N d` matrix, for small instances and as a test oracle.
    pub fn dense(&self) -> Result<Mat<c64>, OperatorError> {
        let (rows, cols) = (self.rows(), self.cols());
        if rows * cols > DENSE_LIMIT {
            return Err(OperatorError::TooLarge { rows, cols });
        }
        let (m, d) = (self.n_antennas(), self.block_len());
        let inv_sqrt_m = 1.0 / (m as f64).sqrt();
        // row = m + M t, col = k + d n  (Kronecker ordering of P_n ⊗ h_n)
        Ok(Mat::from_fn(rows, cols, |row, col| {
            let (n, k) = (col / d, col % d);
            let (mi, ti) = (row % m, row / m);
            self.precoders.get(n)[(ti, k)] * self.channel.h[(mi, n)] * inv_sqrt_m
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PrecoderKind, SystemConfig};
    use crate::linalg::mat_vec;
    use crate::rng::{stream, StreamRole};
    use crate::txchain::{gen_channel, gen_precoders};

    fn tiny(kind: PrecoderKind, seed: u64) -> (ChannelState, PrecoderBank) {
        let cfg = SystemConfig {
            n_online: 4,
            n_active: 1,
            n_antennas: 2,
            frame_len: 6,
            msg_len: 2,
            bomp_iters: 1,
            es_n0_db: 3.0,
            precoder_kind: kind,
            fer_bit_threshold: 8,
            seed,
            msg_lens: None,
        };
        (
            gen_channel(2, 4, &mut stream(seed, 0, StreamRole::Channel)),
            gen_precoders(&cfg, &mut stream(seed, 0, StreamRole::Precoder)).unwrap(),
        )
    }

    fn random_vec(len: usize, seed: u64) -> Vec<c64> {
        let mut rng = stream(seed, 1, StreamRole::Noise);
        (0..len).map(|_| crate::linalg::complex_gaussian(&mut rng)).collect()
    }

    #[test]
    fn zero_in_zero_out() {
        let (ch, pb) = tiny(PrecoderKind::OrthonormalColumns, 1);
        let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
        assert!(op.apply(&[ZERO; 8]).unwrap().iter().all(|v| *v == ZERO));
        assert!(op.adjoint_block(2, &[ZERO; 12]).unwrap().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn single_block_is_outer_product() {
        let (ch, pb) = tiny(PrecoderKind::NormalizedGaussian, 2);
        let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
        let mut s = vec![ZERO; 8];
        s[4] = c64::new(0.5, -1.0);
        s[5] = c64::new(2.0, 0.25);
        let y = op.apply(&s).unwrap();
        let x = mat_vec(pb.get(2).as_ref(), &s[4..6]);
        for ti in 0..6 {
            for mi in 0..2 {
                let want = ch.h[(mi, 2)] * x[ti] / 2f64.sqrt();
                assert!((y[mi + 2 * ti] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..10 {
            let (ch, pb) = tiny(PrecoderKind::NormalizedGaussian, seed);
            let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
            let b = op.dense().unwrap();
            let s = random_vec(8, seed);
            let want = mat_vec(b.as_ref(), &s);
            let got = op.apply(&s).unwrap();
            for (a, w) in got.iter().zip(&want) {
                assert!((a - w).norm() < 1e-12);
            }
            let r = random_vec(12, seed + 100);
            let all = op.adjoint_all(&r).unwrap();
            for n in 0..4 {
                let bn = b.as_ref().submatrix(0, 2 * n, 12, 2);
                let mut want = vec![ZERO; 2];
                adjoint_vec_into(bn, &r, &mut want);
                let got = op.adjoint_block(n, &r).unwrap();
                for k in 0..2 {
                    assert!((got[k] - want[k]).norm() < 1e-12);
                    assert!((all[(k, n)] - want[k]).norm() < 1e-12);
                }
                for j in 0..4 {
                    let bj = b.as_ref().submatrix(0, 2 * j, 12, 2);
                    let dense = adjoint_product(bn, bj);
                    let closed = op.cross_gram(n, j).unwrap();
                    assert!((dense - closed).norm_l2() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cross_gram_column_stacks_pairs() {
        let (ch, pb) = tiny(PrecoderKind::NormalizedGaussian, 3);
        let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
        let col = op.cross_gram_column(&[3, 0], 1).unwrap();
        assert_eq!((col.nrows(), col.ncols()), (4, 2));
        let g30 = op.cross_gram(3, 1).unwrap();
        let g00 = op.cross_gram(0, 1).unwrap();
        assert!((col.as_ref().submatrix(0, 0, 2, 2) - g30).norm_l2() < 1e-14);
        assert!((col.as_ref().submatrix(2, 0, 2, 2) - g00).norm_l2() < 1e-14);
    }

    #[test]
    fn orthonormal_self_gram_scales_by_channel_energy() {
        let (ch, pb) = tiny(PrecoderKind::OrthonormalColumns, 4);
        let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
        let s = random_vec(2, 9);
        let mut full = vec![ZERO; 8];
        full[2..4].copy_from_slice(&s);
        let back = op.adjoint_block(1, &op.apply(&full).unwrap()).unwrap();
        let energy = ch.user_slice(1).iter().map(|v| v.norm_sqr()).sum::<f64>() / 2.0;
        for k in 0..2 {
            assert!((back[k] - s[k] * energy).norm() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let (ch, pb) = tiny(PrecoderKind::OrthonormalColumns, 5);
        let op = BlockOperator::new(&ch, &pb, 1.0).unwrap();
        assert!(matches!(op.apply(&[ZERO; 3]), Err(OperatorError::Length { .. })));
        assert!(matches!(
            op.adjoint_block(4, &[ZERO; 12]),
            Err(OperatorError::BlockIndex { index: 4, n_blocks: 4 })
        ));
    }
}
