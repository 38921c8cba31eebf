use faer::{ColRef, Mat};
use rand::Rng;

use crate::linalg::{c64, gaussian_matrix};

/// Perfectly known `M x N` channel; column `n` is user `n`'s vector `h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub h: Mat<c64>,
}

impl ChannelState {
    pub fn n_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    pub fn user(&self, n: usize) -> ColRef<'_, c64> {
        self.h.col(n)
    }

    pub fn user_slice(&self, n: usize) -> &[c64] {
        self.h.col_as_slice(n)
    }
}

/// Draws an `M x N` matrix of i.i.d. `CN(0, 1)` channel coefficients.
pub fn gen_channel<R: Rng + ?Sized>(n_antennas: usize, n_users: usize, rng: &mut R) -> ChannelState {
    ChannelState { h: gaussian_matrix(n_antennas, n_users, rng) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};

    #[test]
    fn shapes() {
        let mut rng = stream(1, 0, StreamRole::Channel);
        let ch = gen_channel(8, 80, &mut rng);
        assert_eq!((ch.n_antennas(), ch.n_users()), (8, 80));
        let ch = gen_channel(1, 1, &mut rng);
        assert_eq!((ch.h.nrows(), ch.h.ncols()), (1, 1));
    }

    #[test]
    fn entries_are_standard_complex_gaussian() {
        let mut rng = stream(2, 0, StreamRole::Channel);
        let ch = gen_channel(100, 1000, &mut rng);
        let n = 100_000.0;
        let mean: c64 = (0..1000).flat_map(|j| ch.user_slice(j).iter()).sum::<c64>() / n;
        let var = (0..1000)
            .flat_map(|j| ch.user_slice(j).iter())
            .map(|x| (x - mean).norm_sqr())
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.norm() < 0.01, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "variance {var}");
    }

    #[test]
    fn same_stream_same_channel() {
        let a = gen_channel(4, 6, &mut stream(3, 9, StreamRole::Channel));
        let b = gen_channel(4, 6, &mut stream(3, 9, StreamRole::Channel));
        assert_eq!(a, b);
    }
}
