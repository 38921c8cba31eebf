use rand::seq::index;
use rand::Rng;

use super::qpsk::modulate_qpsk;
use crate::config::SystemConfig;
use crate::linalg::c64;

/// Symbols of every online user for one frame.
///
/// `symbols[n]` always has length `d`; inactive users send all zeros and
/// shorter messages are zero-padded. `bits[k]` belongs to `active_set[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageFrame {
    pub symbols: Vec<Vec<c64>>,
    pub active_set: Vec<usize>,
    pub bits: Vec<Vec<u8>>,
}

impl MessageFrame {
    pub fn n_users(&self) -> usize {
        self.symbols.len()
    }

    pub fn msg_len(&self) -> usize {
        self.symbols.first().map_or(0, Vec::len)
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.active_set.binary_search(&n).is_ok()
    }

    /// Transmitted bits of user `n`, `None` when inactive.
    pub fn bits_of(&self, n: usize) -> Option<&[u8]> {
        self.active_set
            .binary_search(&n)
            .ok()
            .map(|k| self.bits[k].as_slice())
    }

    /// Column-stacked signal vector `s = [s_1; ...; s_N]` of length `N d`.
    pub fn stacked(&self) -> Vec<c64> {
        self.symbols.iter().flatten().copied().collect()
    }
}

/// Picks `N_a` active users uniformly without replacement and gives each a
/// uniformly random QPSK message.
pub fn gen_messages<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> MessageFrame {
    let d = cfg.msg_len;
    let mut active_set = index::sample(rng, cfg.n_online, cfg.n_active).into_vec();
    active_set.sort_unstable();

    let mut symbols = vec![vec![c64::new(0.0, 0.0); d]; cfg.n_online];
    let bits = active_set
        .iter()
        .map(|&n| {
            let len = cfg.user_msg_len(n);
            let bits: Vec<u8> = (0..2 * len).map(|_| u8::from(rng.random::<bool>())).collect();
            let syms = modulate_qpsk(&bits).expect("even bit count");
            symbols[n][..len].copy_from_slice(&syms);
            bits
        })
        .collect();
    MessageFrame { symbols, active_set, bits }
}
