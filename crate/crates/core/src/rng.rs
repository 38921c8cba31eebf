//! Deterministic random streams.
//!
//! Every random draw in a trial comes from a stream keyed by
//! `(master seed, trial index, role)`. Streams for different keys are
//! statistically independent, so trials can run in any order on any number of
//! workers and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all simulation streams.
pub type SimRng = ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Channel,
    Precoder,
    Messages,
    Noise,
    GenieSupport,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Channel => 1,
            StreamRole::Precoder => 2,
            StreamRole::Messages => 3,
            StreamRole::Noise => 4,
            StreamRole::GenieSupport => 5,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `role` in trial `trial` of the experiment seeded with `seed`.
pub fn stream(seed: u64, trial: u64, role: StreamRole) -> SimRng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    let mut state = a ^ trial.wrapping_mul(0xd1b5_4a32_d192_ed03);
    let b = splitmix64(&mut state);
    let mut state = b ^ role.tag().wrapping_mul(0x8cb9_2ba7_2f3d_8dd7);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(role.tag());
    rng
}

/// The four per-trial streams of the forward model plus the genie baseline's.
#[derive(Debug, Clone, Copy)]
pub struct TrialSeeds {
    pub seed: u64,
    pub trial: u64,
}

impl TrialSeeds {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn stream(&self, role: StreamRole) -> SimRng {
        stream(self.seed, self.trial, role)
    }
}
