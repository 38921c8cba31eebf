//! Fixtures shared by the benchmarks: one fully drawn trial at a given size.

use uplink_core::experiments::{preset, Figure, Scale};
use uplink_core::rng::{StreamRole, TrialSeeds};
use uplink_core::txchain::{gen_channel, gen_messages, gen_noise, gen_precoders, transmit};
use uplink_core::{ChannelState, MessageFrame, PrecoderBank, SystemConfig};
use uplink_core::c64;

/// Everything a receiver-side benchmark needs, drawn from trial 0.
pub struct Fixture {
    pub cfg: SystemConfig,
    pub channel: ChannelState,
    pub precoders: PrecoderBank,
    pub messages: MessageFrame,
    pub y: Vec<c64>,
}

impl Fixture {
    pub fn draw(cfg: SystemConfig) -> Self {
        let seeds = TrialSeeds::new(cfg.seed, 0);
        let channel = gen_channel(cfg.n_antennas, cfg.n_online, &mut seeds.stream(StreamRole::Channel));
        let precoders = gen_precoders(&cfg, &mut seeds.stream(StreamRole::Precoder)).expect("precoders");
        let messages = gen_messages(&cfg, &mut seeds.stream(StreamRole::Messages));
        let noise = gen_noise(cfg.n_antennas, cfg.frame_len, &mut seeds.stream(StreamRole::Noise));
        let y = transmit(&cfg, &channel, &precoders, &messages, &noise).expect("transmit").y_vec;
        Self { cfg, channel, precoders, messages, y }
    }
}

/// The fig1 `K = 35`, `N_a = 24` point at 10 dB.
pub fn fig1_config(scale: Scale) -> SystemConfig {
    let mut cfg = preset(Figure::Fig1, scale)
        .curve("bomp_k35_na24")
        .expect("fig1 curve")
        .spec
        .base
        .clone();
    cfg.es_n0_db = 10.0;
    cfg
}
