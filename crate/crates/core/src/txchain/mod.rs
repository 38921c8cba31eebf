//! Transmit side: channels, precoders, QPSK messages and the received-signal model.

mod channel;
mod message;
mod precoder;
pub mod qpsk;
mod transmit;

pub use channel::{gen_channel, ChannelState};
pub use message::{gen_messages, MessageFrame};
pub use precoder::{gen_precoders, PrecoderBank};
pub use qpsk::{demodulate_qpsk, modulate_qpsk, QpskError};
pub use transmit::{gen_noise, transmit, NoiseRealization, ReceivedFrame};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TxError {
    #[error("precoder for user {user} stayed rank deficient after {attempts} draws")]
    RankDeficientPrecoder { user: usize, attempts: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error(transparent)]
    Qpsk(#[from] QpskError),
}
