//! Grant-free uplink transmission of small packets in massive MIMO.
//!
//! Users block-precode their short messages in time, the base station sees a
//! block-sparse superposition and recovers who transmitted and what with
//! block orthogonal matching pursuit (BOMP). The crate contains the forward
//! model, the matrix-free block operator, BOMP with incremental least
//! squares, coherence-based recovery guarantees, and a seeded Monte Carlo
//! harness for SER/FER/throughput sweeps.

pub mod bomp;
pub mod config;
pub mod experiments;
pub mod guarantees;
pub mod linalg;
pub mod operator;
pub mod rng;
pub mod txchain;

pub use bomp::{bomp, decide_messages, genie_ls, BompParams, RecoveryError, RecoveryResult};
pub use config::{ConfigError, LoadError, PrecoderKind, SystemConfig};
pub use guarantees::{
    block_coherence, check_theorem1, info_bits_lower, sub_coherence, tau_of_noise, theorem2_rhs,
    CoherenceReport, GuaranteeError, GuaranteeVerdict, InfoBoundReport,
};
pub use experiments::{
    preset, run_sweep, run_trial, Detector, ExperimentError, Figure, Scale, SweepSpec, SweepTable, TrialOutcome,
};
pub use linalg::c64;
pub use operator::{BlockOperator, OperatorError};
pub use txchain::{ChannelState, MessageFrame, PrecoderBank, ReceivedFrame};
