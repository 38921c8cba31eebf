//! Seeded Monte Carlo harness: single trials, SER/FER/throughput metrics,
//! one-dimensional sweeps and the figure presets.

mod metrics;
mod preset;
mod sweep;
mod trial;

use thiserror::Error;

pub use metrics::{compute_fer, compute_ser, normalized_throughput, wilson_interval};
pub use preset::{preset, Curve, Figure, Preset, Scale};
pub use sweep::{
    run_point, run_sweep, run_sweep_with, Axis, AxisValue, SweepRow, SweepSpec, SweepTable, CSV_HEADER,
};
pub use trial::{run_trial, Detector, TrialOutcome};

use crate::bomp::RecoveryError;
use crate::config::{ConfigError, LoadError};
use crate::guarantees::GuaranteeError;
use crate::operator::OperatorError;
use crate::txchain::TxError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("sweep point {value}: {source}")]
    InvalidPoint { value: String, source: ConfigError },
    #[error("value {value} is not valid on the {axis} axis")]
    InvalidAxisValue { axis: Axis, value: String },
    #[error("sweep has no values")]
    EmptySweep,
    #[error("unknown figure `{0}` (expected fig1, fig2, fig3 or fig4)")]
    UnknownFigure(String),
    #[error("unknown scale `{0}` (expected full or desk)")]
    UnknownScale(String),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Guarantee(#[from] GuaranteeError),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Parse(String),
}
