//! FLOP accounting for dense, sparse and asynchronous runs, and the
//! box-counting fractal dimension of active-site patterns.

mod flops;
mod fractal;
mod ledger;
mod trace;

pub use flops::*;
pub use fractal::{default_radii, fractal_dimension, fractal_dimension_mean, sig9, ActiveMask, FractalEstimate, DEFAULT_RADII};
pub use ledger::{analytic_dense_ledger, ledger_for_run, FlopLedger, LedgerRow};
pub use trace::{LayerTrace, Mode};

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trace covers {got} layers, network has {expected}")]
    IncompleteTrace { expected: usize, got: usize },
    #[error("trace entry for layer {0} is missing or does not match the network")]
    IncompleteLayer(usize),
    #[error("ledgers differ in mode or layer count")]
    LedgerMismatch,
    #[error("need at least 2 radii with non-zero counts, got {0}")]
    TooFewRadii(usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
