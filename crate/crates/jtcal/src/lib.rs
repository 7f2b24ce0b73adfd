//! Link-level simulation of inter-cell antenna reciprocity error and its
//! over-the-air calibration in TDD joint transmission.
//!
//! Two cells jointly serve one UE. Each cell's RF chains leave a residual
//! scalar error after per-cell (intra-cell) calibration, so the pair is off
//! by one amplitude ratio and one phase difference. The phase difference is
//! what breaks coherent joint transmission, and the estimator here recovers
//! it from standard PMI feedback alone: the eNB sweeps a grid of phase
//! hypotheses over its own uplink sounding estimates, replays the UE's PMI
//! selection for each, and votes for hypotheses that reproduce the PMI the
//! UE actually reported.
//!
//! Module map:
//!
//! * [`numerics`] - small dense complex-matrix kernel (everything is <= 8x8)
//! * [`channel`] - reciprocal fading channels, Jakes time correlation, noisy
//!   channel estimation
//! * [`rf_error`] - per-chain reciprocity errors and the inter-cell residual
//! * [`codebook`] - rank-1 precoding codebooks, PMI selection, port combining
//! * [`calibrator`] - hypothesis grid, vote histogram, per-frame estimation loop
//! * [`link_eval`] - MRT joint transmission and coherent-combining gain
//! * [`harness`] - scenarios, Monte Carlo experiments, sweeps, CSV output

pub mod calibrator;
pub mod channel;
pub mod codebook;
pub mod harness;
pub mod link_eval;
pub mod numerics;
pub mod rf_error;

pub use calibrator::{run_calibration, CalibrationTrace};
pub use harness::{run_experiment, run_sweep, Scenario};
pub use numerics::CMatrix;

/// Crate-wide error type. Programming errors (shape mismatches, invalid
/// indices) panic instead; these variants cover data-dependent failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid value: {0}")]
    BadValue(String),

    #[error("rf chain gain at antenna {index} is zero")]
    ZeroGain { index: usize },

    #[error(
        "per-antenna reciprocity ratios are not a common scalar (relative spread {spread:.3e})"
    )]
    NonUniformReciprocity { spread: f64 },

    #[error("no {family:?} codebook for {n_ports} ports")]
    UnsupportedCodebook {
        family: codebook::CodebookFamily,
        n_ports: usize,
    },

    #[error("phase estimate requested before any sample was voted")]
    EmptyHistogram,

    #[error("zero-norm channel cannot be beamformed")]
    ZeroNormChannel,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
