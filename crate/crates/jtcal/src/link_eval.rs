//! Joint-transmission link evaluation: what a residual inter-cell error
//! costs in received power.
//!
//! Both cells beamform toward a single-antenna UE with matched-filter
//! weights built from their uplink estimates; the second cell's weight
//! additionally carries the inverse of the estimated inter-cell residual.
//! When that estimate is exact, the two cells' signals add coherently and
//! the received amplitude is the first cell's residual magnitude times
//! the sum of the per-cell channel norms. A leftover phase error `phi`
//! scales the power of an equal-norm pair by `(1 + cos phi) / 2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::channel::draw_cn;
use crate::numerics::CMatrix;
use crate::rf_error::CjtError;
use crate::{Error, Result};

/// Per-cell transmit weights, one column per cell.
#[derive(Debug, Clone)]
pub struct JtWeights {
    pub w1: CMatrix,
    pub w2: CMatrix,
}

/// Matched-filter weights from uplink estimates (columns, one entry per
/// transmit antenna): each weight is the conjugated, normalized uplink,
/// and the second cell's weight is rotated and scaled by the inverse of
/// `applied`, the inter-cell residual the transmitter believes in.
pub fn mrt_weights(h1_ul: &CMatrix, h2_ul: &CMatrix, applied: &CjtError) -> Result<JtWeights> {
    assert_eq!(h1_ul.cols(), 1, "uplink estimate must be a column vector");
    assert_eq!(h2_ul.cols(), 1, "uplink estimate must be a column vector");
    let n1 = h1_ul.fro_norm();
    let n2 = h2_ul.fro_norm();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroNormChannel);
    }
    Ok(JtWeights {
        w1: h1_ul.conj().scale(Complex64::new(1.0 / n1, 0.0)),
        w2: h2_ul
            .conj()
            .scale(applied.compensation() * Complex64::new(1.0 / n2, 0.0)),
    })
}

/// Received sample at the single-antenna UE: both cells transmit `x`
/// through their weights over their true downlinks (rows), plus noise.
pub fn received_signal(
    h1_dl: &CMatrix,
    h2_dl: &CMatrix,
    weights: &JtWeights,
    x: Complex64,
    noise: Complex64,
) -> Complex64 {
    assert_eq!(h1_dl.rows(), 1, "downlink to a single-antenna UE is a row");
    assert_eq!(h2_dl.rows(), 1, "downlink to a single-antenna UE is a row");
    let s1 = h1_dl.matmul(&weights.w1).get(0, 0);
    let s2 = h2_dl.matmul(&weights.w2).get(0, 0);
    (s1 + s2) * x + noise
}

/// Relative received power of an equal-norm coherent pair whose second
/// branch is off by `phi`: `(1 + cos phi) / 2`, i.e. 1 at `phi = 0` and
/// 0 at `phi = pi`.
pub fn coherent_gain(phi: f64) -> f64 {
    (1.0 + phi.cos()) / 2.0
}

/// Fading model for the link sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkChannel {
    /// i.i.d. complex Gaussian uplinks with `n_tx` antennas per cell.
    Rayleigh { n_tx: usize },
    /// Deterministic unit scalar per cell; isolates the phase-error law.
    UnitScalar,
}

#[derive(Debug, Clone, Copy)]
pub struct LinkSweepConfig {
    pub channel: LinkChannel,
    pub n_draws: usize,
    pub seed: u64,
}

/// One row of the sweep: `phase = None` marks the uniform-random-error
/// reference row. `gain_db` is relative to a perfectly compensated link
/// over the same channel draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGainRow {
    pub phase: Option<f64>,
    pub mean_rx_power: f64,
    pub gain_db: f64,
}

fn draw_column(channel: LinkChannel, rng: &mut ChaCha8Rng) -> CMatrix {
    match channel {
        LinkChannel::Rayleigh { n_tx } => {
            CMatrix::column_vector((0..n_tx).map(|_| draw_cn(rng, 1.0)).collect())
        }
        LinkChannel::UnitScalar => CMatrix::column_vector(vec![Complex64::new(1.0, 0.0)]),
    }
}

/// Mean received power over `n_draws` channel realizations when the
/// applied inter-cell phase is off by `err` (`None`: uniform random error
/// per draw, drawn from `err_rng`).
fn mean_power(cfg: &LinkSweepConfig, err: Option<f64>, err_rng: &mut ChaCha8Rng) -> Result<f64> {
    // Re-seeding per row pairs the channel draws across rows, so gain
    // ratios are free of channel sampling noise.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = 0.0;
    for _ in 0..cfg.n_draws {
        let h1_ul = draw_column(cfg.channel, &mut rng);
        let h2_ul = draw_column(cfg.channel, &mut rng);
        let theta1 = rng.gen_range(-PI..PI);
        let delta_true = rng.gen_range(-PI..PI);
        let c1 = Complex64::from_polar(1.0, theta1);
        let cjt_true = CjtError::new(1.0, delta_true);
        let phase_err = match err {
            Some(e) => e,
            None => err_rng.gen_range(-PI..PI),
        };
        let applied = CjtError::new(1.0, delta_true - phase_err);
        let weights = mrt_weights(&h1_ul, &h2_ul, &applied)?;
        let h1_dl = h1_ul.transpose().scale(c1);
        let h2_dl = h2_ul.transpose().scale(c1 * cjt_true.as_complex());
        let r = received_signal(
            &h1_dl,
            &h2_dl,
            &weights,
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        acc += r.norm_sqr();
    }
    Ok(acc / cfg.n_draws as f64)
}

/// Sweeps residual phase errors and appends a uniform-random-error row.
/// Powers are relative to the zero-error reference on identical draws.
pub fn evaluate_residual_sweep(
    cfg: &LinkSweepConfig,
    phase_errors: &[f64],
) -> Result<Vec<LinkGainRow>> {
    if cfg.n_draws == 0 {
        return Err(Error::InvalidConfig("link sweep needs n_draws > 0".into()));
    }
    let mut err_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let p0 = mean_power(cfg, Some(0.0), &mut err_rng)?;
    let mut rows = Vec::with_capacity(phase_errors.len() + 1);
    for &phi in phase_errors {
        let p = mean_power(cfg, Some(phi), &mut err_rng)?;
        rows.push(LinkGainRow {
            phase: Some(phi),
            mean_rx_power: p,
            gain_db: 10.0 * (p / p0).log10(),
        });
    }
    let p_uniform = mean_power(cfg, None, &mut err_rng)?;
    rows.push(LinkGainRow {
        phase: None,
        mean_rx_power: p_uniform,
        gain_db: 10.0 * (p_uniform / p0).log10(),
    });
    Ok(rows)
}
