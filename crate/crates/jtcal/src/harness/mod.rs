//! Experiment orchestration: scenario configuration, seeded Monte Carlo
//! batches over independent runs, parameter sweeps, and summaries.

pub mod config;
pub mod csv_out;

use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::calibrator::{CalibrationSession, CalibrationTrace, HypothesisGrid};
use crate::channel::ChannelConfig;
use crate::codebook::{codebook_for, Codebook, CodebookFamily, CombineMode};
use crate::rf_error::wrap_phase;
use crate::{Error, Result};

/// An estimate counts as a success when its wrapped error is inside this
/// band (an eighth-turn, padded by a few ulps so exact grid hits never
/// fall out through rounding).
pub const SUCCESS_TOL_RAD: f64 = PI / 8.0 + 1e-9;

/// Full description of one calibration experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Per-cell fading; both cells draw from this configuration with
    /// independent seeds.
    pub channel: ChannelConfig,
    pub combine_mode: CombineMode,
    /// Reference-signal ports each cell exposes; must divide the
    /// physical antenna count.
    pub ports_per_cell: usize,
    pub codebook: CodebookFamily,
    /// Report-side observation SNR in dB (`+inf` disables noise).
    pub snr_db: f64,
    /// Sounding-side SNR in dB; defaults to `snr_db` when absent.
    pub srs_snr_db: Option<f64>,
    /// True inter-cell phase offset to be estimated.
    pub delta_phase_true: f64,
    /// True inter-cell amplitude ratio.
    pub delta_amp_true: f64,
    /// Feedback rounds accumulated per run.
    pub period_frames: usize,
    pub n_hypotheses: usize,
    pub n_runs: usize,
    /// Run `k` is seeded with `base_seed + k`.
    pub base_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::epa(),
            combine_mode: CombineMode::SummedPorts,
            ports_per_cell: 4,
            codebook: CodebookFamily::Rel8,
            snr_db: 5.0,
            srs_snr_db: None,
            delta_phase_true: 0.75 * PI,
            delta_amp_true: 1.0,
            period_frames: 10,
            n_hypotheses: 16,
            n_runs: 200,
            base_seed: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.ports_per_cell == 0 {
            return bad("ports_per_cell must be positive".into());
        }
        if !self.channel.n_tx_per_cell.is_multiple_of(self.ports_per_cell) {
            return bad(format!(
                "{} ports do not evenly group {} antennas",
                self.ports_per_cell, self.channel.n_tx_per_cell
            ));
        }
        if self.period_frames == 0 {
            return bad("period_frames must be at least 1".into());
        }
        if self.n_hypotheses < 2 {
            return bad("n_hypotheses must be at least 2".into());
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if !(self.delta_amp_true.is_finite() && self.delta_amp_true > 0.0) {
            return bad("delta_amp_true must be positive and finite".into());
        }
        if !self.delta_phase_true.is_finite() {
            return bad("delta_phase_true must be finite".into());
        }
        if self.snr_db.is_nan() {
            return bad("snr_db must not be NaN".into());
        }
        if self.srs_snr_db.is_some_and(f64::is_nan) {
            return bad("srs_snr_db must not be NaN".into());
        }
        self.codebook()?;
        Ok(())
    }

    /// Ports of the combined downlink the UE searches over.
    pub fn combined_ports(&self) -> usize {
        match self.combine_mode {
            CombineMode::SummedPorts => self.ports_per_cell,
            CombineMode::ConcatenatedPorts => 2 * self.ports_per_cell,
        }
    }

    pub fn codebook(&self) -> Result<Codebook> {
        codebook_for(self.codebook, self.combined_ports())
    }

    pub fn srs_snr(&self) -> f64 {
        self.srs_snr_db.unwrap_or(self.snr_db)
    }
}

/// Aggregate statistics over the runs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub n_runs: usize,
    /// Fraction of runs with `|wrapped_error| <= SUCCESS_TOL_RAD`.
    pub success_fraction: f64,
    pub mean_abs_error: f64,
    /// Population variance of the wrapped error.
    pub error_variance: f64,
    pub max_abs_error: f64,
    /// Wrapped errors binned to the nearest hypothesis-grid phase.
    pub error_hist: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub traces: Vec<CalibrationTrace>,
    pub summary: ExperimentSummary,
}

fn summarize(traces: &[CalibrationTrace], grid: &HypothesisGrid) -> ExperimentSummary {
    let n = traces.len();
    let errors: Vec<f64> = traces.iter().map(|t| t.wrapped_error).collect();
    let successes = errors.iter().filter(|e| e.abs() <= SUCCESS_TOL_RAD).count();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let variance = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
    let mut hist = vec![0u64; grid.len()];
    for e in &errors {
        hist[grid.nearest_index(*e)] += 1;
    }
    ExperimentSummary {
        n_runs: n,
        success_fraction: successes as f64 / n as f64,
        mean_abs_error: errors.iter().map(|e| e.abs()).sum::<f64>() / n as f64,
        error_variance: variance,
        max_abs_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
        error_hist: hist,
    }
}

/// Runs `scenario.n_runs` independent seeded runs in parallel. Results
/// are ordered by run index, so output is reproducible regardless of
/// thread scheduling.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentResult> {
    let session = CalibrationSession::new(scenario)?;
    let traces: Vec<CalibrationTrace> = (0..scenario.n_runs)
        .into_par_iter()
        .map(|k| session.run(scenario.base_seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    let summary = summarize(&traces, session.grid());
    Ok(ExperimentResult { traces, summary })
}

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Period,
    Snr,
    Ports,
    TruePhase,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Period => "period",
            SweepAxis::Snr => "snr",
            SweepAxis::Ports => "ports",
            SweepAxis::TruePhase => "phase",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "period" => Ok(SweepAxis::Period),
            "snr" => Ok(SweepAxis::Snr),
            "ports" => Ok(SweepAxis::Ports),
            "phase" | "true-phase" => Ok(SweepAxis::TruePhase),
            other => Err(Error::BadValue(format!(
                "unknown sweep axis '{other}' (expected period, snr, ports, or phase)"
            ))),
        }
    }
}

fn as_positive_count(value: f64, what: &str) -> Result<usize> {
    if value.fract() != 0.0 || !(1.0..=1e6).contains(&value) {
        return Err(Error::BadValue(format!(
            "{what} must be a positive integer, got {value}"
        )));
    }
    Ok(value as usize)
}

/// Copy of `base` with one axis set to `value`.
pub fn apply_axis(base: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario> {
    let mut sc = base.clone();
    match axis {
        SweepAxis::Period => sc.period_frames = as_positive_count(value, "period")?,
        SweepAxis::Snr => {
            if value.is_nan() {
                return Err(Error::BadValue("snr must not be NaN".into()));
            }
            sc.snr_db = value;
        }
        SweepAxis::Ports => sc.ports_per_cell = as_positive_count(value, "ports")?,
        SweepAxis::TruePhase => {
            if !value.is_finite() {
                return Err(Error::BadValue("phase must be finite".into()));
            }
            sc.delta_phase_true = wrap_phase(value);
        }
    }
    Ok(sc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

/// Runs one experiment per value along the axis.
pub fn run_sweep(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    values
        .iter()
        .map(|&value| {
            let sc = apply_axis(base, axis, value)?;
            Ok(SweepPoint {
                value,
                result: run_experiment(&sc)?,
            })
        })
        .collect()
}
