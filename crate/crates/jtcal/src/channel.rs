//! Reciprocal fading channels with block-fading time evolution and noisy
//! channel estimation.
//!
//! Each cell-to-UE link is one complex matrix per subcarrier, rows indexing
//! UE receive antennas and columns indexing cell transmit antennas. The
//! uplink is the plain (unconjugated) transpose of the downlink, which is
//! the TDD reciprocity assumption everything downstream builds on.
//!
//! Fading is either a single flat Rayleigh tap or the standard EPA
//! power-delay profile. EPA tap delays are quantized to the 10 MHz sample
//! grid (100 ns) so the per-subcarrier response is an exact DFT of the tap
//! vector; taps that land on the same grid point merge their powers. Time
//! evolution is per-tap first-order Gauss-Markov with one-step correlation
//! `rho = J0(2 pi f_d T)` from the Jakes spectrum, which keeps per-entry
//! power stationary at the tap power.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::numerics::CMatrix;
use crate::{Error, Result};

/// Fading profile for one cell-UE link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingProfile {
    /// Single Rayleigh tap, frequency-flat.
    FlatRayleigh,
    /// EPA power-delay profile on the 10 MHz sample grid.
    EpaTapped,
}

/// Static description of the propagation setup, shared by both cells.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    /// Transmit antennas per cell.
    pub n_tx_per_cell: usize,
    /// UE receive antennas.
    pub n_rx_ue: usize,
    pub fading: FadingProfile,
    /// Maximum Doppler shift in Hz. Zero freezes the channel.
    pub doppler_hz: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Subcarriers carried per snapshot (1 is enough for flat fading).
    pub n_subcarriers: usize,
    /// Time between successive snapshots, in seconds.
    pub sample_interval_s: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            n_tx_per_cell: 4,
            n_rx_ue: 2,
            fading: FadingProfile::FlatRayleigh,
            doppler_hz: doppler_from_speed(3.0, 2.0e9),
            carrier_hz: 2.0e9,
            n_subcarriers: 1,
            sample_interval_s: 0.010,
        }
    }
}

impl ChannelConfig {
    /// EPA fading over 64 subcarriers, otherwise the default pedestrian setup.
    pub fn epa() -> Self {
        ChannelConfig {
            fading: FadingProfile::EpaTapped,
            n_subcarriers: 64,
            ..ChannelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx_per_cell == 0 || self.n_tx_per_cell > 8 {
            return Err(Error::InvalidConfig(format!(
                "n_tx_per_cell must be 1..=8, got {}",
                self.n_tx_per_cell
            )));
        }
        if self.n_rx_ue == 0 || self.n_rx_ue > 8 {
            return Err(Error::InvalidConfig(format!(
                "n_rx_ue must be 1..=8, got {}",
                self.n_rx_ue
            )));
        }
        if self.doppler_hz.is_nan() || self.doppler_hz < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "doppler_hz must be >= 0, got {}",
                self.doppler_hz
            )));
        }
        if self.sample_interval_s.is_nan() || self.sample_interval_s <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sample_interval_s must be > 0, got {}",
                self.sample_interval_s
            )));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidConfig("n_subcarriers must be >= 1".into()));
        }
        if self.fading == FadingProfile::EpaTapped {
            let max_idx = epa_taps().last().map(|t| t.0).unwrap_or(0);
            if self.n_subcarriers <= max_idx {
                return Err(Error::InvalidConfig(format!(
                    "EPA needs n_subcarriers > {max_idx}, got {}",
                    self.n_subcarriers
                )));
            }
        }
        Ok(())
    }
}

/// Maximum Doppler shift for a UE speed in km/h at the given carrier.
/// Uses c = 3e8 m/s: 3 km/h at 2 GHz gives 5.556 Hz.
pub fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64) -> f64 {
    const C_M_S: f64 = 3.0e8;
    (speed_kmh / 3.6) * carrier_hz / C_M_S
}

// EPA power-delay profile and the sample grid it is quantized to.
const EPA_DELAYS_NS: [f64; 7] = [0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0];
const EPA_POWERS_DB: [f64; 7] = [0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8];
const EPA_SAMPLE_RATE_HZ: f64 = 10.0e6;

/// EPA taps on the sample grid: (delay index, linear power), powers
/// normalized to sum to one. Colliding delays merge.
fn epa_taps() -> Vec<(usize, f64)> {
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for (d_ns, p_db) in EPA_DELAYS_NS.iter().zip(EPA_POWERS_DB.iter()) {
        let idx = (d_ns * 1e-9 * EPA_SAMPLE_RATE_HZ).round() as usize;
        *merged.entry(idx).or_insert(0.0) += 10f64.powf(p_db / 10.0);
    }
    let total: f64 = merged.values().sum();
    merged.into_iter().map(|(i, p)| (i, p / total)).collect()
}

#[derive(Debug, Clone)]
struct Tap {
    delay_idx: usize,
    power: f64,
    gains: CMatrix,
}

/// Time-evolving channel for one cell-UE link.
///
/// The full trajectory is a pure function of `(config, seed)`: identical
/// inputs reproduce bit-identical matrices. A state must not be evolved
/// concurrently from two threads; clone it instead.
#[derive(Debug, Clone)]
pub struct ChannelState {
    n_rx: usize,
    n_tx: usize,
    n_subcarriers: usize,
    rho: f64,
    taps: Vec<Tap>,
    h_dl: Vec<CMatrix>,
    time_index: u64,
    rng: ChaCha8Rng,
}

impl ChannelState {
    /// Draws the initial tap gains and builds the per-subcarrier response.
    ///
    /// Panics if the config is invalid; validate configs at the scenario
    /// boundary first.
    pub fn init(cfg: &ChannelConfig, seed: u64) -> Self {
        cfg.validate().expect("channel config must be valid");
        let profile = match cfg.fading {
            FadingProfile::FlatRayleigh => vec![(0usize, 1.0f64)],
            FadingProfile::EpaTapped => epa_taps(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let taps: Vec<Tap> = profile
            .into_iter()
            .map(|(delay_idx, power)| Tap {
                delay_idx,
                power,
                gains: CMatrix::from_fn(cfg.n_rx_ue, cfg.n_tx_per_cell, |_, _| {
                    draw_cn(&mut rng, power)
                }),
            })
            .collect();
        let h_dl = frequency_response(&taps, cfg.n_rx_ue, cfg.n_tx_per_cell, cfg.n_subcarriers);
        let rho = bessel_j0(2.0 * PI * cfg.doppler_hz * cfg.sample_interval_s);
        ChannelState {
            n_rx: cfg.n_rx_ue,
            n_tx: cfg.n_tx_per_cell,
            n_subcarriers: cfg.n_subcarriers,
            rho,
            taps,
            h_dl,
            time_index: 0,
            rng,
        }
    }

    /// Advances one sample interval: `g' = rho g + sqrt(1 - rho^2) w` per
    /// tap entry, with innovation variance matched to the tap power. A
    /// frozen channel (rho == 1) is left bit-identical.
    pub fn evolve(&mut self) {
        self.time_index += 1;
        if self.rho >= 1.0 {
            return;
        }
        let innov = (1.0 - self.rho * self.rho).sqrt();
        let rho = self.rho;
        for tap in &mut self.taps {
            let power = tap.power;
            let gains = tap.gains.clone();
            tap.gains = CMatrix::from_fn(self.n_rx, self.n_tx, |i, j| {
                gains.get(i, j) * rho + draw_cn(&mut self.rng, power) * innov
            });
        }
        self.h_dl = frequency_response(&self.taps, self.n_rx, self.n_tx, self.n_subcarriers);
    }

    /// Downlink matrices, one per subcarrier (UE rx rows, cell tx columns).
    pub fn downlink(&self) -> &[CMatrix] {
        &self.h_dl
    }

    /// Uplink matrices: the structural transpose of the downlink, per
    /// subcarrier. No conjugation anywhere.
    pub fn uplink_view(&self) -> Vec<CMatrix> {
        self.h_dl.iter().map(CMatrix::transpose).collect()
    }

    /// Snapshots taken since init.
    pub fn time_index(&self) -> u64 {
        self.time_index
    }

    /// One-step Gauss-Markov correlation in use.
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn frequency_response(
    taps: &[Tap],
    n_rx: usize,
    n_tx: usize,
    n_subcarriers: usize,
) -> Vec<CMatrix> {
    (0..n_subcarriers)
        .map(|k| {
            CMatrix::from_fn(n_rx, n_tx, |i, j| {
                taps.iter()
                    .map(|t| {
                        let phase = -2.0 * PI * (k * t.delay_idx) as f64 / n_subcarriers as f64;
                        t.gains.get(i, j) * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
        })
        .collect()
}

/// Circularly symmetric complex Gaussian with total variance `var`.
pub(crate) fn draw_cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Adds i.i.d. complex Gaussian estimation error with per-entry variance
/// `10^(-snr_db/10)` (relative to unit channel power). `snr_db = +inf` is
/// the noiseless sentinel and returns the input unchanged without touching
/// the generator.
pub fn observe_with_noise(h: &CMatrix, snr_db: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    if snr_db == f64::INFINITY {
        return h.clone();
    }
    let var = 10f64.powf(-snr_db / 10.0);
    CMatrix::from_fn(h.rows(), h.cols(), |i, j| h.get(i, j) + draw_cn(rng, var))
}

/// Bessel function of the first kind, order zero.
///
/// Power series below |x| = 12, Abramowitz-Stegun asymptotic form above;
/// ample accuracy for Doppler correlations.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 12.0 {
        let q = 0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=60u32 {
            term *= -q / ((k * k) as f64);
            sum += term;
        }
        sum
    } else {
        let z = 3.0 / ax;
        let f0 = 0.79788456
            + z * (-0.00000077
                + z * (-0.00552740
                    + z * (-0.00009512 + z * (0.00137237 + z * (-0.00072805 + z * 0.00014476)))));
        let t0 = ax - FRAC_PI_4
            + z * (-0.04166397
                + z * (-0.00003954
                    + z * (0.00262573 + z * (-0.00054125 + z * (-0.00029333 + z * 0.00013558)))));
        f0 * t0.cos() / ax.sqrt()
    }
}
