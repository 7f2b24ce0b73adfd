//! Transmit/receive RF-chain reciprocity errors and the inter-cell residual
//! they leave behind.
//!
//! The propagation channel itself is reciprocal; the eNB's analog chains are
//! not. Per antenna, the downlink picks up the transmit-chain gain and the
//! uplink the receive-chain gain, so the effective downlink is the effective
//! uplink transposed times a diagonal correction `C = B_rx^-1 B_tx`.
//! Intra-cell calibration equalizes the per-antenna ratios inside one cell,
//! collapsing `C` to a scalar `A e^{j theta}` per cell. What joint
//! transmission between two cells then cares about is only the pairwise
//! residual: the amplitude ratio `A2/A1` and the wrapped phase difference
//! `theta2 - theta1`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::numerics::CMatrix;
use crate::{Error, Result};

/// Wraps an angle into `(-pi, pi]`. `pi` maps to `pi`, `-pi` to `pi`.
pub fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil()
}

/// Per-antenna complex gains of one eNB's transmit and receive chains.
#[derive(Debug, Clone)]
pub struct RfChainSpec {
    tx_gains: Vec<Complex64>,
    rx_gains: Vec<Complex64>,
}

impl RfChainSpec {
    /// Validates equal lengths and strictly nonzero gains on both sides.
    pub fn new(tx_gains: Vec<Complex64>, rx_gains: Vec<Complex64>) -> Result<Self> {
        if tx_gains.is_empty() || tx_gains.len() != rx_gains.len() {
            return Err(Error::InvalidConfig(format!(
                "rf chain needs matching nonempty gain lists, got {} tx / {} rx",
                tx_gains.len(),
                rx_gains.len()
            )));
        }
        for (index, g) in tx_gains.iter().chain(rx_gains.iter()).enumerate() {
            if g.norm() == 0.0 {
                return Err(Error::ZeroGain {
                    index: index % tx_gains.len(),
                });
            }
        }
        Ok(RfChainSpec { tx_gains, rx_gains })
    }

    /// Ideal chains: unit gain everywhere.
    pub fn ideal(n_antennas: usize) -> Self {
        let ones = vec![Complex64::new(1.0, 0.0); n_antennas];
        RfChainSpec::new(ones.clone(), ones).expect("unit gains are valid")
    }

    pub fn n_antennas(&self) -> usize {
        self.tx_gains.len()
    }

    pub fn tx_gains(&self) -> &[Complex64] {
        &self.tx_gains
    }

    pub fn rx_gains(&self) -> &[Complex64] {
        &self.rx_gains
    }

    /// Diagonal of `B_rx^-1 B_tx`: per-antenna ratio tx/rx.
    pub fn reciprocity_diag(&self) -> Vec<Complex64> {
        self.tx_gains
            .iter()
            .zip(&self.rx_gains)
            .map(|(t, r)| t / r)
            .collect()
    }
}

/// Applies transmit-chain gains to a downlink matrix: column `i` (transmit
/// antenna `i`) is scaled by `tx_gains[i]`.
pub fn apply_tx_error(h_dl: &CMatrix, spec: &RfChainSpec) -> CMatrix {
    assert_eq!(
        h_dl.cols(),
        spec.n_antennas(),
        "downlink has {} tx columns but chain has {} antennas",
        h_dl.cols(),
        spec.n_antennas()
    );
    CMatrix::from_fn(h_dl.rows(), h_dl.cols(), |i, j| {
        h_dl.get(i, j) * spec.tx_gains[j]
    })
}

/// Applies receive-chain gains to an uplink matrix: row `i` (receive
/// antenna `i` at the eNB) is scaled by `rx_gains[i]`.
pub fn apply_rx_error(h_ul: &CMatrix, spec: &RfChainSpec) -> CMatrix {
    assert_eq!(
        h_ul.rows(),
        spec.n_antennas(),
        "uplink has {} rx rows but chain has {} antennas",
        h_ul.rows(),
        spec.n_antennas()
    );
    CMatrix::from_fn(h_ul.rows(), h_ul.cols(), |i, j| {
        h_ul.get(i, j) * spec.rx_gains[i]
    })
}

/// One cell's reciprocity error after intra-cell calibration: a common
/// scalar `A e^{j theta}` across its antennas.
///
/// Constructors enforce the scalar (uniform-diagonal) form, so a value of
/// this type always represents a cell the estimator's assumptions hold for.
#[derive(Debug, Clone)]
pub struct CellRfError {
    c_diag: Vec<Complex64>,
    residual_amp: f64,
    residual_phase: f64,
}

/// Relative spread above which per-antenna ratios no longer count as one
/// common scalar.
const UNIFORMITY_REL_TOL: f64 = 1e-9;

impl CellRfError {
    /// Directly injects a residual `A e^{j theta}` on `n_antennas` chains.
    /// Panics unless `amp > 0`; the phase is wrapped into `(-pi, pi]`.
    pub fn from_residual(amp: f64, phase: f64, n_antennas: usize) -> Self {
        assert!(
            amp > 0.0 && amp.is_finite(),
            "residual amplitude must be positive"
        );
        assert!(n_antennas > 0, "cell needs at least one antenna");
        let phase = wrap_phase(phase);
        CellRfError {
            c_diag: vec![Complex64::from_polar(amp, phase); n_antennas],
            residual_amp: amp,
            residual_phase: phase,
        }
    }

    /// Derives the residual from full chain gains. Fails if the per-antenna
    /// ratios are not one common scalar, i.e. the cell was not intra-cell
    /// calibrated.
    pub fn from_chain(spec: &RfChainSpec) -> Result<Self> {
        let diag = spec.reciprocity_diag();
        let first = diag[0];
        let spread = diag
            .iter()
            .map(|c| (c - first).norm() / first.norm())
            .fold(0.0, f64::max);
        if spread > UNIFORMITY_REL_TOL {
            return Err(Error::NonUniformReciprocity { spread });
        }
        Ok(CellRfError {
            residual_amp: first.norm(),
            residual_phase: first.arg(),
            c_diag: diag,
        })
    }

    pub fn c_diag(&self) -> &[Complex64] {
        &self.c_diag
    }

    pub fn residual_amp(&self) -> f64 {
        self.residual_amp
    }

    pub fn residual_phase(&self) -> f64 {
        self.residual_phase
    }

    /// The residual as one complex scalar.
    pub fn as_scalar(&self) -> Complex64 {
        Complex64::from_polar(self.residual_amp, self.residual_phase)
    }
}

/// Inter-cell residual between two calibrated cells: what is left for
/// over-the-air calibration to estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CjtError {
    /// Amplitude ratio A2/A1.
    pub delta_amp: f64,
    /// Phase difference theta2 - theta1, wrapped into `(-pi, pi]`.
    pub delta_phase: f64,
}

impl CjtError {
    pub fn identity() -> Self {
        CjtError {
            delta_amp: 1.0,
            delta_phase: 0.0,
        }
    }

    pub fn new(delta_amp: f64, delta_phase: f64) -> Self {
        assert!(delta_amp > 0.0 && delta_amp.is_finite());
        CjtError {
            delta_amp,
            delta_phase: wrap_phase(delta_phase),
        }
    }

    /// The residual as a complex scalar `dA e^{j d_theta}`.
    pub fn as_complex(&self) -> Complex64 {
        Complex64::from_polar(self.delta_amp, self.delta_phase)
    }

    /// Multiplying the second cell's weights by this cancels the residual.
    pub fn compensation(&self) -> Complex64 {
        Complex64::from_polar(1.0 / self.delta_amp, -self.delta_phase)
    }
}

/// Pairwise residual between two cells' scalar errors.
pub fn cjt_from_cells(c1: &CellRfError, c2: &CellRfError) -> CjtError {
    CjtError {
        delta_amp: c2.residual_amp() / c1.residual_amp(),
        delta_phase: wrap_phase(c2.residual_phase() - c1.residual_phase()),
    }
}
