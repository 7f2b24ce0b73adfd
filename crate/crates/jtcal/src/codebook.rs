//! Rank-1 precoding codebooks, PMI selection, and the two ways a pair of
//! cells' reference-signal ports are seen at the UE.
//!
//! The UE cannot tell the two cells' ports apart when they share CRS
//! resources, so the combined channel is either the elementwise sum of the
//! per-cell matrices (shared ports) or their column concatenation (disjoint
//! ports). PMI selection maximizes receive power of the rank-1 codeword
//! over the combined channel, summing the metric across subcarriers when
//! the channel is frequency-selective, and breaks ties toward the lowest
//! codeword index.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::numerics::CMatrix;
use crate::{Error, Result};

/// Concrete codebook tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookId {
    /// LTE Release 8 two-port rank-1 table (4 entries).
    Rel8TwoTx,
    /// LTE Release 8 four-port rank-1 table (16 Householder-derived entries).
    Rel8FourTx,
    /// Columns of the n-point DFT matrix.
    Dft,
}

/// Codebook families selectable from configuration; the port count picks
/// the concrete table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookFamily {
    Rel8,
    Dft,
}

/// How the two cells' ports appear in the combined downlink at the UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Cells reuse the same ports; their matrices add elementwise.
    SummedPorts,
    /// Cells use disjoint ports; their matrices concatenate columnwise.
    ConcatenatedPorts,
}

/// Precoding matrix indicator: an index into a codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pmi(pub usize);

/// A rank-1 codebook: unit-norm column vectors over `n_ports` ports.
#[derive(Debug, Clone)]
pub struct Codebook {
    id: CodebookId,
    n_ports: usize,
    vectors: Vec<CMatrix>,
}

impl Codebook {
    pub fn id(&self) -> CodebookId {
        self.id
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Codeword `k` as an `n_ports x 1` column.
    pub fn vector(&self, k: usize) -> &CMatrix {
        &self.vectors[k]
    }
}

/// Builds a codebook for the given port count.
///
/// The Release 8 tables exist only for 2 and 4 ports; the DFT codebook
/// covers any port count of at least 2.
pub fn build_codebook(id: CodebookId, n_ports: usize) -> Result<Codebook> {
    let vectors = match (id, n_ports) {
        (CodebookId::Rel8TwoTx, 2) => rel8_two_tx(),
        (CodebookId::Rel8FourTx, 4) => rel8_four_tx(),
        (CodebookId::Dft, n) if n >= 2 => dft_columns(n),
        _ => {
            return Err(Error::UnsupportedCodebook {
                family: match id {
                    CodebookId::Dft => CodebookFamily::Dft,
                    _ => CodebookFamily::Rel8,
                },
                n_ports,
            })
        }
    };
    Ok(Codebook {
        id,
        n_ports,
        vectors,
    })
}

/// Resolves a family plus port count to a concrete codebook.
pub fn codebook_for(family: CodebookFamily, n_ports: usize) -> Result<Codebook> {
    match (family, n_ports) {
        (CodebookFamily::Rel8, 2) => build_codebook(CodebookId::Rel8TwoTx, 2),
        (CodebookFamily::Rel8, 4) => build_codebook(CodebookId::Rel8FourTx, 4),
        (CodebookFamily::Rel8, n) => Err(Error::UnsupportedCodebook { family, n_ports: n }),
        (CodebookFamily::Dft, n) => build_codebook(CodebookId::Dft, n),
    }
}

fn rel8_two_tx() -> Vec<CMatrix> {
    let s = FRAC_1_SQRT_2;
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
    ]
    .iter()
    .map(|&second| CMatrix::column_vector(vec![Complex64::new(s, 0.0), second * s]))
    .collect()
}

/// Generator vectors u_n for the Release 8 four-antenna table. Every entry
/// has unit modulus, so u^H u = 4 for all of them.
fn rel8_four_tx_generators() -> Vec<[Complex64; 4]> {
    let one = Complex64::new(1.0, 0.0);
    let m1 = Complex64::new(-1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mj = Complex64::new(0.0, -1.0);
    let d = |re: f64, im: f64| Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
    vec![
        [one, m1, m1, m1],
        [one, mj, one, j],
        [one, one, m1, one],
        [one, j, one, mj],
        [one, d(-1.0, -1.0), mj, d(1.0, -1.0)],
        [one, d(1.0, -1.0), j, d(-1.0, -1.0)],
        [one, d(1.0, 1.0), mj, d(-1.0, 1.0)],
        [one, d(-1.0, 1.0), j, d(1.0, 1.0)],
        [one, m1, one, one],
        [one, mj, m1, mj],
        [one, one, one, m1],
        [one, j, m1, j],
        [one, m1, m1, one],
        [one, m1, one, m1],
        [one, one, m1, m1],
        [one, one, one, one],
    ]
}

/// First column of the Householder reflection `I - 2 u u^H / (u^H u)`.
fn householder_first_column(u: &[Complex64]) -> CMatrix {
    let norm_sq: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let scale = 2.0 * u[0].conj() / norm_sq;
    CMatrix::column_vector(
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                let e = if i == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                e - ui * scale
            })
            .collect(),
    )
}

fn rel8_four_tx() -> Vec<CMatrix> {
    rel8_four_tx_generators()
        .iter()
        .map(|u| householder_first_column(u))
        .collect()
}

fn dft_columns(n: usize) -> Vec<CMatrix> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            CMatrix::column_vector(
                (0..n)
                    .map(|m| Complex64::from_polar(scale, 2.0 * PI * (k * m) as f64 / n as f64))
                    .collect(),
            )
        })
        .collect()
}

/// Receive power `||h w||^2` of one codeword on one subcarrier.
fn rx_power(h: &CMatrix, w: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..h.rows() {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..h.cols() {
            s += h.get(i, j) * w.get(j, 0);
        }
        acc += s.norm_sqr();
    }
    acc
}

/// PMI for a single combined channel matrix.
pub fn select_pmi(h_eff: &CMatrix, cb: &Codebook) -> Pmi {
    select_pmi_wideband(std::slice::from_ref(h_eff), cb)
}

/// PMI maximizing receive power summed across subcarriers. Ties go to the
/// lowest codeword index; the argmax is invariant to any common nonzero
/// scalar on the channel.
pub fn select_pmi_wideband(h_effs: &[CMatrix], cb: &Codebook) -> Pmi {
    assert!(
        !h_effs.is_empty(),
        "PMI selection needs at least one subcarrier"
    );
    for h in h_effs {
        assert_eq!(
            h.cols(),
            cb.n_ports(),
            "channel has {} ports but codebook expects {}",
            h.cols(),
            cb.n_ports()
        );
    }
    let mut best = 0usize;
    let mut best_metric = f64::NEG_INFINITY;
    for k in 0..cb.len() {
        let w = cb.vector(k);
        let metric: f64 = h_effs.iter().map(|h| rx_power(h, w)).sum();
        if metric > best_metric {
            best_metric = metric;
            best = k;
        }
    }
    Pmi(best)
}

/// Combines the two cells' matrices as the UE sees them.
pub fn combine_channels(h1: &CMatrix, h2: &CMatrix, mode: CombineMode) -> CMatrix {
    match mode {
        CombineMode::SummedPorts => h1.add(h2),
        CombineMode::ConcatenatedPorts => h1.hcat(h2),
    }
}

/// Maps physical transmit antennas (columns) onto `n_ports` CRS ports by
/// summing adjacent columns in equal groups, scaled by 1/sqrt(group size)
/// to keep per-port power comparable.
///
/// Panics unless `n_ports` divides the column count. With `n_ports` equal
/// to the column count this is the identity.
pub fn port_virtualize(h: &CMatrix, n_ports: usize) -> CMatrix {
    assert!(n_ports > 0, "need at least one port");
    assert_eq!(
        h.cols() % n_ports,
        0,
        "{} ports do not evenly group {} antennas",
        n_ports,
        h.cols()
    );
    let group = h.cols() / n_ports;
    let scale = 1.0 / (group as f64).sqrt();
    CMatrix::from_fn(h.rows(), n_ports, |i, p| {
        let mut s = Complex64::new(0.0, 0.0);
        for g in 0..group {
            s += h.get(i, p * group + g);
        }
        s * scale
    })
}
