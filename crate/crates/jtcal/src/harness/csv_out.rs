//! CSV emission for experiments, sweeps, and link-gain tables.
//!
//! Floats are written through the standard shortest-roundtrip formatter,
//! so equal inputs always produce byte-identical files.
//!
//! Calibration layout: one row per run and feedback round
//! (`run,frame,estimate_rad,error_rad,votes_0..`) with cumulative vote
//! counts, followed by two trailer rows with `run = -1` carrying the
//! batch summary: trailer frame 0 holds `success_fraction`,
//! `mean_abs_error`, and the error histogram binned to the hypothesis
//! grid in the vote columns; trailer frame 1 holds `error_variance` and
//! `max_abs_error` with zeroed vote columns. Sweep files prepend
//! `axis,value` and keep only the trailer rows per point.

use std::io::Write;

use super::{ExperimentResult, Scenario, SweepAxis, SweepPoint};
use crate::link_eval::LinkGainRow;
use crate::rf_error::wrap_phase;
use crate::Result;

fn votes_header(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        s.push_str(",votes_");
        s.push_str(&i.to_string());
    }
    s
}

fn counts_cells(counts: &[u64]) -> String {
    let mut s = String::new();
    for c in counts {
        s.push(',');
        s.push_str(&c.to_string());
    }
    s
}

fn summary_lines(prefix: &str, result: &ExperimentResult, n_hypotheses: usize) -> String {
    let s = &result.summary;
    let mut out = String::new();
    out.push_str(&format!(
        "{prefix}-1,0,{},{}{}\n",
        s.success_fraction,
        s.mean_abs_error,
        counts_cells(&s.error_hist),
    ));
    out.push_str(&format!(
        "{prefix}-1,1,{},{}{}\n",
        s.error_variance,
        s.max_abs_error,
        counts_cells(&vec![0u64; n_hypotheses]),
    ));
    out
}

/// Writes one experiment. With `summary_only` the per-round rows are
/// dropped and only the two trailer rows remain.
pub fn write_calibrate_csv<W: Write>(
    w: &mut W,
    scenario: &Scenario,
    result: &ExperimentResult,
    summary_only: bool,
) -> Result<()> {
    writeln!(
        w,
        "run,frame,estimate_rad,error_rad{}",
        votes_header(scenario.n_hypotheses)
    )?;
    if !summary_only {
        for (run, trace) in result.traces.iter().enumerate() {
            for (round, (est, counts)) in trace
                .running_estimates
                .iter()
                .zip(&trace.histogram_frames)
                .enumerate()
            {
                let err = wrap_phase(est - scenario.delta_phase_true);
                writeln!(w, "{run},{},{est},{err}{}", round + 1, counts_cells(counts))?;
            }
        }
    }
    w.write_all(summary_lines("", result, scenario.n_hypotheses).as_bytes())?;
    Ok(())
}

/// Writes a sweep: per swept value, the two trailer rows prefixed with
/// the axis name and value.
pub fn write_sweep_csv<W: Write>(
    w: &mut W,
    base: &Scenario,
    axis: SweepAxis,
    points: &[SweepPoint],
) -> Result<()> {
    writeln!(
        w,
        "axis,value,run,frame,estimate_rad,error_rad{}",
        votes_header(base.n_hypotheses)
    )?;
    for point in points {
        let prefix = format!("{axis},{},", point.value);
        w.write_all(summary_lines(&prefix, &point.result, base.n_hypotheses).as_bytes())?;
    }
    Ok(())
}

/// Writes a link-gain table. Fixed-error rows carry their phase; the
/// uniform-random-error row leaves the phase cell empty.
pub fn write_linkgain_csv<W: Write>(w: &mut W, rows: &[LinkGainRow]) -> Result<()> {
    writeln!(w, "case,phase_rad,mean_rx_power,gain_db")?;
    for row in rows {
        match row.phase {
            Some(p) => writeln!(w, "fixed,{p},{},{}", row.mean_rx_power, row.gain_db)?,
            None => writeln!(w, "uniform,,{},{}", row.mean_rx_power, row.gain_db)?,
        }
    }
    Ok(())
}
