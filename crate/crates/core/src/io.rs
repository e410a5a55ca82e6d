//! Artifact writers. All output is built in memory with plain `Display`
//! formatting (shortest round-trip representation for floats) and written in
//! one call, so identical inputs always produce byte-identical files.
//! Nothing here embeds timestamps, hostnames, or other run-local state.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::bench::{GainScan, Scenario, SweepCurve};
use crate::error::Result;
use crate::estimator::{Estimates, SpectrumGrid};

/// Spectrum samples, row-major over the direction axis. Direction-only
/// spectra carry NaN in the range column.
pub fn write_spectrum_csv(path: &Path, spectrum: &SpectrumGrid) -> Result<()> {
    let mut out = String::from("u,r,p\n");
    for (iu, u) in spectrum.direction_axis().iter().enumerate() {
        for (ir, r) in spectrum.range_axis().iter().enumerate() {
            writeln!(out, "{u},{r},{}", spectrum.value(iu, ir)).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// RMSE-vs-SNR rows. Direction-only modes have no range error; the column
/// holds NaN so every row keeps the same shape.
pub fn write_sweep_csv(path: &Path, curve: &SweepCurve) -> Result<()> {
    let mut out = String::from("snr_db,mode,rmse_theta_deg,rmse_range_m,n_trials\n");
    for row in &curve.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.snr_db,
            row.mode,
            row.rmse_theta_deg,
            row.rmse_range_m.unwrap_or(f64::NAN),
            row.n_trials
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Gain-scan samples, one row per `(subcarrier, direction)` pair.
pub fn write_gain_csv(path: &Path, scan: &GainScan) -> Result<()> {
    let mut out = String::from("m,f_hz,u,gain\n");
    for row in &scan.rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.subcarrier, row.frequency_hz, row.direction_sine, row.gain
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Peak records, flattened across modes: one JSON object per estimate with
/// `u`, `r` (null for direction-only modes), `value`, `mode`, and the
/// mode-level `degraded` flag.
pub fn write_estimates_json(path: &Path, estimates: &[Estimates]) -> Result<()> {
    let records: Vec<_> = estimates
        .iter()
        .flat_map(|set| {
            set.peaks.iter().map(|p| {
                json!({
                    "mode": set.mode,
                    "u": p.direction_sine,
                    "r": p.range_m,
                    "value": p.value,
                    "degraded": set.degraded,
                })
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Run manifest: the full scenario plus the library version, enough to
/// reproduce the run bit for bit.
pub fn write_manifest_json(path: &Path, scenario: &Scenario) -> Result<()> {
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
