//! The five spectrum variants, registered by name.
//!
//! All variants share the projection power `q_m = ‖ā_m^H (W̃ U_m^N)‖²` over
//! the workspace's collection operator `W̃` (the noise-whitened combiner in
//! the production pipeline) and differ only in the steering vector `ā_m`
//! scored against subcarrier `m`:
//!
//! | name       | ā_m                                  | range axis |
//! |------------|--------------------------------------|------------|
//! | `proposed` | `a(u, r, f_m)` via the transform     | yes        |
//! | `nf-cal`   | `a(ū_m, r̄_m, f_c)` (genie locations) | yes        |
//! | `nf-nocal` | `a(u, r, f_c)`                       | yes        |
//! | `ff-cal`   | `a_ff(u, f_m)`                       | no         |
//! | `ff-nocal` | `a_ff(u, f_c)`                       | no         |
//!
//! `proposed` and `nf-cal` score the same quantity through different
//! algebra — the squinted-location steering at the carrier equals the
//! physical steering at `f_m` up to a global phase — so they must agree to
//! rounding; keeping both exercises that identity end to end. The `nocal`
//! variants ignore the subcarrier index in the steering and pay for it with
//! squint-smeared spectra as bandwidth grows.

use crate::array::squint_map;
use crate::error::Result;

use super::{EstimatorMode, HypothesisWorkspace};

/// Registry row describing one mode.
#[derive(Clone, Debug)]
pub struct ModeInfo {
    pub name: &'static str,
    pub label: &'static str,
    pub estimates_range: bool,
}

struct ProposedBsc;

impl EstimatorMode for ProposedBsc {
    fn name(&self) -> &'static str {
        "proposed"
    }

    fn label(&self) -> &'static str {
        "beam-squint-corrected near-field MUSIC"
    }

    fn estimates_range(&self) -> bool {
        true
    }

    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        r: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), workspace.n_subcarriers());
        workspace.set_nearfield(u, r)?;
        workspace.init_recurrence();
        for (m, q) in out.iter_mut().enumerate() {
            if m > 0 {
                workspace.advance();
            }
            workspace.combine();
            *q = workspace.noise_projection(m);
        }
        Ok(())
    }
}

struct NfCalOracle;

impl EstimatorMode for NfCalOracle {
    fn name(&self) -> &'static str {
        "nf-cal"
    }

    fn label(&self) -> &'static str {
        "near-field MUSIC with genie squint calibration"
    }

    fn estimates_range(&self) -> bool {
        true
    }

    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        r: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), workspace.n_subcarriers());
        for (m, q) in out.iter_mut().enumerate() {
            let ratio = workspace.ratio_to_carrier(m);
            // The genie knows where the hypothesis appears at subcarrier m
            // and scores that location's carrier steering. The squinted twin
            // stops being representable at |u| >= 1 (grid endpoints); the
            // physical subcarrier steering is the same vector up to a global
            // phase, so fall back to it there.
            match squint_map(u, r, ratio) {
                Ok(loc) if loc.range_m > 0.0 => {
                    workspace.set_nearfield(loc.direction_sine, loc.range_m)?;
                    workspace.steer_at_ratio(1.0);
                }
                _ => {
                    workspace.set_nearfield(u, r)?;
                    workspace.steer_at_ratio(ratio);
                }
            }
            workspace.combine();
            *q = workspace.noise_projection(m);
        }
        Ok(())
    }
}

struct NfNoCal;

impl EstimatorMode for NfNoCal {
    fn name(&self) -> &'static str {
        "nf-nocal"
    }

    fn label(&self) -> &'static str {
        "near-field MUSIC at the carrier, squint ignored"
    }

    fn estimates_range(&self) -> bool {
        true
    }

    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        r: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), workspace.n_subcarriers());
        workspace.set_nearfield(u, r)?;
        workspace.steer_at_ratio(1.0);
        workspace.combine();
        for (m, q) in out.iter_mut().enumerate() {
            *q = workspace.noise_projection(m);
        }
        Ok(())
    }
}

struct FfCalOracle;

impl EstimatorMode for FfCalOracle {
    fn name(&self) -> &'static str {
        "ff-cal"
    }

    fn label(&self) -> &'static str {
        "far-field MUSIC with per-subcarrier steering"
    }

    fn estimates_range(&self) -> bool {
        false
    }

    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        _r: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), workspace.n_subcarriers());
        workspace.set_farfield(u)?;
        for (m, q) in out.iter_mut().enumerate() {
            let ratio = workspace.ratio_to_carrier(m);
            workspace.steer_at_ratio(ratio);
            workspace.combine();
            *q = workspace.noise_projection(m);
        }
        Ok(())
    }
}

struct FfNoCal;

impl EstimatorMode for FfNoCal {
    fn name(&self) -> &'static str {
        "ff-nocal"
    }

    fn label(&self) -> &'static str {
        "far-field MUSIC at the carrier, squint ignored"
    }

    fn estimates_range(&self) -> bool {
        false
    }

    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        _r: f64,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(out.len(), workspace.n_subcarriers());
        workspace.set_farfield(u)?;
        workspace.steer_at_ratio(1.0);
        workspace.combine();
        for (m, q) in out.iter_mut().enumerate() {
            *q = workspace.noise_projection(m);
        }
        Ok(())
    }
}

static MODES: [&dyn EstimatorMode; 5] =
    [&ProposedBsc, &NfCalOracle, &NfNoCal, &FfCalOracle, &FfNoCal];

/// All modes in registry order.
pub fn registered_modes() -> &'static [&'static dyn EstimatorMode] {
    &MODES
}

/// Resolve a mode by its registry name.
pub fn lookup_mode(name: &str) -> Result<&'static dyn EstimatorMode> {
    MODES
        .iter()
        .find(|m| m.name() == name)
        .copied()
        .ok_or_else(|| {
            let known: Vec<&str> = MODES.iter().map(|m| m.name()).collect();
            crate::error::Error::Config(format!(
                "unknown mode '{name}'; known modes: {}",
                known.join(", ")
            ))
        })
}

/// Name/label/range-capability rows for help output and manifests.
pub fn mode_table() -> Vec<ModeInfo> {
    MODES
        .iter()
        .map(|m| ModeInfo {
            name: m.name(),
            label: m.label(),
            estimates_range: m.estimates_range(),
        })
        .collect()
}
