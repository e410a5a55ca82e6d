//! Squint-aware 2-D MUSIC spectrum search and its baseline variants.
//!
//! Every estimator variant scores a grid hypothesis `(u, r)` by the combined
//! spectrum `P(u, r) = sum_m 1 / max(q_m, eps)` where
//! `q_m = || ā_m^H (W̃ U_m^N) ||^2`, `U_m^N` is the noise eigenbasis of
//! subcarrier `m`, `W̃` the noise-whitened analog combiner (the unitary polar
//! factor of each slot block — see [`crate::scene::whiten_observations`]),
//! and `ā_m` the variant's per-subcarrier hypothesis steering:
//!
//! - `proposed`: wideband near-field steering `a(u, r, f_m)`, obtained by
//!   applying the per-subcarrier transform diagonal to the carrier steering.
//!   This matches the per-subcarrier signature the echo of a target at
//!   `(u, r)` actually leaves in the data, so the corrected spectra of all
//!   subcarriers peak at the same physical location.
//! - `nf-cal`: genie calibration; evaluates the carrier steering at the
//!   apparent (squinted) location of the hypothesis for each subcarrier.
//!   Mathematically equivalent to `proposed`, computed along a different
//!   route.
//! - `nf-nocal`: carrier steering for every subcarrier — the uncorrected
//!   near-field baseline that beam squint biases.
//! - `ff-cal` / `ff-nocal`: planar-wavefront analogues; direction-only
//!   (their spectra carry no range axis).
//!
//! Variants are unit structs behind the [`EstimatorMode`] trait, registered
//! by name and selected at runtime ([`lookup_mode`]); the grid driver
//! ([`combined_spectrum`]) is generic over the trait object.

mod modes;
mod peaks;
mod spectrum;
mod transform;

pub use modes::{lookup_mode, mode_table, registered_modes, ModeInfo};
pub use peaks::{find_peaks, Estimates, PeakEstimate};
pub use spectrum::{
    combined_spectrum, music_spectrum_point, spectrum_from_subspaces, GridSpec,
    HypothesisWorkspace, SpectrumGrid, DEFAULT_CLAMP,
};
pub use transform::{corrected_noise_subspace, echo_transform, squint_transform, TransformDiag};

use crate::error::Result;

/// One spectrum-search variant: how to steer a hypothesis per subcarrier.
///
/// `denominators` fills `out[m]` with `q_m(u, r)` for every subcarrier; the
/// whole batch is computed in one call so variants whose steering does not
/// depend on `m` can hoist the expensive work out of the subcarrier loop.
pub trait EstimatorMode: Sync {
    /// Registry key, e.g. `"proposed"`.
    fn name(&self) -> &'static str;

    /// One-line human description.
    fn label(&self) -> &'static str;

    /// False for planar-wavefront variants, whose spectra have no range axis.
    fn estimates_range(&self) -> bool;

    /// Noise-projection denominators of hypothesis `(u, r)` for every
    /// subcarrier. Direction-only variants ignore `r`.
    fn denominators(
        &self,
        workspace: &mut HypothesisWorkspace<'_>,
        u: f64,
        r: f64,
        out: &mut [f64],
    ) -> Result<()>;
}
