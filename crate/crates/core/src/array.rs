//! Geometry and steering-vector math for a uniform linear array observing
//! wideband sources in its radiating near field.
//!
//! Conventions used throughout:
//!
//! - Directions are directional sines `u = sin(phi)` with `phi` measured from
//!   broadside, so the visible region is `u in [-1, 1]`.
//! - Element `n` (0-based) sits at the signed offset `(n - (N-1)/2) * d` from
//!   the array phase center, and ranges are measured to that center. Phase
//!   centering keeps the linear (direction) and quadratic (curvature) phase
//!   terms orthogonal across the aperture, so quantizing one on a search grid
//!   does not bias the other; referencing an end element instead couples them
//!   strongly enough to displace range estimates by whole meters.
//! - The near-field steering entry at frequency `f` is
//!   `(1/sqrt(N)) * exp(-j 2 pi (f/c0) (r - off u + off^2 zeta))` with the
//!   wavefront curvature `zeta = (1 - u^2) / (2 r)`; this is the second-order
//!   (Fresnel) expansion of the exact element-to-source distance. The global
//!   range phase `exp(-j 2 pi (f/c0) r)` is kept so that steering vectors at
//!   different hypotheses compose exactly under elementwise ratios.
//! - The far-field entry drops curvature and the global phase:
//!   `(1/sqrt(N)) * exp(+j 2 pi (f/c0) off u)`.
//! - `squint_map` with ratio `eta = f_ref / f` relates a phase profile built
//!   for `(u, r)` at one frequency to the location the same profile focuses
//!   on at another: the element phases of `steer(eta u, r_bar, f)` equal the
//!   element phases of `steer(u, r, f_ref)` identically.
//!
//! A steering vector may be evaluated at `|u| > 1`: squinted hypotheses near
//! the grid edge leave the visible region at band-edge subcarriers and the
//! complex exponential remains perfectly well defined there.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Uniform linear array: element count, carrier frequency, element spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayConfig {
    n_antennas: usize,
    carrier_hz: f64,
    spacing_m: f64,
}

impl ArrayConfig {
    /// Array with explicit element spacing in meters.
    pub fn with_spacing(n_antennas: usize, carrier_hz: f64, spacing_m: f64) -> Result<Self> {
        if n_antennas < 2 {
            return Err(Error::Config(format!(
                "need at least 2 antennas, got {n_antennas}"
            )));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier_hz}"
            )));
        }
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {spacing_m}"
            )));
        }
        Ok(Self {
            n_antennas,
            carrier_hz,
            spacing_m,
        })
    }

    /// Array with the default half-wavelength spacing at the carrier.
    pub fn half_wavelength(n_antennas: usize, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier_hz}"
            )));
        }
        let spacing = SPEED_OF_LIGHT / carrier_hz / 2.0;
        Self::with_spacing(n_antennas, carrier_hz, spacing)
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    /// Signed offset of element `n` from the array phase center, in meters.
    /// Offsets are symmetric about zero: `(n - (N - 1) / 2) * d`.
    pub fn element_offset(&self, element: usize) -> f64 {
        (element as f64 - (self.n_antennas - 1) as f64 / 2.0) * self.spacing_m
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Physical aperture `D = (N - 1) d` in meters.
    pub fn aperture(&self) -> f64 {
        (self.n_antennas - 1) as f64 * self.spacing_m
    }

    /// Fraunhofer distance `2 D^2 / lambda`: the near/far-field boundary.
    pub fn fraunhofer_distance(&self) -> f64 {
        let d = self.aperture();
        2.0 * d * d / self.wavelength()
    }
}

/// Subcarrier frequencies of a wideband collection, symmetric about the
/// carrier: `f_m = f_c + B ((m)/(M-1) - 1/2)` for 0-based `m`, or `f_c` when
/// there is a single subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct WidebandGrid {
    carrier_hz: f64,
    bandwidth_hz: f64,
    frequencies: Vec<f64>,
}

impl WidebandGrid {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, n_subcarriers: usize) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::Config("need at least one subcarrier".into()));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier_hz}"
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz >= 0.0) {
            return Err(Error::Config(format!(
                "bandwidth must be non-negative, got {bandwidth_hz}"
            )));
        }
        if carrier_hz - bandwidth_hz / 2.0 <= 0.0 {
            return Err(Error::Config(format!(
                "band edge below zero: carrier {carrier_hz} Hz, bandwidth {bandwidth_hz} Hz"
            )));
        }
        let frequencies = if n_subcarriers == 1 {
            vec![carrier_hz]
        } else {
            (0..n_subcarriers)
                .map(|m| {
                    carrier_hz
                        + bandwidth_hz * (m as f64 / (n_subcarriers - 1) as f64 - 0.5)
                })
                .collect()
        };
        Ok(Self {
            carrier_hz,
            bandwidth_hz,
            frequencies,
        })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one subcarrier
    }

    /// Subcarrier frequency by 0-based index.
    pub fn frequency(&self, m: usize) -> Result<f64> {
        self.frequencies
            .get(m)
            .copied()
            .ok_or_else(|| Error::Index(format!("subcarrier {m} of {}", self.len())))
    }

    /// Squint ratio `eta_m = f_c / f_m`. Unity exactly when `f_m = f_c`.
    pub fn ratio(&self, m: usize) -> Result<f64> {
        Ok(self.carrier_hz / self.frequency(m)?)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// True when every subcarrier coincides with the carrier (B = 0 or M = 1).
    pub fn is_degenerate(&self) -> bool {
        self.frequencies.iter().all(|&f| f == self.carrier_hz)
    }
}

/// A point scatterer at direction sine `u` and range `r` meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub direction_sine: f64,
    pub range_m: f64,
}

impl Target {
    pub fn new(direction_sine: f64, range_m: f64) -> Self {
        Self {
            direction_sine,
            range_m,
        }
    }
}

/// Where a phase profile focused on `(u, r)` at the reference frequency
/// actually points at another frequency, together with the deviations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquintedLocation {
    pub direction_sine: f64,
    pub range_m: f64,
    pub delta_u: f64,
    pub delta_r: f64,
    /// False when the mapped direction sine leaves `[-1, 1]`.
    pub visible: bool,
}

/// Frequency-proportional focal drift of a fixed phase profile.
///
/// With `eta = f_ref / f`, the profile built for `(u, r)` at `f_ref` focuses,
/// at frequency `f`, on direction `eta * u` and range
/// `r (1 - eta^2 u^2) / (eta (1 - u^2))`. The map with ratio `1/eta` is its
/// exact inverse.
pub fn squint_map(u: f64, r: f64, eta: f64) -> Result<SquintedLocation> {
    if !u.is_finite() || !r.is_finite() || !eta.is_finite() {
        return Err(Error::Domain("non-finite squint-map input".into()));
    }
    if r <= 0.0 {
        return Err(Error::Domain(format!("range must be positive, got {r}")));
    }
    if eta <= 0.0 {
        return Err(Error::Domain(format!(
            "frequency ratio must be positive, got {eta}"
        )));
    }
    if u.abs() >= 1.0 {
        // 1 - u^2 = 0 makes the range map singular at the endpoints.
        return Err(Error::Domain(format!(
            "direction sine must satisfy |u| < 1, got {u}"
        )));
    }
    let u_bar = eta * u;
    // Grouped so the map is an exact identity at eta = 1.
    let r_bar = r * ((1.0 - eta * eta * u * u) / (eta * (1.0 - u * u)));
    Ok(SquintedLocation {
        direction_sine: u_bar,
        range_m: r_bar,
        delta_u: u_bar - u,
        delta_r: r_bar - r,
        visible: u_bar.abs() <= 1.0,
    })
}

/// Convention for the quadratic offset term inside the exact element range.
///
/// `Geometric` is the plain law of cosines. `DoubledQuadratic` doubles the
/// squared-offset term and exists only to reproduce sources that print the
/// radicand that way; it is not used by the simulation paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactRangeConvention {
    Geometric,
    DoubledQuadratic,
}

fn check_element(cfg: &ArrayConfig, element: usize) -> Result<f64> {
    if element >= cfg.n_antennas {
        return Err(Error::Index(format!(
            "element {element} of {}",
            cfg.n_antennas
        )));
    }
    Ok(cfg.element_offset(element))
}

/// Exact distance from array element `element` (0-based) to a source at
/// direction sine `u` and range `r` from the array phase center.
pub fn element_range_exact(cfg: &ArrayConfig, u: f64, r: f64, element: usize) -> Result<f64> {
    element_range_exact_with(cfg, u, r, element, ExactRangeConvention::Geometric)
}

/// Exact element range under an explicit quadratic-term convention.
pub fn element_range_exact_with(
    cfg: &ArrayConfig,
    u: f64,
    r: f64,
    element: usize,
    convention: ExactRangeConvention,
) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {r}")));
    }
    let off = check_element(cfg, element)?;
    let quad = match convention {
        ExactRangeConvention::Geometric => off * off,
        ExactRangeConvention::DoubledQuadratic => 2.0 * off * off,
    };
    let radicand = r * r + quad - 2.0 * r * off * u;
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "negative radicand for u={u}, r={r}, element={element}"
        )));
    }
    Ok(radicand.sqrt())
}

/// Second-order (Fresnel) expansion of the element range:
/// `r - off u + off^2 (1 - u^2) / (2 r)` with `off` the signed element offset.
pub fn element_range_fresnel(cfg: &ArrayConfig, u: f64, r: f64, element: usize) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {r}")));
    }
    let off = check_element(cfg, element)?;
    let zeta = (1.0 - u * u) / (2.0 * r);
    Ok(r - off * u + off * off * zeta)
}

/// A unit-norm steering vector together with the wavefront curvature it was
/// built from (zero for far-field vectors).
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    entries: DVector<Complex64>,
    curvature: f64,
}

impl SteeringVector {
    pub fn entries(&self) -> &DVector<Complex64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, n: usize) -> Complex64 {
        self.entries[n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.entries.as_slice()
    }

    /// Wavefront curvature `zeta = (1 - u^2) / (2 r)` (1/m); 0 for far field.
    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// Entries as `(re, im)` pairs, the JSON golden format.
    pub fn entry_pairs(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|z| (z.re, z.im)).collect()
    }
}

/// Spherical-wavefront steering vector of `(u, r)` at frequency `freq_hz`.
///
/// Entry `n` is `(1/sqrt(N)) exp(-j 2 pi (f/c0) rho_n)` with `rho_n` the
/// Fresnel element range, so the global range phase is included.
pub fn nearfield_steering(
    cfg: &ArrayConfig,
    u: f64,
    r: f64,
    freq_hz: f64,
) -> Result<SteeringVector> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("non-finite direction sine {u}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {r}")));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {freq_hz}"
        )));
    }
    let n = cfg.n_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let wavenumber = TWO_PI * freq_hz / SPEED_OF_LIGHT;
    let zeta = (1.0 - u * u) / (2.0 * r);
    let entries = DVector::from_iterator(
        n,
        (0..n).map(|e| {
            let off = cfg.element_offset(e);
            let rho = r - off * u + off * off * zeta;
            Complex64::from_polar(scale, -wavenumber * rho)
        }),
    );
    Ok(SteeringVector {
        entries,
        curvature: zeta,
    })
}

/// Planar-wavefront steering vector of direction `u` at frequency `freq_hz`.
pub fn farfield_steering(cfg: &ArrayConfig, u: f64, freq_hz: f64) -> Result<SteeringVector> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("non-finite direction sine {u}")));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {freq_hz}"
        )));
    }
    let n = cfg.n_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let wavenumber = TWO_PI * freq_hz / SPEED_OF_LIGHT;
    let entries = DVector::from_iterator(
        n,
        (0..n).map(|e| Complex64::from_polar(scale, wavenumber * cfg.element_offset(e) * u)),
    );
    Ok(SteeringVector {
        entries,
        curvature: 0.0,
    })
}

/// Beamforming gain `|a^H b|` between two steering vectors.
pub fn array_gain(reference: &SteeringVector, probe: &SteeringVector) -> Result<f64> {
    if reference.len() != probe.len() {
        return Err(Error::Dimension(format!(
            "gain between vectors of length {} and {}",
            reference.len(),
            probe.len()
        )));
    }
    Ok(reference.entries.dotc(&probe.entries).norm())
}

/// Largest Fresnel-vs-exact element range error over the given hypotheses.
/// Used by the self-check command to report how accurate the quadratic
/// expansion is for a particular geometry.
pub fn fresnel_worst_error(cfg: &ArrayConfig, ranges: &[f64], sines: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &r in ranges {
        for &u in sines {
            for e in [cfg.n_antennas / 2, cfg.n_antennas - 1] {
                let exact = element_range_exact(cfg, u, r, e)?;
                let fresnel = element_range_fresnel(cfg, u, r, e)?;
                worst = worst.max((exact - fresnel).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn cfg_half_wavelength(n: usize) -> ArrayConfig {
        ArrayConfig::half_wavelength(n, 300e9).unwrap()
    }

    // -------- subcarrier layout --------

    #[test]
    fn subcarriers_span_the_band_symmetrically() {
        let g = WidebandGrid::new(300e9, 30e9, 32).unwrap();
        assert_eq!(g.frequency(0).unwrap(), 285e9);
        assert_eq!(g.frequency(31).unwrap(), 315e9);
        // Symmetric pairs about the carrier.
        for m in 0..16 {
            let lo = g.frequency(m).unwrap();
            let hi = g.frequency(31 - m).unwrap();
            assert_abs_diff_eq!(lo + hi, 2.0 * 300e9, epsilon = 1e-3);
        }
        let odd = WidebandGrid::new(300e9, 30e9, 7).unwrap();
        assert_eq!(odd.frequency(3).unwrap(), 300e9);
        let single = WidebandGrid::new(300e9, 30e9, 1).unwrap();
        assert_eq!(single.frequency(0).unwrap(), 300e9);
    }

    #[test]
    fn subcarriers_increase_strictly_when_band_is_positive() {
        let g = WidebandGrid::new(300e9, 30e9, 9).unwrap();
        for w in g.frequencies().windows(2) {
            assert!(w[0] < w[1]);
        }
        let flat = WidebandGrid::new(300e9, 0.0, 4).unwrap();
        assert!(flat.is_degenerate());
        assert!(flat.frequencies().iter().all(|&f| f == 300e9));
    }

    #[test]
    fn squint_ratio_is_unity_only_at_the_carrier() {
        let g = WidebandGrid::new(300e9, 30e9, 32).unwrap();
        // 300/285 above one below the carrier, 300/315 below one above it.
        assert_relative_eq!(g.ratio(0).unwrap(), 300.0 / 285.0, epsilon = 1e-15);
        assert_relative_eq!(g.ratio(31).unwrap(), 300.0 / 315.0, epsilon = 1e-15);
        for m in 0..32 {
            let unity = g.ratio(m).unwrap() == 1.0;
            let at_carrier = g.frequency(m).unwrap() == 300e9;
            assert_eq!(unity, at_carrier);
        }
    }

    #[test]
    fn subcarrier_index_is_checked() {
        let g = WidebandGrid::new(300e9, 30e9, 4).unwrap();
        assert!(matches!(g.frequency(4), Err(Error::Index(_))));
        assert!(matches!(
            WidebandGrid::new(300e9, 700e9, 4),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            WidebandGrid::new(300e9, 30e9, 0),
            Err(Error::Config(_))
        ));
    }

    // -------- Fraunhofer distance --------
    //
    // Oracle: d_F = 2 D^2 / lambda with D = (N-1) d. For half-wavelength
    // spacing this reduces to (N-1)^2 lambda / 2; both routes are checked
    // against each other and against frozen values.

    fn fraunhofer_oracle(n: usize, carrier: f64) -> f64 {
        let lambda = SPEED_OF_LIGHT / carrier;
        ((n - 1) * (n - 1)) as f64 * lambda / 2.0
    }

    #[test]
    fn fraunhofer_matches_oracle_on_reference_geometries() {
        for (n, frozen) in [(2, 4.996540966666667e-4), (128, 8.058921), (256, 32.490005)] {
            let cfg = cfg_half_wavelength(n);
            let direct = cfg.fraunhofer_distance();
            assert_relative_eq!(direct, fraunhofer_oracle(n, 300e9), max_relative = 1e-12);
            assert_abs_diff_eq!(direct, frozen, epsilon = 1e-4);
        }
    }

    #[test]
    fn fraunhofer_grows_quadratically_with_aperture() {
        let small = cfg_half_wavelength(64).fraunhofer_distance();
        let large = cfg_half_wavelength(128).fraunhofer_distance();
        assert_relative_eq!(large / small, (127.0f64 / 63.0).powi(2), max_relative = 1e-12);
    }

    // -------- element ranges --------

    #[test]
    fn element_offsets_are_symmetric_about_the_phase_center() {
        let even = ArrayConfig::with_spacing(8, 300e9, 5e-4).unwrap();
        for n in 0..8 {
            assert_eq!(even.element_offset(n), -even.element_offset(7 - n));
        }
        assert_eq!(even.element_offset(0), -3.5 * 5e-4);
        let odd = ArrayConfig::with_spacing(9, 300e9, 5e-4).unwrap();
        assert_eq!(odd.element_offset(4), 0.0);
        // Consecutive offsets always step by the element spacing.
        for n in 0..8 {
            assert_relative_eq!(
                odd.element_offset(n + 1) - odd.element_offset(n),
                5e-4,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn center_element_sees_the_plain_range() {
        // Odd array: the middle element sits at the phase center.
        let cfg = ArrayConfig::with_spacing(9, 300e9, 5e-4).unwrap();
        for r in [0.3, 1.0, 10.0] {
            assert_relative_eq!(
                element_range_exact(&cfg, 0.4, r, 4).unwrap(),
                r,
                max_relative = 1e-15
            );
            assert_relative_eq!(
                element_range_fresnel(&cfg, 0.4, r, 4).unwrap(),
                r,
                max_relative = 1e-15
            );
        }
        // Mirror-image elements are equidistant at broadside.
        let even = ArrayConfig::with_spacing(8, 300e9, 5e-4).unwrap();
        for n in 0..4 {
            assert_relative_eq!(
                element_range_exact(&even, 0.0, 2.0, n).unwrap(),
                element_range_exact(&even, 0.0, 2.0, 7 - n).unwrap(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn exact_range_frozen_values_doubled_convention() {
        // N = 8, d = 5e-4: element 1 offset -1.25e-3, element 2 offset -7.5e-4.
        let cfg = ArrayConfig::with_spacing(8, 300e9, 5e-4).unwrap();
        // sqrt(100 + 2 (1.25e-3)^2)
        let broadside = element_range_exact_with(
            &cfg,
            0.0,
            10.0,
            1,
            ExactRangeConvention::DoubledQuadratic,
        )
        .unwrap();
        assert_abs_diff_eq!(broadside, 10.00000015625, epsilon = 1e-9);
        // sqrt(1 + 2 (7.5e-4)^2 + 1.5e-3)
        let endfire =
            element_range_exact_with(&cfg, 1.0, 1.0, 2, ExactRangeConvention::DoubledQuadratic)
                .unwrap();
        assert_abs_diff_eq!(endfire, 1.000750281039181, epsilon = 1e-12);
    }

    #[test]
    fn exact_range_frozen_values_geometric_convention() {
        let cfg = ArrayConfig::with_spacing(8, 300e9, 5e-4).unwrap();
        // sqrt(100 + (1.25e-3)^2)
        let broadside = element_range_exact(&cfg, 0.0, 10.0, 1).unwrap();
        assert_abs_diff_eq!(broadside, 10.000000078125, epsilon = 1e-12);
        // At endfire the law of cosines collapses to |r - off| exactly;
        // element 2 sits at offset -7.5e-4, behind the center as seen at u=1.
        let endfire = element_range_exact(&cfg, 1.0, 1.0, 2).unwrap();
        assert_abs_diff_eq!(endfire, 1.00075, epsilon = 1e-12);
    }

    #[test]
    fn exact_range_rejects_bad_inputs() {
        let cfg = ArrayConfig::with_spacing(8, 300e9, 0.0635).unwrap();
        assert!(matches!(
            element_range_exact(&cfg, 0.0, 1.0, 8),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            element_range_exact(&cfg, 0.0, -1.0, 1),
            Err(Error::Domain(_))
        ));
        // |u| > 1 can push the radicand negative when r is near the offset;
        // element 7 sits at +0.22225 m here.
        assert!(matches!(
            element_range_exact(&cfg, 1.3, 0.2, 7),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fresnel_error_at_reference_hypothesis_is_under_a_micrometer() {
        // Measured gap between the expansion and the law of cosines at
        // u = 0.7071, r = 5 m, for the outermost elements of a 128-element
        // 0.5 mm array (offsets +/- 63.5 d): ~2.3e-7 m on both ends.
        let cfg = ArrayConfig::with_spacing(128, 300e9, 5e-4).unwrap();
        for e in [0, 127] {
            let exact = element_range_exact(&cfg, 0.7071, 5.0, e).unwrap();
            let fresnel = element_range_fresnel(&cfg, 0.7071, 5.0, e).unwrap();
            let diff = (exact - fresnel).abs();
            assert!(diff < 3e-7, "fresnel gap {diff:.3e} not under 3e-7 m");
        }
    }

    #[test]
    fn fresnel_is_exact_at_endfire() {
        // u = +/-1 zeroes the curvature, leaving r - off * u exactly.
        let cfg = ArrayConfig::with_spacing(16, 300e9, 5e-4).unwrap();
        for u in [-1.0, 1.0] {
            for e in [0, 1, 7, 15] {
                let fresnel = element_range_fresnel(&cfg, u, 2.0, e).unwrap();
                assert_relative_eq!(
                    fresnel,
                    2.0 - cfg.element_offset(e) * u,
                    max_relative = 1e-15
                );
            }
        }
    }

    /// Accuracy of the quadratic expansion over the near-field working region.
    ///
    /// With center-referenced offsets the worst error over r in
    /// [0.1 d_F, d_F] and the full visible region is ~9.6e-6 m for the
    /// 128-element array and ~4.7e-6 m for the 256-element one, comfortably
    /// inside the lambda/16 = 6.2e-5 m budget. (End-referenced offsets would
    /// double the maximum offset and cube into an 8x larger cubic error term,
    /// breaching the budget in the 128-element corner at 0.1 d_F.)
    #[test]
    fn fresnel_accuracy_over_the_working_region() {
        let sines: Vec<f64> = [-0.99, -0.9, -0.7071, -0.577, -0.45, -0.2, 0.0, 0.2, 0.45,
            0.577, 0.7071, 0.9, 0.99, 1.0, -1.0]
            .into();
        let fracs = [0.1, 0.12, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0];

        for n in [128, 256] {
            let cfg = cfg_half_wavelength(n);
            let df = cfg.fraunhofer_distance();
            let ranges: Vec<f64> = fracs.iter().map(|s| s * df).collect();
            let worst = fresnel_worst_error(&cfg, &ranges, &sines).unwrap();
            assert!(
                worst < cfg.wavelength() / 16.0,
                "n={n}: worst fresnel error {worst:.3e} exceeds lambda/16"
            );
        }
    }

    // -------- steering vectors --------

    #[test]
    fn nearfield_steering_is_unit_norm_with_flat_modulus() {
        let cfg = cfg_half_wavelength(128);
        let a = nearfield_steering(&cfg, 0.7071, 5.0, 315e9).unwrap();
        assert_relative_eq!(a.entries().norm(), 1.0, max_relative = 1e-12);
        let expected = 1.0 / 128f64.sqrt();
        for z in a.as_slice() {
            assert_abs_diff_eq!(z.norm(), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn center_entry_carries_the_plain_range_phase() {
        // Odd array: the middle element has zero offset, so its steering
        // entry is exactly the global range phase.
        let cfg = cfg_half_wavelength(25);
        let (u, r, f) = (0.3, 4.0, 310e9);
        let a = nearfield_steering(&cfg, u, r, f).unwrap();
        let expected = Complex64::from_polar(0.2, -TWO_PI * f / SPEED_OF_LIGHT * r);
        assert_abs_diff_eq!(a.entry(12).re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(a.entry(12).im, expected.im, epsilon = 1e-12);
        // Even array at broadside: the innermost mirror pair is identical.
        let even = cfg_half_wavelength(64);
        let b = nearfield_steering(&even, 0.0, r, f).unwrap();
        assert_abs_diff_eq!((b.entry(31) - b.entry(32)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn farfield_phase_progression_is_half_pi_at_u_half() {
        let cfg = cfg_half_wavelength(16);
        let a = farfield_steering(&cfg, 0.5, 300e9).unwrap();
        for n in 0..15 {
            let step = (a.entry(n + 1) / a.entry(n)).arg();
            assert_abs_diff_eq!(step, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        }
        // Broadside: every entry is exactly 1/sqrt(N).
        let b = farfield_steering(&cfg, 0.0, 300e9).unwrap();
        for z in b.as_slice() {
            assert_abs_diff_eq!(z.re, 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn nearfield_approaches_farfield_monotonically() {
        let cfg = cfg_half_wavelength(64);
        let u = 0.3;
        let ff = farfield_steering(&cfg, u, 300e9).unwrap();
        let df = cfg.fraunhofer_distance();
        let mut previous = f64::INFINITY;
        for scale in [10.0, 1e2, 1e3, 1e4, 1e5] {
            let r = scale * df;
            let nf = nearfield_steering(&cfg, u, r, 300e9).unwrap();
            // Remove the global range phase before comparing elementwise.
            let global = Complex64::from_polar(1.0, TWO_PI * 300e9 / SPEED_OF_LIGHT * r);
            let diff = (0..64)
                .map(|n| (nf.entry(n) * global - ff.entry(n)).norm())
                .fold(0.0f64, f64::max);
            assert!(diff < previous, "difference must shrink with range");
            previous = diff;
        }
        assert!(previous < 1e-4, "at 1e5 d_F the limit gap is {previous:.3e}");
    }

    #[test]
    fn steering_rejects_invalid_inputs() {
        let cfg = cfg_half_wavelength(8);
        assert!(matches!(
            nearfield_steering(&cfg, 0.1, 0.0, 300e9),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            nearfield_steering(&cfg, f64::NAN, 1.0, 300e9),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            farfield_steering(&cfg, 0.1, -1.0),
            Err(Error::Domain(_))
        ));
        // Out-of-visible-region sines are allowed by design.
        assert!(nearfield_steering(&cfg, 1.2, 1.0, 300e9).is_ok());
    }

    // -------- squint map --------

    #[test]
    fn squint_map_is_identity_at_unit_ratio() {
        let loc = squint_map(0.37, 4.2, 1.0).unwrap();
        assert_eq!(loc.direction_sine, 0.37);
        assert_eq!(loc.range_m, 4.2);
        assert_eq!(loc.delta_u, 0.0);
        assert_eq!(loc.delta_r, 0.0);
        assert!(loc.visible);
    }

    #[test]
    fn squint_map_broadside_only_rescales_range() {
        let eta = 300.0 / 315.0;
        let loc = squint_map(0.0, 6.0, eta).unwrap();
        assert_eq!(loc.direction_sine, 0.0);
        assert_relative_eq!(loc.range_m, 6.0 / eta, max_relative = 1e-14);
    }

    #[test]
    fn squint_map_frozen_reference_point() {
        // u = 0.7071, r = 10 m, eta = 300/315.
        let eta = 300.0 / 315.0;
        let loc = squint_map(0.7071, 10.0, eta).unwrap();
        assert_abs_diff_eq!(loc.direction_sine, 0.6734286, epsilon = 1e-6);
        assert_abs_diff_eq!(loc.range_m, 11.47617, epsilon = 1e-4);
        // Independent evaluation of the closed form.
        let u2 = 0.7071f64 * 0.7071;
        let oracle = 10.0 * (1.0 - eta * eta * u2) / (eta * (1.0 - u2));
        assert_relative_eq!(loc.range_m, oracle, max_relative = 1e-15);
        assert_abs_diff_eq!(loc.delta_u, (eta - 1.0) * 0.7071, epsilon = 1e-15);
    }

    #[test]
    fn squint_map_flags_out_of_region_results() {
        // Below-carrier subcarriers push |u| outward.
        let loc = squint_map(0.98, 5.0, 300.0 / 285.0).unwrap();
        assert!(loc.direction_sine > 1.0);
        assert!(!loc.visible);
        assert!(matches!(squint_map(1.0, 5.0, 0.95), Err(Error::Domain(_))));
        assert!(matches!(squint_map(0.5, 0.0, 0.95), Err(Error::Domain(_))));
        assert!(matches!(squint_map(0.5, 5.0, 0.0), Err(Error::Domain(_))));
    }

    // -------- array gain --------

    #[test]
    fn gain_of_identical_vectors_is_one() {
        let cfg = cfg_half_wavelength(32);
        let a = nearfield_steering(&cfg, 0.25, 3.0, 300e9).unwrap();
        assert_relative_eq!(array_gain(&a, &a).unwrap(), 1.0, max_relative = 1e-12);
        let other = cfg_half_wavelength(16);
        let b = nearfield_steering(&other, 0.25, 3.0, 300e9).unwrap();
        assert!(matches!(array_gain(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn fixed_phase_profile_peaks_at_the_squinted_direction() {
        // Scan the gain of a carrier-built profile against probes at an
        // off-carrier frequency: the peak must sit at eta * u0, and the gain
        // there is exactly 1 because the element phases align identically.
        let cfg = cfg_half_wavelength(64);
        let (u0, r0, f) = (0.5, 4.0, 315e9);
        let eta = 300e9 / f;
        let reference = nearfield_steering(&cfg, u0, r0, 300e9).unwrap();
        let mapped = squint_map(u0, r0, eta).unwrap();

        let mut best = (f64::MIN, f64::NAN);
        let mut u = -0.999;
        while u <= 0.999 {
            let probe = nearfield_steering(&cfg, u, mapped.range_m, f).unwrap();
            let g = array_gain(&reference, &probe).unwrap();
            if g > best.0 {
                best = (g, u);
            }
            u += 1e-3;
        }
        assert_abs_diff_eq!(best.1, eta * u0, epsilon = 1e-3 + 1e-9);

        let aligned = nearfield_steering(&cfg, mapped.direction_sine, mapped.range_m, f).unwrap();
        assert_relative_eq!(
            array_gain(&reference, &aligned).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    // -------- property tests --------

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn steering_norms_hold_everywhere(
            u in -1.0f64..1.0,
            r in 0.05f64..50.0,
            f in 270e9f64..330e9,
        ) {
            let cfg = cfg_half_wavelength(16);
            let a = nearfield_steering(&cfg, u, r, f).unwrap();
            prop_assert!((a.entries().norm() - 1.0).abs() < 1e-12);
            let expected = 0.25;
            for z in a.as_slice() {
                prop_assert!((z.norm() - expected).abs() < 1e-14);
            }
        }

        #[test]
        fn squint_map_inverts_exactly(
            u in -0.95f64..0.95,
            r in 0.5f64..40.0,
            eta in 0.9f64..1.1,
        ) {
            // Keep away from the 1 - eta^2 u^2 = 0 singularity, where the
            // forward map cancels catastrophically and no precision is left.
            prop_assume!(1.0 - eta * eta * u * u > 1e-3);
            let there = squint_map(u, r, eta).unwrap();
            prop_assume!(there.direction_sine.abs() < 1.0 && there.range_m > 0.0);
            let back = squint_map(there.direction_sine, there.range_m, 1.0 / eta).unwrap();
            prop_assert!((back.direction_sine - u).abs() < 1e-12);
            prop_assert!((back.range_m - r).abs() / r < 1e-10);
        }

        #[test]
        fn squinted_steering_equals_carrier_steering_elementwise(
            u in -0.9f64..0.9,
            r in 1.0f64..20.0,
            f in 285e9f64..315e9,
        ) {
            // The defining property of the squint map: mapped location at f
            // has the same element-dependent phases as (u, r) at the carrier.
            let cfg = cfg_half_wavelength(32);
            let eta = 300e9 / f;
            let mapped = squint_map(u, r, eta).unwrap();
            prop_assume!(mapped.range_m > 1e-3);
            let at_f = nearfield_steering(&cfg, mapped.direction_sine, mapped.range_m, f).unwrap();
            let at_fc = nearfield_steering(&cfg, u, r, 300e9).unwrap();
            // Strip both global phases, then compare.
            let g_f = at_f.entry(0) / at_f.entry(0).norm();
            let g_fc = at_fc.entry(0) / at_fc.entry(0).norm();
            for n in 0..32 {
                let lhs = at_f.entry(n) / g_f;
                let rhs = at_fc.entry(n) / g_fc;
                prop_assert!((lhs - rhs).norm() < 1e-9);
            }
        }
    }
}
