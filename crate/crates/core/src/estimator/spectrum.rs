//! Spectrum grids and the parallel evaluation driver.
//!
//! The combined spectrum is `P(u, r) = Σ_m 1 / max(q_m, ε)` where `q_m` is a
//! mode-specific noise-subspace projection power for subcarrier `m`. Two
//! equivalent routes compute `q_m`:
//!
//! - [`music_spectrum_point`] is the literal form: it takes the per-subcarrier
//!   projected noise bases (combiner- and, where applicable,
//!   transform-weighted) and evaluates `q_m = ‖V_m^H a‖²` by explicit matrix
//!   products. It exists as the reference implementation and for callers that
//!   already hold the corrected bases.
//! - [`combined_spectrum`] is the production driver. Per hypothesis it forms
//!   `w = W^H ā_m` blockwise and uses the orthogonal-complement identity
//!   `‖U_m^N{}^H w‖² = ‖w‖² − ‖U_m^S{}^H w‖²`, so the per-subcarrier cost
//!   scales with the signal-subspace width `K` instead of `N − K`. Both
//!   routes agree to relative 1e−9 (covered by tests).
//!
//! Evaluation is data-parallel over direction-axis rows; within a cell the
//! subcarrier sum runs in fixed index order, so results are independent of
//! thread count and scheduling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{ArrayConfig, SteeringVector, WidebandGrid, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::scene::{whiten_observations, CombinerBank, ObservationSet};
use crate::subspace::{decompose_all, SubspacePair};

use super::EstimatorMode;

/// Floor for MUSIC denominators; keeps noiseless spectra finite.
pub const DEFAULT_CLAMP: f64 = 1e-12;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Closed search region `[u_start, u_stop] × [r_start, r_stop]` with uniform
/// steps. Axis points are `start + i·step`; the stop value is included when
/// it lies within 1e−9 steps of the last point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub u_start: f64,
    pub u_stop: f64,
    pub u_step: f64,
    pub r_start: f64,
    pub r_stop: f64,
    pub r_step: f64,
}

fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

impl GridSpec {
    /// Default search region for an array: directions `[-1, 1]`, ranges from
    /// 0.5 m out to the Fraunhofer distance.
    pub fn with_steps(cfg: &ArrayConfig, u_step: f64, r_step: f64) -> Result<Self> {
        let spec = Self {
            u_start: -1.0,
            u_stop: 1.0,
            u_step,
            r_start: 0.5,
            r_stop: cfg.fraunhofer_distance(),
            r_step,
        };
        if spec.r_stop < spec.r_start {
            return Err(Error::Config(format!(
                "Fraunhofer distance {} m lies below the minimum search range {} m; \
                 supply explicit grid bounds",
                spec.r_stop, spec.r_start
            )));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.u_start,
            self.u_stop,
            self.u_step,
            self.r_start,
            self.r_stop,
            self.r_step,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite grid bound in {self:?}")));
        }
        if self.u_step <= 0.0 || self.r_step <= 0.0 {
            return Err(Error::Config(format!(
                "grid steps must be positive, got {} and {}",
                self.u_step, self.r_step
            )));
        }
        if self.u_stop < self.u_start || self.r_stop < self.r_start {
            return Err(Error::Config(format!("empty grid region in {self:?}")));
        }
        if self.r_start <= 0.0 {
            // Wavefront curvature diverges at zero range.
            return Err(Error::Config(format!(
                "range grid must start above zero, got {}",
                self.r_start
            )));
        }
        Ok(())
    }

    pub fn direction_axis(&self) -> Vec<f64> {
        axis(self.u_start, self.u_stop, self.u_step)
    }

    pub fn range_axis(&self) -> Vec<f64> {
        axis(self.r_start, self.r_stop, self.r_step)
    }
}

/// Evaluated spectrum over a grid. Values are stored row-major: the cell for
/// direction index `iu` and range index `ir` sits at `iu * n_range + ir`.
///
/// Direction-only (far-field) spectra carry a single NaN range coordinate so
/// every value still has a `(u, r)` address in exports.
#[derive(Clone, Debug)]
pub struct SpectrumGrid {
    mode: String,
    direction_axis: Vec<f64>,
    range_axis: Vec<f64>,
    values: Vec<f64>,
    direction_only: bool,
}

impl SpectrumGrid {
    pub fn from_values(
        mode: impl Into<String>,
        direction_axis: Vec<f64>,
        range_axis: Vec<f64>,
        values: Vec<f64>,
        direction_only: bool,
    ) -> Result<Self> {
        if direction_axis.is_empty() || range_axis.is_empty() {
            return Err(Error::Dimension("empty spectrum axis".into()));
        }
        if values.len() != direction_axis.len() * range_axis.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{} grid",
                values.len(),
                direction_axis.len(),
                range_axis.len()
            )));
        }
        if direction_axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("direction axis must ascend".into()));
        }
        if direction_only {
            if range_axis.len() != 1 {
                return Err(Error::Config(
                    "direction-only spectra carry a single placeholder range".into(),
                ));
            }
        } else if range_axis[0] <= 0.0 || range_axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("range axis must ascend and stay positive".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Numeric(
                "spectrum values must be finite and positive".into(),
            ));
        }
        Ok(Self {
            mode: mode.into(),
            direction_axis,
            range_axis,
            values,
            direction_only,
        })
    }

    pub fn mode(&self) -> &str {
        &self.mode
    }

    pub fn direction_axis(&self) -> &[f64] {
        &self.direction_axis
    }

    pub fn range_axis(&self) -> &[f64] {
        &self.range_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn direction_only(&self) -> bool {
        self.direction_only
    }

    pub fn n_direction(&self) -> usize {
        self.direction_axis.len()
    }

    pub fn n_range(&self) -> usize {
        self.range_axis.len()
    }

    pub fn value(&self, iu: usize, ir: usize) -> f64 {
        self.values[iu * self.range_axis.len() + ir]
    }

    /// Indices of the largest value; ties resolve to the lowest direction
    /// index, then the lowest range index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.range_axis.len(), best % self.range_axis.len())
    }
}

/// Literal combined-spectrum value at one hypothesis: `Σ_m 1/max(q_m, clamp)`
/// with `q_m = ‖V_m^H a‖²` over the supplied projected noise bases.
pub fn music_spectrum_point(
    hypothesis: &SteeringVector,
    projected_noise: &[DMatrix<Complex64>],
    clamp: f64,
) -> Result<f64> {
    if !(clamp.is_finite() && clamp > 0.0) {
        return Err(Error::Config(format!("clamp must be positive, got {clamp}")));
    }
    let n = hypothesis.len();
    let a = hypothesis.as_slice();
    let mut total = 0.0;
    for basis in projected_noise {
        if basis.nrows() != n {
            return Err(Error::Dimension(format!(
                "projected basis has {} rows for a length-{n} steering vector",
                basis.nrows()
            )));
        }
        let data = basis.as_slice();
        let mut q = 0.0;
        for col in 0..basis.ncols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, s) in data[col * n..(col + 1) * n].iter().zip(a) {
                acc += v.conj() * s;
            }
            q += acc.norm_sqr();
        }
        total += 1.0 / q.max(clamp);
    }
    Ok(total)
}

/// Reusable per-thread scratch for scoring grid hypotheses.
///
/// A mode fixes the hypothesis geometry with [`set_nearfield`] or
/// [`set_farfield`], renders the steering vector at some frequency ratio,
/// pushes it through the combiner, and reads per-subcarrier projection
/// powers. The Fresnel phase of a hypothesis is `-2π(f/c0)·g_n` with a
/// frequency-independent geometry term `g_n`, so steering across an evenly
/// spaced subcarrier plan is a per-element geometric progression:
/// [`init_recurrence`] renders the first subcarrier plus one step multiplier
/// per element, and [`advance`] moves to the next subcarrier with a single
/// complex multiply per element instead of a fresh transcendental evaluation.
///
/// [`set_nearfield`]: HypothesisWorkspace::set_nearfield
/// [`set_farfield`]: HypothesisWorkspace::set_farfield
/// [`init_recurrence`]: HypothesisWorkspace::init_recurrence
/// [`advance`]: HypothesisWorkspace::advance
pub struct HypothesisWorkspace<'a> {
    bank: &'a CombinerBank,
    subspaces: &'a [SubspacePair],
    offsets: Vec<f64>,
    offsets_sq: Vec<f64>,
    ratios_to_carrier: Vec<f64>,
    ratio_first: f64,
    ratio_step: f64,
    carrier_wavenumber: f64,
    scale: f64,
    geometry: Vec<f64>,
    steer: Vec<Complex64>,
    step: Vec<Complex64>,
    combined: Vec<Complex64>,
}

impl<'a> HypothesisWorkspace<'a> {
    pub fn new(
        cfg: &ArrayConfig,
        grid: &WidebandGrid,
        bank: &'a CombinerBank,
        subspaces: &'a [SubspacePair],
    ) -> Result<Self> {
        let n = cfg.n_antennas();
        if bank.n_antennas() != n {
            return Err(Error::Dimension(format!(
                "combiner spans {} antennas, array has {n}",
                bank.n_antennas()
            )));
        }
        if grid.carrier_hz() != cfg.carrier_hz() {
            return Err(Error::Config(format!(
                "array carrier {} Hz disagrees with subcarrier plan carrier {} Hz",
                cfg.carrier_hz(),
                grid.carrier_hz()
            )));
        }
        if subspaces.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} subspace pairs for {} subcarriers",
                subspaces.len(),
                grid.len()
            )));
        }
        for (m, pair) in subspaces.iter().enumerate() {
            if pair.n_antennas() != n {
                return Err(Error::Dimension(format!(
                    "subcarrier {m}: subspace over {} antennas, array has {n}",
                    pair.n_antennas()
                )));
            }
        }
        let f_c = cfg.carrier_hz();
        let ratios_to_carrier: Vec<f64> = (0..grid.len())
            .map(|m| grid.frequency(m).expect("index in range") / f_c)
            .collect();
        let ratio_first = ratios_to_carrier[0];
        let m_count = grid.len();
        let ratio_step = if m_count > 1 {
            (ratios_to_carrier[m_count - 1] - ratio_first) / (m_count - 1) as f64
        } else {
            0.0
        };
        let offsets: Vec<f64> = (0..n).map(|e| cfg.element_offset(e)).collect();
        let offsets_sq: Vec<f64> = offsets.iter().map(|o| o * o).collect();
        Ok(Self {
            bank,
            subspaces,
            offsets,
            offsets_sq,
            ratios_to_carrier,
            ratio_first,
            ratio_step,
            carrier_wavenumber: TWO_PI * f_c / SPEED_OF_LIGHT,
            scale: 1.0 / (n as f64).sqrt(),
            geometry: vec![0.0; n],
            steer: vec![Complex64::new(0.0, 0.0); n],
            step: vec![Complex64::new(0.0, 0.0); n],
            combined: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.subspaces.len()
    }

    /// `f_m / f_c` for subcarrier `m`.
    pub fn ratio_to_carrier(&self, m: usize) -> f64 {
        self.ratios_to_carrier[m]
    }

    /// Fix a spherical-wavefront hypothesis. Geometry term per element:
    /// `g_n = r - off·u + off²(1-u²)/(2r)`, matching the Fresnel steering
    /// phase `-2π(f/c0)·g_n`. `|u| > 1` is allowed (evanescent hypotheses
    /// keep the phase model well defined).
    pub fn set_nearfield(&mut self, u: f64, r: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("non-finite direction sine {u}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain(format!("range must be positive, got {r}")));
        }
        let zeta = (1.0 - u * u) / (2.0 * r);
        for ((g, off), off_sq) in self
            .geometry
            .iter_mut()
            .zip(&self.offsets)
            .zip(&self.offsets_sq)
        {
            *g = r - off * u + off_sq * zeta;
        }
        Ok(())
    }

    /// Fix a planar-wavefront hypothesis: steering phase `+2π(f/c0)·off·u`,
    /// expressed as the geometry term `g_n = -off·u`.
    pub fn set_farfield(&mut self, u: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("non-finite direction sine {u}")));
        }
        for (g, off) in self.geometry.iter_mut().zip(&self.offsets) {
            *g = -off * u;
        }
        Ok(())
    }

    /// Render the steering vector of the fixed hypothesis at frequency
    /// `ratio · f_c`.
    pub fn steer_at_ratio(&mut self, ratio: f64) {
        let k = -self.carrier_wavenumber * ratio;
        for (z, g) in self.steer.iter_mut().zip(&self.geometry) {
            let (s, c) = (k * g).sin_cos();
            *z = Complex64::new(self.scale * c, self.scale * s);
        }
    }

    /// Render the first subcarrier and prepare per-element step multipliers
    /// for walking the evenly spaced plan with [`advance`].
    ///
    /// [`advance`]: HypothesisWorkspace::advance
    pub fn init_recurrence(&mut self) {
        let k = -self.carrier_wavenumber * self.ratio_step;
        for (z, g) in self.step.iter_mut().zip(&self.geometry) {
            let (s, c) = (k * g).sin_cos();
            *z = Complex64::new(c, s);
        }
        self.steer_at_ratio(self.ratio_first);
    }

    /// Move the rendered steering vector to the next subcarrier.
    pub fn advance(&mut self) {
        for (z, s) in self.steer.iter_mut().zip(&self.step) {
            *z *= *s;
        }
    }

    /// Push the rendered steering vector through the combiner: `w = W^H ā`.
    pub fn combine(&mut self) {
        self.bank.adjoint_times_vector(&self.steer, &mut self.combined);
    }

    /// Noise-subspace projection power of the combined vector at subcarrier
    /// `m`, via the complement identity `‖w‖² − ‖U^S{}^H w‖²` (floored at 0
    /// against rounding).
    pub fn noise_projection(&self, m: usize) -> f64 {
        let w = &self.combined;
        let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let signal = self.subspaces[m].signal();
        let n = signal.nrows();
        let data = signal.as_slice();
        let mut captured = 0.0;
        for col in 0..signal.ncols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, z) in data[col * n..(col + 1) * n].iter().zip(w) {
                acc += v.conj() * z;
            }
            captured += acc.norm_sqr();
        }
        (total - captured).max(0.0)
    }

    /// Rendered steering vector (diagnostics and tests).
    pub fn steering(&self) -> &[Complex64] {
        &self.steer
    }

    /// Combined vector `W^H ā` (diagnostics and tests).
    pub fn combined(&self) -> &[Complex64] {
        &self.combined
    }
}

/// Evaluate one mode's spectrum from precomputed per-subcarrier subspaces.
///
/// Rows (direction indices) are evaluated in parallel; each worker carries
/// its own [`HypothesisWorkspace`]. Per cell the subcarrier denominators are
/// clamped and summed in fixed index order.
pub fn spectrum_from_subspaces(
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    bank: &CombinerBank,
    subspaces: &[SubspacePair],
    spec: &GridSpec,
    mode: &dyn EstimatorMode,
    clamp: f64,
) -> Result<SpectrumGrid> {
    spec.validate()?;
    if !(clamp.is_finite() && clamp > 0.0) {
        return Err(Error::Config(format!("clamp must be positive, got {clamp}")));
    }
    // Validate shared inputs once up front so per-worker construction below
    // cannot fail.
    HypothesisWorkspace::new(cfg, grid, bank, subspaces)?;

    let u_axis = spec.direction_axis();
    let r_axis = if mode.estimates_range() {
        spec.range_axis()
    } else {
        vec![f64::NAN]
    };
    let m_count = grid.len();

    let rows: Result<Vec<Vec<f64>>> = u_axis
        .par_iter()
        .map_init(
            || {
                HypothesisWorkspace::new(cfg, grid, bank, subspaces)
                    .expect("inputs validated above")
            },
            |ws, &u| {
                let mut row = Vec::with_capacity(r_axis.len());
                let mut q = vec![0.0; m_count];
                for &r in &r_axis {
                    mode.denominators(ws, u, r, &mut q)?;
                    let mut p = 0.0;
                    for &qm in &q {
                        p += 1.0 / qm.max(clamp);
                    }
                    row.push(p);
                }
                Ok(row)
            },
        )
        .collect();

    let values: Vec<f64> = rows?.into_iter().flatten().collect();
    SpectrumGrid::from_values(mode.name(), u_axis, r_axis, values, !mode.estimates_range())
}

/// Full estimation front half: noise whitening by the combiner Gram,
/// covariance, per-subcarrier eigensplit, then the mode's spectrum over the
/// grid.
///
/// Whitening (see [`whiten_observations`]) makes the noise entering the
/// eigendecomposition white and the effective per-slot collection unitary;
/// the hypothesis scan then runs against the matching whitened bank. When
/// `W^H W` is proportional to the identity this is a pure rescaling with no
/// effect on the spectrum's shape.
///
/// Identifiability (`K < N`, `T ≥ K`) is checked before any numerical work.
#[allow(clippy::too_many_arguments)]
pub fn combined_spectrum(
    obs: &ObservationSet,
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    n_targets: usize,
    spec: &GridSpec,
    mode: &dyn EstimatorMode,
    clamp: f64,
) -> Result<SpectrumGrid> {
    if n_targets >= cfg.n_antennas() {
        return Err(Error::Identifiability(format!(
            "{} targets leave no noise subspace on {} antennas",
            n_targets,
            cfg.n_antennas()
        )));
    }
    if obs.n_antennas() != cfg.n_antennas() {
        return Err(Error::Dimension(format!(
            "observations span {} antennas, array has {}",
            obs.n_antennas(),
            cfg.n_antennas()
        )));
    }
    if obs.n_subcarriers() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} observation blocks for {} subcarriers",
            obs.n_subcarriers(),
            grid.len()
        )));
    }
    let white_bank = bank.whitened()?;
    let white_obs = whiten_observations(obs, bank)?;
    let subspaces = decompose_all(&white_obs, n_targets)?;
    spectrum_from_subspaces(cfg, grid, &white_bank, &subspaces, spec, mode, clamp)
}
