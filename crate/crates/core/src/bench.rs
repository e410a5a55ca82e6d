//! Monte Carlo benchmark harness: scenarios, trials, RMSE aggregation, SNR
//! sweeps, and the array-gain scan.
//!
//! A [`Scenario`] is a plain serializable description of one experiment
//! (geometry, subcarrier plan, probing, targets, SNR points, seeds, grid,
//! modes). Trials derive all randomness from `mix2(seed, TRIAL, index)`, so
//! any trial can be reproduced in isolation and results never depend on
//! execution order.
//!
//! SNR convention: the reference signal power is `ρ = P_r / (M²N²)` (unity
//! for the default transmit power `P_r = M²N²`), and a trial at `s` dB uses
//! noise power `σ² = ρ · 10^(−s/10)`. Infinite SNR means a noiseless run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{
    nearfield_steering, squint_map, array_gain, ArrayConfig, Target, WidebandGrid,
};
use crate::error::{Error, Result};
use crate::estimator::{
    find_peaks, lookup_mode, spectrum_from_subspaces, Estimates, GridSpec, PeakEstimate,
    SpectrumGrid, DEFAULT_CLAMP,
};
use crate::scene::{
    generate_probe, random_combiner, reflection_coefficients, synthesize_echo,
    whiten_observations,
};
use crate::seed::{self, tags};
use crate::subspace::decompose_all;

/// How a trial obtains its targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetPolicy {
    /// The same explicit targets every trial.
    Fixed { targets: Vec<Target> },
    /// Per-trial draws: direction from a uniform angle in (−90°, 90°) mapped
    /// through the sine, range uniform in
    /// `[min_range_frac, max_range_frac] · d_F`. Draws closer than
    /// `min_separation_cells` direction cells are redrawn wholesale: closer
    /// scenes measure the grid, not the estimator.
    Random {
        #[serde(default = "default_min_range_frac")]
        min_range_frac: f64,
        #[serde(default = "default_max_range_frac")]
        max_range_frac: f64,
        #[serde(default = "default_min_separation_cells")]
        min_separation_cells: usize,
    },
}

fn default_min_range_frac() -> f64 {
    0.3
}

fn default_max_range_frac() -> f64 {
    0.9
}

fn default_min_separation_cells() -> usize {
    3
}

fn default_label() -> String {
    "custom".into()
}

fn default_carrier() -> f64 {
    300e9
}

fn default_bandwidth() -> f64 {
    30e9
}

fn default_subcarriers() -> usize {
    8
}

fn default_antennas() -> usize {
    128
}

fn default_rf_chains() -> usize {
    8
}

fn default_snapshots() -> usize {
    200
}

fn default_targets() -> usize {
    1
}

fn default_policy() -> TargetPolicy {
    TargetPolicy::Random {
        min_range_frac: default_min_range_frac(),
        max_range_frac: default_max_range_frac(),
        min_separation_cells: default_min_separation_cells(),
    }
}

fn default_snr() -> Vec<f64> {
    vec![0.0, 10.0, 20.0]
}

fn default_trials() -> usize {
    50
}

fn default_seed() -> u64 {
    1
}

fn default_step_u() -> f64 {
    0.002
}

fn default_step_r() -> f64 {
    0.1
}

fn default_modes() -> Vec<String> {
    crate::estimator::registered_modes()
        .iter()
        .map(|m| m.name().to_string())
        .collect()
}

fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

/// Full experiment description. Unknown keys are rejected on ingestion so a
/// typo cannot silently fall back to a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_subcarriers")]
    pub n_subcarriers: usize,
    #[serde(default = "default_antennas")]
    pub n_antennas: usize,
    #[serde(default = "default_rf_chains")]
    pub n_rf: usize,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_targets")]
    pub n_targets: usize,
    #[serde(default = "default_policy")]
    pub target_policy: TargetPolicy,
    /// SNR points in dB; `inf` requests a noiseless run.
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_step_u")]
    pub grid_step_u: f64,
    #[serde(default = "default_step_r")]
    pub grid_step_r: f64,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
    /// Total transmit power; defaults to `M²N²`, which normalizes the
    /// per-element reference power to one.
    #[serde(default)]
    pub power_w: Option<f64>,
}

impl Scenario {
    /// Desk-scale preset: full-size array, reduced subcarriers/snapshots and
    /// a single fixed target, so a complete sweep finishes in minutes.
    pub fn desk() -> Self {
        Self {
            label: "desk".into(),
            carrier_hz: 300e9,
            bandwidth_hz: 30e9,
            n_subcarriers: 8,
            n_antennas: 128,
            n_rf: 8,
            snapshots: 200,
            n_targets: 1,
            target_policy: TargetPolicy::Fixed {
                targets: vec![Target::new(std::f64::consts::FRAC_1_SQRT_2, 5.0)],
            },
            snr_db: vec![0.0, 10.0, 20.0],
            trials: 50,
            seed: 1,
            grid_step_u: 0.002,
            grid_step_r: 0.1,
            modes: default_modes(),
            clamp: DEFAULT_CLAMP,
            power_w: None,
        }
    }

    /// Full-scale preset matching the reference simulation defaults
    /// (M=32, N=128, N_RF=8, T=500, K=2, 500 trials). Expect hours of
    /// runtime for a full sweep.
    pub fn paper() -> Self {
        Self {
            label: "paper".into(),
            carrier_hz: 300e9,
            bandwidth_hz: 30e9,
            n_subcarriers: 32,
            n_antennas: 128,
            n_rf: 8,
            snapshots: 500,
            n_targets: 2,
            target_policy: default_policy(),
            snr_db: (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            trials: 500,
            seed: 1,
            grid_step_u: 0.002,
            grid_step_r: 0.1,
            modes: default_modes(),
            clamp: DEFAULT_CLAMP,
            power_w: None,
        }
    }

    pub fn array_config(&self) -> Result<ArrayConfig> {
        ArrayConfig::half_wavelength(self.n_antennas, self.carrier_hz)
    }

    pub fn wideband_grid(&self) -> Result<WidebandGrid> {
        WidebandGrid::new(self.carrier_hz, self.bandwidth_hz, self.n_subcarriers)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::with_steps(&self.array_config()?, self.grid_step_u, self.grid_step_r)
    }

    /// Transmit power, defaulting to `M²N²`.
    pub fn power(&self) -> f64 {
        self.power_w
            .unwrap_or(((self.n_subcarriers * self.n_antennas) as f64).powi(2))
    }

    /// Reference per-element signal power `ρ = P_r / (M²N²)`.
    pub fn reference_power(&self) -> f64 {
        self.power() / ((self.n_subcarriers * self.n_antennas) as f64).powi(2)
    }

    /// Noise power for an SNR point; zero for infinite SNR.
    pub fn noise_power(&self, snr_db: f64) -> f64 {
        if snr_db == f64::INFINITY {
            0.0
        } else {
            self.reference_power() * 10f64.powf(-snr_db / 10.0)
        }
    }

    /// Check the scenario end to end. Identifiability violations surface as
    /// [`Error::Identifiability`]; everything else is a configuration error.
    pub fn validate(&self) -> Result<()> {
        let cfg = self.array_config()?;
        self.wideband_grid()?;
        let spec = self.grid_spec()?;
        if self.n_rf == 0 || self.n_antennas % self.n_rf != 0 {
            return Err(Error::Config(format!(
                "{} rf chains must evenly divide {} antennas",
                self.n_rf, self.n_antennas
            )));
        }
        if self.n_targets == 0 {
            return Err(Error::Config("need at least one target".into()));
        }
        if self.n_targets >= self.n_antennas {
            return Err(Error::Identifiability(format!(
                "{} targets leave no noise subspace on {} antennas",
                self.n_targets, self.n_antennas
            )));
        }
        if self.snapshots < self.n_targets {
            return Err(Error::Identifiability(format!(
                "{} snapshots cannot resolve {} targets",
                self.snapshots, self.n_targets
            )));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR list is empty".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::Config(format!(
                "SNR points must be finite or +inf, got {:?}",
                self.snr_db
            )));
        }
        if !(self.clamp.is_finite() && self.clamp > 0.0) {
            return Err(Error::Config(format!(
                "clamp must be positive, got {}",
                self.clamp
            )));
        }
        if let Some(p) = self.power_w {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Config(format!("power must be positive, got {p}")));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::Config("mode list is empty".into()));
        }
        for name in &self.modes {
            lookup_mode(name)?;
        }
        match &self.target_policy {
            TargetPolicy::Fixed { targets } => {
                if targets.len() != self.n_targets {
                    return Err(Error::Config(format!(
                        "{} fixed targets for n_targets = {}",
                        targets.len(),
                        self.n_targets
                    )));
                }
                for t in targets {
                    if !(t.direction_sine.is_finite() && t.direction_sine.abs() < 1.0) {
                        return Err(Error::Config(format!(
                            "target direction sine must satisfy |u| < 1, got {}",
                            t.direction_sine
                        )));
                    }
                    if !(t.range_m >= spec.r_start && t.range_m <= spec.r_stop) {
                        return Err(Error::Config(format!(
                            "target range {} m outside the search grid [{}, {}] m",
                            t.range_m, spec.r_start, spec.r_stop
                        )));
                    }
                }
            }
            TargetPolicy::Random {
                min_range_frac,
                max_range_frac,
                ..
            } => {
                if !(min_range_frac.is_finite()
                    && max_range_frac.is_finite()
                    && *min_range_frac > 0.0
                    && min_range_frac <= max_range_frac
                    && *max_range_frac <= 1.0)
                {
                    return Err(Error::Config(format!(
                        "range fractions must satisfy 0 < min <= max <= 1, got [{min_range_frac}, {max_range_frac}]"
                    )));
                }
                let d_f = cfg.fraunhofer_distance();
                if min_range_frac * d_f < spec.r_start {
                    return Err(Error::Config(format!(
                        "random ranges start at {} m, below the search grid floor {} m",
                        min_range_frac * d_f,
                        spec.r_start
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw_targets(&self, trial_seed: u64, cfg: &ArrayConfig) -> Result<Vec<Target>> {
        match &self.target_policy {
            TargetPolicy::Fixed { targets } => Ok(targets.clone()),
            TargetPolicy::Random {
                min_range_frac,
                max_range_frac,
                min_separation_cells,
            } => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed::mix2(trial_seed, tags::TARGETS, 0));
                let d_f = cfg.fraunhofer_distance();
                let (lo, hi) = (min_range_frac * d_f, max_range_frac * d_f);
                let min_gap = *min_separation_cells as f64 * self.grid_step_u;
                for _ in 0..10_000 {
                    let draw: Vec<Target> = (0..self.n_targets)
                        .map(|_| {
                            let phi = rng.gen_range(
                                -std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2,
                            );
                            let r = if lo == hi { lo } else { rng.gen_range(lo..hi) };
                            Target::new(phi.sin(), r)
                        })
                        .collect();
                    let separated = draw.iter().enumerate().all(|(i, a)| {
                        draw[..i]
                            .iter()
                            .all(|b| (a.direction_sine - b.direction_sine).abs() >= min_gap)
                    });
                    if separated {
                        return Ok(draw);
                    }
                }
                Err(Error::Config(format!(
                    "could not draw {} targets separated by {} in direction sine",
                    self.n_targets, min_gap
                )))
            }
        }
    }
}

/// Per-mode outcome of one trial. Direction errors are degrees of physical
/// angle; range errors (meters) are absent for direction-only modes.
#[derive(Clone, Debug)]
pub struct ModeOutcome {
    pub mode: String,
    pub estimates: Estimates,
    pub direction_errors_deg: Vec<f64>,
    pub range_errors_m: Option<Vec<f64>>,
    pub seconds: f64,
}

/// One Monte Carlo trial: the drawn truths and every mode's outcome.
/// `degraded` is raised when the scene itself is under-resolved (two truths
/// within one direction cell) or when any mode had to pad its peak list.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial_index: usize,
    pub snr_db: f64,
    pub targets: Vec<Target>,
    pub outcomes: Vec<ModeOutcome>,
    pub degraded: bool,
    pub seconds: f64,
}

/// One trial plus the spectra it evaluated (parallel to `trial.outcomes`).
pub struct SingleRun {
    pub trial: TrialResult,
    pub spectra: Vec<SpectrumGrid>,
}

/// Aggregated accuracy for one mode at one SNR point.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRmse {
    pub mode: String,
    pub rmse_theta_deg: f64,
    pub rmse_range_m: Option<f64>,
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mode: String,
    pub rmse_theta_deg: f64,
    pub rmse_range_m: Option<f64>,
    pub n_trials: usize,
}

/// RMSE-vs-SNR curves for every requested mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepCurve {
    /// SNR points that actually ran (zero-trial points are skipped).
    pub snr_db: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Absolute direction error in degrees of physical angle. Inputs are
/// clamped into the sine domain so grid endpoints a rounding step beyond
/// `|u| = 1` cannot produce NaN.
pub fn direction_error_deg(truth_sine: f64, estimate_sine: f64) -> f64 {
    let t = truth_sine.clamp(-1.0, 1.0).asin();
    let e = estimate_sine.clamp(-1.0, 1.0).asin();
    (t - e).abs().to_degrees()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Assign estimates to truths by exhaustive minimum-total-squared-direction
/// error (degrees). Returns `perm` with `perm[i]` the peak index paired to
/// truth `i`. Exhaustive search keeps the assignment exact but limits the
/// target count.
fn best_assignment(truths: &[Target], peaks: &[PeakEstimate]) -> Result<Vec<usize>> {
    if peaks.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} truths",
            peaks.len(),
            truths.len()
        )));
    }
    if truths.len() > 6 {
        return Err(Error::Config(
            "exhaustive estimate-to-truth assignment supports at most 6 targets".into(),
        ));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(truths.len()) {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let e = direction_error_deg(truths[i].direction_sine, peaks[j].direction_sine);
                e * e
            })
            .sum();
        // Strict improvement only: ties keep the lexicographically first
        // permutation for determinism.
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}

/// Pair one mode's estimates with the truths and return per-target errors:
/// direction in degrees, range in meters (None for direction-only modes).
pub fn assigned_errors(
    truths: &[Target],
    estimates: &Estimates,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let perm = best_assignment(truths, &estimates.peaks)?;
    let direction: Vec<f64> = truths
        .iter()
        .zip(&perm)
        .map(|(t, &j)| direction_error_deg(t.direction_sine, estimates.peaks[j].direction_sine))
        .collect();
    let range = if estimates.peaks.iter().all(|p| p.range_m.is_some()) {
        Some(
            truths
                .iter()
                .zip(&perm)
                .map(|(t, &j)| (t.range_m - estimates.peaks[j].range_m.unwrap()).abs())
                .collect(),
        )
    } else {
        None
    };
    for e in direction.iter().chain(range.iter().flatten()) {
        if !e.is_finite() {
            return Err(Error::Numeric(format!("non-finite estimation error {e}")));
        }
    }
    Ok((direction, range))
}

/// Run one Monte Carlo trial at the given SNR.
pub fn run_trial(scenario: &Scenario, snr_db: f64, trial_index: usize) -> Result<TrialResult> {
    run_trial_impl(scenario, snr_db, trial_index, false).map(|r| r.trial)
}

/// Like [`run_trial`] but also returns the evaluated spectra (one per mode).
pub fn single_run(scenario: &Scenario, snr_db: f64, trial_index: usize) -> Result<SingleRun> {
    run_trial_impl(scenario, snr_db, trial_index, true)
}

fn run_trial_impl(
    scenario: &Scenario,
    snr_db: f64,
    trial_index: usize,
    keep_spectra: bool,
) -> Result<SingleRun> {
    let started = Instant::now();
    let cfg = scenario.array_config()?;
    let grid = scenario.wideband_grid()?;
    let spec = scenario.grid_spec()?;
    let trial_seed = seed::mix2(scenario.seed, tags::TRIAL, trial_index as u64);

    let targets = scenario.draw_targets(trial_seed, &cfg)?;
    let sigma2 = scenario.noise_power(snr_db);
    if !sigma2.is_finite() {
        return Err(Error::Config(format!(
            "SNR {snr_db} dB yields non-finite noise power"
        )));
    }

    let betas = reflection_coefficients(scenario.n_targets, scenario.n_subcarriers, trial_seed);
    let probe = generate_probe(
        &cfg,
        &grid,
        scenario.n_rf,
        scenario.power(),
        scenario.snapshots,
        trial_seed,
    )?;
    let bank = random_combiner(&cfg, scenario.n_rf, trial_seed)?;
    let obs = synthesize_echo(&targets, &betas, &probe, &bank, &cfg, &grid, sigma2, trial_seed)?;
    // Estimation runs on the noise-whitened pair; the decomposition is shared
    // across modes so their comparison sees identical subspaces.
    let white_bank = bank.whitened()?;
    let white_obs = whiten_observations(&obs, &bank)?;
    let subspaces = decompose_all(&white_obs, scenario.n_targets)?;

    let mut outcomes = Vec::with_capacity(scenario.modes.len());
    let mut spectra = Vec::new();
    for name in &scenario.modes {
        let mode = lookup_mode(name)?;
        let mode_started = Instant::now();
        let spectrum = spectrum_from_subspaces(
            &cfg,
            &grid,
            &white_bank,
            &subspaces,
            &spec,
            mode,
            scenario.clamp,
        )?;
        let estimates = find_peaks(&spectrum, scenario.n_targets)?;
        let seconds = mode_started.elapsed().as_secs_f64();
        let (direction_errors_deg, range_errors_m) = assigned_errors(&targets, &estimates)?;
        outcomes.push(ModeOutcome {
            mode: name.clone(),
            estimates,
            direction_errors_deg,
            range_errors_m,
            seconds,
        });
        if keep_spectra {
            spectra.push(spectrum);
        }
    }

    let unresolved = targets.iter().enumerate().any(|(i, a)| {
        targets[..i]
            .iter()
            .any(|b| (a.direction_sine - b.direction_sine).abs() < scenario.grid_step_u)
    });
    let degraded = unresolved || outcomes.iter().any(|o| o.estimates.degraded);

    Ok(SingleRun {
        trial: TrialResult {
            trial_index,
            snr_db,
            targets,
            outcomes,
            degraded,
            seconds: started.elapsed().as_secs_f64(),
        },
        spectra,
    })
}

/// Aggregate trials into per-mode RMSE: direction in degrees, range in
/// meters, both `sqrt(mean of squared per-target errors)` over all trials.
/// Estimates are re-paired to truths here, so the result is invariant to the
/// order peaks were reported in.
pub fn rmse(trials: &[TrialResult]) -> Result<Vec<ModeRmse>> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Config("RMSE needs at least one trial".into()))?;
    let modes: Vec<String> = first.outcomes.iter().map(|o| o.mode.clone()).collect();
    for t in trials {
        let got: Vec<String> = t.outcomes.iter().map(|o| o.mode.clone()).collect();
        if got != modes {
            return Err(Error::Dimension(format!(
                "trial {} ran modes {:?}, expected {:?}",
                t.trial_index, got, modes
            )));
        }
    }

    let mut out = Vec::with_capacity(modes.len());
    for (mi, name) in modes.iter().enumerate() {
        let mut sum_theta = 0.0;
        let mut sum_range = 0.0;
        let mut count = 0usize;
        let mut range_defined = true;
        for t in trials {
            let (direction, range) = assigned_errors(&t.targets, &t.outcomes[mi].estimates)?;
            count += direction.len();
            sum_theta += direction.iter().map(|e| e * e).sum::<f64>();
            match range {
                Some(r) => sum_range += r.iter().map(|e| e * e).sum::<f64>(),
                None => range_defined = false,
            }
        }
        let denom = count.max(1) as f64;
        out.push(ModeRmse {
            mode: name.clone(),
            rmse_theta_deg: (sum_theta / denom).sqrt(),
            rmse_range_m: range_defined.then(|| (sum_range / denom).sqrt()),
        });
    }
    Ok(out)
}

/// Run the full RMSE-vs-SNR experiment. SNR points are processed in input
/// order; a zero-trial request logs a warning and contributes no rows.
pub fn snr_sweep(scenario: &Scenario) -> Result<SweepCurve> {
    let mut curve = SweepCurve::default();
    for &snr in &scenario.snr_db {
        if scenario.trials == 0 {
            log::warn!("skipping SNR point {snr} dB: zero trials requested");
            continue;
        }
        log::info!(
            "sweep '{}': SNR {snr} dB, {} trials, {} modes",
            scenario.label,
            scenario.trials,
            scenario.modes.len()
        );
        let trials: Vec<TrialResult> = (0..scenario.trials)
            .map(|i| run_trial(scenario, snr, i))
            .collect::<Result<_>>()?;
        for m in rmse(&trials)? {
            curve.rows.push(SweepRow {
                snr_db: snr,
                mode: m.mode,
                rmse_theta_deg: m.rmse_theta_deg,
                rmse_range_m: m.rmse_range_m,
                n_trials: trials.len(),
            });
        }
        curve.snr_db.push(snr);
    }
    Ok(curve)
}

/// One `(subcarrier, direction)` sample of the gain scan.
#[derive(Clone, Debug, PartialEq)]
pub struct GainRow {
    pub subcarrier: usize,
    pub frequency_hz: f64,
    pub direction_sine: f64,
    pub gain: f64,
}

/// Per-subcarrier gain maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct GainPeak {
    pub subcarrier: usize,
    pub frequency_hz: f64,
    pub direction_sine: f64,
    pub gain: f64,
}

/// Gain table over `(subcarrier, direction)` plus per-subcarrier argmaxes.
#[derive(Clone, Debug, PartialEq)]
pub struct GainScan {
    pub rows: Vec<GainRow>,
    pub peaks: Vec<GainPeak>,
}

/// Beam-squint visualization: how a carrier-designed beam at `(u0, r0)`
/// drifts across subcarriers.
///
/// For each subcarrier the probe range is pinned to the squinted range of
/// `(u0, r0)` and the direction sweeps the grid; the gain
/// `|a(u0, r0, f_c)^H a(u, r̄_m, f_m)|` then peaks at the squinted direction
/// `(f_c/f_m)·u0`, which is the drift the corrected estimator undoes.
pub fn array_gain_scan(u0: f64, r0: f64, scenario: &Scenario) -> Result<GainScan> {
    if !(u0.is_finite() && u0.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "scan center must satisfy |u| < 1, got {u0}"
        )));
    }
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::Domain(format!(
            "scan range must be positive, got {r0}"
        )));
    }
    let cfg = scenario.array_config()?;
    let grid = scenario.wideband_grid()?;
    let reference = nearfield_steering(&cfg, u0, r0, grid.carrier_hz())?;
    let axis_spec = GridSpec {
        u_start: -1.0,
        u_stop: 1.0,
        u_step: scenario.grid_step_u,
        r_start: r0,
        r_stop: r0,
        r_step: 1.0,
    };
    axis_spec.validate()?;
    let u_axis = axis_spec.direction_axis();

    let mut rows = Vec::with_capacity(grid.len() * u_axis.len());
    let mut peaks = Vec::with_capacity(grid.len());
    for m in 0..grid.len() {
        let f_m = grid.frequency(m)?;
        let matched_range = squint_map(u0, r0, grid.ratio(m)?)?.range_m;
        if !(matched_range > 0.0) {
            return Err(Error::Domain(format!(
                "squinted range collapsed for subcarrier {m} (u0={u0}, r0={r0})"
            )));
        }
        let mut best = GainPeak {
            subcarrier: m,
            frequency_hz: f_m,
            direction_sine: f64::NAN,
            gain: -1.0,
        };
        for &u in &u_axis {
            let probe = nearfield_steering(&cfg, u, matched_range, f_m)?;
            let gain = array_gain(&reference, &probe)?;
            if gain > best.gain {
                best.direction_sine = u;
                best.gain = gain;
            }
            rows.push(GainRow {
                subcarrier: m,
                frequency_hz: f_m,
                direction_sine: u,
                gain,
            });
        }
        peaks.push(best);
    }
    Ok(GainScan { rows, peaks })
}
