//! Echo synthesis: probing signal, phase-shifter combiner bank, reflection
//! coefficients, and the per-subcarrier stacked observations.
//!
//! The receive chain has `N_RF` digital channels behind an analog
//! phase-shifter network, so one pass over the array takes `J = N / N_RF`
//! time slots; slot `j` observes its own `N_RF`-element block through a dense
//! unit-modulus block `W̄_j`. Stacking the slots is equivalent to applying the
//! block-diagonal `N x N` matrix `W^H` in one shot, which is how
//! [`synthesize_echo`] assembles the observation
//!
//! ```text
//! Y_m = W^H (A_m diag(beta_m) A_m^T X_m + noise_m),      m = 1..M
//! ```
//!
//! with `A_m` the steering matrix of the physical target locations evaluated
//! at subcarrier frequency `f_m`, `X_m = F S_m` the probe, and circular
//! complex Gaussian noise. Evaluating the steering at `f_m` rather than at
//! the carrier is what puts beam squint into the data: to a hypothesis scan
//! performed at the carrier frequency, the energy of a target at `(u, r)`
//! appears at `squint_map(u, r, f_m / f_c)`, drifting outward below the
//! carrier and inward above it. Those apparent locations are recorded on the
//! [`ObservationSet`] for diagnostics, with a flag when any of them leaves
//! the visible region.
//!
//! Noise is drawn once per subcarrier; because each slot's combiner block
//! touches a disjoint row range, a single `N x T` draw already gives
//! independent noise across slots. After combining, the noise covariance is
//! `sigma^2 * blkdiag(W̄_j^H W̄_j)` with diagonal `N_RF * sigma^2 / N`; it is
//! proportional to the identity only in the fully digital case `N_RF = 1`.
//!
//! All draws are derived from a caller seed through purpose-tagged streams
//! ([`crate::seed`]), with per-subcarrier streams for symbols and noise, so
//! synthesis is reproducible and schedulable in any order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{
    nearfield_steering, squint_map, ArrayConfig, SquintedLocation, Target, WidebandGrid,
};
use crate::error::{Error, Result};
use crate::seed::{self, tags};

const TWO_PI: f64 = std::f64::consts::TAU;

/// One draw from CN(0, 1): independent real and imaginary parts of
/// variance 1/2.
fn standard_complex(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. CN(0, 1) entries, filled in column-major order.
pub fn standard_complex_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Transmit-side probe: precoder, per-subcarrier symbol streams, and the
/// resulting antenna-domain signals.
#[derive(Clone, Debug)]
pub struct ProbeSignal {
    precoder: DMatrix<Complex64>,
    symbols: Vec<DMatrix<Complex64>>,
    transmit: Vec<DMatrix<Complex64>>,
    power_w: f64,
    snapshots: usize,
}

impl ProbeSignal {
    /// Precoder `F` (`N x N_RF`), unit-modulus entries scaled by
    /// `1/sqrt(N * N_RF)` so that `diag(F F^H) = 1/N` and `trace(F F^H) = 1`.
    pub fn precoder(&self) -> &DMatrix<Complex64> {
        &self.precoder
    }

    /// Symbol stream `S_m` (`N_RF x T`) for subcarrier `m`.
    pub fn symbols(&self, m: usize) -> &DMatrix<Complex64> {
        &self.symbols[m]
    }

    /// Antenna-domain probe `X_m = F S_m` (`N x T`).
    pub fn transmit(&self, m: usize) -> &DMatrix<Complex64> {
        &self.transmit[m]
    }

    pub fn n_subcarriers(&self) -> usize {
        self.transmit.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.precoder.nrows()
    }

    pub fn power_w(&self) -> f64 {
        self.power_w
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }
}

/// Draws the probe: random-phase precoder plus i.i.d. CN(0, P_r/M) symbols
/// per subcarrier, giving `trace((1/T) E{X_m X_m^H}) = P_r / M`.
///
/// With `N_RF < N` the probe covariance has rank at most `N_RF`, so
/// proportionality to the identity holds on the diagonal and in trace, not
/// as a full matrix.
pub fn generate_probe(
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    n_rf: usize,
    power_w: f64,
    snapshots: usize,
    seed: u64,
) -> Result<ProbeSignal> {
    if snapshots == 0 {
        return Err(Error::Config("need at least one snapshot".into()));
    }
    if !(power_w.is_finite() && power_w >= 0.0) {
        return Err(Error::Config(format!(
            "transmit power must be non-negative, got {power_w}"
        )));
    }
    if n_rf == 0 || n_rf > cfg.n_antennas() {
        return Err(Error::Config(format!(
            "rf chain count {n_rf} out of range for {} antennas",
            cfg.n_antennas()
        )));
    }
    let n = cfg.n_antennas();
    let m_count = grid.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::PRECODER, 0));
    let f_scale = 1.0 / ((n * n_rf) as f64).sqrt();
    let precoder = DMatrix::from_fn(n, n_rf, |_, _| {
        Complex64::from_polar(f_scale, rng.gen_range(0.0..TWO_PI))
    });

    let symbol_scale = (power_w / m_count as f64).sqrt();
    let mut symbols = Vec::with_capacity(m_count);
    let mut transmit = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let mut srng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::SYMBOLS, m as u64));
        let s = standard_complex_matrix(n_rf, snapshots, &mut srng).map(|z| z * symbol_scale);
        transmit.push(&precoder * &s);
        symbols.push(s);
    }

    Ok(ProbeSignal {
        precoder,
        symbols,
        transmit,
        power_w,
        snapshots,
    })
}

/// Block-diagonal analog combiner: `J = N / N_RF` dense unit-modulus blocks
/// `W̄_j` (`N_RF x N_RF`) along the diagonal of the full `N x N` matrix.
#[derive(Clone, Debug)]
pub struct CombinerBank {
    blocks: Vec<DMatrix<Complex64>>,
    full: DMatrix<Complex64>,
    n_rf: usize,
}

impl CombinerBank {
    pub fn n_antennas(&self) -> usize {
        self.full.nrows()
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    pub fn n_slots(&self) -> usize {
        self.blocks.len()
    }

    /// Dense block `W̄_j`.
    pub fn block(&self, j: usize) -> &DMatrix<Complex64> {
        &self.blocks[j]
    }

    /// Slot combiner `W_j` (`N x N_RF`): block `j` embedded in zeros.
    pub fn slot_combiner(&self, j: usize) -> DMatrix<Complex64> {
        let n = self.n_antennas();
        let mut w = DMatrix::zeros(n, self.n_rf);
        w.view_mut((j * self.n_rf, 0), (self.n_rf, self.n_rf))
            .copy_from(&self.blocks[j]);
        w
    }

    /// Full block-diagonal `W` (`N x N`).
    pub fn full(&self) -> &DMatrix<Complex64> {
        &self.full
    }

    /// `W^H x`, applied block by block (each slot only sees its own rows).
    pub fn adjoint_times(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if x.nrows() != self.n_antennas() {
            return Err(Error::Dimension(format!(
                "combiner expects {} rows, got {}",
                self.n_antennas(),
                x.nrows()
            )));
        }
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, block) in self.blocks.iter().enumerate() {
            let rows = j * self.n_rf..(j + 1) * self.n_rf;
            let src = x.view((rows.start, 0), (self.n_rf, x.ncols()));
            y.view_mut((rows.start, 0), (self.n_rf, x.ncols()))
                .copy_from(&(block.adjoint() * src));
        }
        Ok(y)
    }

    /// `W^H a` for a single vector, written into `out` without allocating.
    /// This is the hot path of the spectrum search.
    pub fn adjoint_times_vector(&self, a: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(a.len(), self.n_antennas());
        debug_assert_eq!(out.len(), self.n_antennas());
        let nrf = self.n_rf;
        for (j, block) in self.blocks.iter().enumerate() {
            let base = j * nrf;
            for col in 0..nrf {
                // Column `col` of W̄_j is row `col` of W̄_j^H.
                let mut acc = Complex64::new(0.0, 0.0);
                for row in 0..nrf {
                    acc += block[(row, col)].conj() * a[base + row];
                }
                out[base + col] = acc;
            }
        }
    }

    /// Inverse square roots of the per-block Grams `W̄_j^H W̄_j`: the
    /// block-diagonal factor that whitens the combined noise covariance
    /// `sigma^2 blkdiag(W̄_j^H W̄_j)` down to `sigma^2 I`.
    fn gram_inverse_sqrt_blocks(&self) -> Result<Vec<DMatrix<Complex64>>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(j, block)| {
                let gram = block.adjoint() * block;
                let eig = gram.symmetric_eigen();
                let floor = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v)) * 1e-12;
                if eig.eigenvalues.iter().any(|v| *v <= floor) {
                    return Err(Error::Numeric(format!(
                        "combiner block {j} is numerically singular; cannot whiten"
                    )));
                }
                let v = &eig.eigenvectors;
                let inv_sqrt =
                    DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
                        Complex64::new(1.0 / l.sqrt(), 0.0)
                    }));
                Ok(v * inv_sqrt * v.adjoint())
            })
            .collect()
    }

    /// Noise-whitened view of the bank: blocks `B_j = W̄_j (W̄_j^H W̄_j)^{-1/2}`,
    /// so that adjoint application realizes `(W̄_j^H W̄_j)^{-1/2} W̄_j^H` — the
    /// unitary polar factor of each slot's collection. Estimation runs against
    /// this view together with [`whiten_observations`]; when `W^H W` is
    /// proportional to the identity (the design intent of the random-phase
    /// combiner) it coincides with the raw bank up to scale.
    pub fn whitened(&self) -> Result<CombinerBank> {
        let inv_sqrts = self.gram_inverse_sqrt_blocks()?;
        let n = self.n_antennas();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut full = DMatrix::zeros(n, n);
        for (j, (block, g)) in self.blocks.iter().zip(&inv_sqrts).enumerate() {
            let b = block * g;
            full.view_mut((j * self.n_rf, j * self.n_rf), (self.n_rf, self.n_rf))
                .copy_from(&b);
            blocks.push(b);
        }
        Ok(CombinerBank {
            blocks,
            full,
            n_rf: self.n_rf,
        })
    }
}

/// Applies the noise-whitening factor `blkdiag((W̄_j^H W̄_j)^{-1/2})` to every
/// per-subcarrier observation, turning the combined noise covariance into
/// `sigma^2 I` and the effective steering into the unitary image
/// `(W̄_j^H W̄_j)^{-1/2} W̄_j^H a` that [`CombinerBank::whitened`] renders.
///
/// Subspace methods assume white noise; running them on the whitened pair
/// also keeps hypothesis-space inner products equal to antenna-domain ones,
/// which an ill-conditioned combiner draw would otherwise distort.
pub fn whiten_observations(obs: &ObservationSet, bank: &CombinerBank) -> Result<ObservationSet> {
    if obs.n_antennas() != bank.n_antennas() {
        return Err(Error::Dimension(format!(
            "observations span {} antennas, combiner {}",
            obs.n_antennas(),
            bank.n_antennas()
        )));
    }
    let inv_sqrts = bank.gram_inverse_sqrt_blocks()?;
    let nrf = bank.n_rf();
    let observations = obs
        .observations
        .iter()
        .map(|y| {
            let mut z = DMatrix::zeros(y.nrows(), y.ncols());
            for (j, g) in inv_sqrts.iter().enumerate() {
                let rows = j * nrf;
                let src = y.view((rows, 0), (nrf, y.ncols()));
                z.view_mut((rows, 0), (nrf, y.ncols())).copy_from(&(g * src));
            }
            z
        })
        .collect();
    Ok(ObservationSet {
        observations,
        noise_power: obs.noise_power,
        apparent: obs.apparent.clone(),
        out_of_region: obs.out_of_region,
    })
}

/// Draws the combiner bank: every `W̄_j` entry is `(1/sqrt(N)) e^{j phi}` with
/// `phi` uniform on `[-pi/2, pi/2]`, so `||W||_F^2 = N_RF`.
pub fn random_combiner(cfg: &ArrayConfig, n_rf: usize, seed: u64) -> Result<CombinerBank> {
    let n = cfg.n_antennas();
    if n_rf == 0 || n % n_rf != 0 {
        return Err(Error::Config(format!(
            "antenna count {n} not divisible into rf-chain blocks of {n_rf}"
        )));
    }
    let slots = n / n_rf;
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::COMBINER, 0));
    let half_pi = std::f64::consts::FRAC_PI_2;

    let mut blocks = Vec::with_capacity(slots);
    let mut full = DMatrix::zeros(n, n);
    for j in 0..slots {
        let block = DMatrix::from_fn(n_rf, n_rf, |_, _| {
            Complex64::from_polar(scale, rng.gen_range(-half_pi..half_pi))
        });
        full.view_mut((j * n_rf, j * n_rf), (n_rf, n_rf))
            .copy_from(&block);
        blocks.push(block);
    }
    Ok(CombinerBank {
        blocks,
        full,
        n_rf,
    })
}

/// Per-trial reflection coefficients, i.i.d. CN(0, 1): one row per target,
/// one column per subcarrier, drawn in column-major order.
pub fn reflection_coefficients(
    n_targets: usize,
    n_subcarriers: usize,
    seed: u64,
) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::REFLECTIONS, 0));
    standard_complex_matrix(n_targets, n_subcarriers, &mut rng)
}

/// Per-subcarrier scene matrices for one subcarrier index: steering columns,
/// their combined images, and the reflection-weighted Gram matrix that shows
/// up in the covariance of the observations.
#[derive(Clone, Debug)]
pub struct SceneMatrices {
    /// `A_m` (`N x K`): physical-location steering at `f_m`.
    pub steering: DMatrix<Complex64>,
    /// `D_m = W^H A_m` (`N x K`).
    pub combined: DMatrix<Complex64>,
    /// `diag(beta_m)` entries (`K`).
    pub reflections: DVector<Complex64>,
    /// `Pi_m (A_m^T A_m^*) Pi_m^H` (`K x K`), Hermitian positive semidefinite.
    pub weighted_gram: DMatrix<Complex64>,
}

/// Builds the scene matrices of subcarrier `m` for a target list.
pub fn scene_matrices(
    targets: &[Target],
    betas: &DMatrix<Complex64>,
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    m: usize,
) -> Result<SceneMatrices> {
    let k = targets.len();
    if betas.nrows() != k || betas.ncols() != grid.len() {
        return Err(Error::Dimension(format!(
            "reflection matrix is {}x{}, expected {}x{}",
            betas.nrows(),
            betas.ncols(),
            k,
            grid.len()
        )));
    }
    let f_m = grid.frequency(m)?;
    let n = cfg.n_antennas();
    let mut steering = DMatrix::zeros(n, k);
    for (col, t) in targets.iter().enumerate() {
        let a = nearfield_steering(cfg, t.direction_sine, t.range_m, f_m)?;
        steering.column_mut(col).copy_from(a.entries());
    }
    let combined = bank.adjoint_times(&steering)?;
    let reflections = DVector::from_iterator(k, (0..k).map(|row| betas[(row, m)]));
    let pi = DMatrix::from_diagonal(&reflections);
    let gram = steering.transpose() * steering.conjugate();
    let weighted_gram = &pi * gram * pi.adjoint();
    Ok(SceneMatrices {
        steering,
        combined,
        reflections,
        weighted_gram,
    })
}

/// Stacked per-subcarrier observations plus squint bookkeeping.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    observations: Vec<DMatrix<Complex64>>,
    noise_power: f64,
    /// `apparent[k][m]`: where target `k`'s energy at subcarrier `m` appears
    /// to a carrier-frequency hypothesis (squint ratio `f_m / f_c`).
    apparent: Vec<Vec<SquintedLocation>>,
    out_of_region: bool,
}

impl ObservationSet {
    pub fn n_subcarriers(&self) -> usize {
        self.observations.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.observations.first().map_or(0, |y| y.nrows())
    }

    pub fn snapshots(&self) -> usize {
        self.observations.first().map_or(0, |y| y.ncols())
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Observation `Y_m` (`N x T`).
    pub fn observation(&self, m: usize) -> &DMatrix<Complex64> {
        &self.observations[m]
    }

    pub fn per_subcarrier(&self) -> &[DMatrix<Complex64>] {
        &self.observations
    }

    /// Apparent (carrier-referenced) location of target `k` at subcarrier `m`.
    pub fn apparent(&self, k: usize, m: usize) -> &SquintedLocation {
        &self.apparent[k][m]
    }

    /// True when any apparent direction sine left `[-1, 1]`.
    pub fn out_of_region(&self) -> bool {
        self.out_of_region
    }
}

/// Synthesizes the stacked observations `Y_m = W^H (A_m diag(beta_m) A_m^T
/// X_m + noise)` for every subcarrier.
///
/// Noise entries are i.i.d. CN(0, `noise_power`), drawn from a dedicated
/// stream per subcarrier so results do not depend on evaluation order. An
/// empty target list yields pure combined noise (or exact zeros when
/// `noise_power` is zero as well).
pub fn synthesize_echo(
    targets: &[Target],
    betas: &DMatrix<Complex64>,
    probe: &ProbeSignal,
    bank: &CombinerBank,
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    noise_power: f64,
    seed: u64,
) -> Result<ObservationSet> {
    let n = cfg.n_antennas();
    let k = targets.len();
    let m_count = grid.len();
    if probe.n_antennas() != n || bank.n_antennas() != n {
        return Err(Error::Dimension(format!(
            "probe ({} antennas) / combiner ({}) / array ({}) disagree",
            probe.n_antennas(),
            bank.n_antennas(),
            n
        )));
    }
    if probe.n_subcarriers() != m_count {
        return Err(Error::Dimension(format!(
            "probe has {} subcarriers, grid has {}",
            probe.n_subcarriers(),
            m_count
        )));
    }
    if betas.nrows() != k || betas.ncols() != m_count {
        return Err(Error::Dimension(format!(
            "reflection matrix is {}x{}, expected {}x{}",
            betas.nrows(),
            betas.ncols(),
            k,
            m_count
        )));
    }
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::Config(format!(
            "noise power must be non-negative, got {noise_power}"
        )));
    }
    for (idx, t) in targets.iter().enumerate() {
        if !(t.direction_sine.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "target {idx}: |direction sine| must be < 1, got {}",
                t.direction_sine
            )));
        }
        if !(t.range_m.is_finite() && t.range_m > 0.0) {
            return Err(Error::Domain(format!(
                "target {idx}: range must be positive, got {}",
                t.range_m
            )));
        }
    }

    // Carrier-referenced apparent locations; flag any that leave the grid.
    let mut out_of_region = false;
    let mut apparent = Vec::with_capacity(k);
    for t in targets {
        let mut per_subcarrier = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let ratio = grid.frequency(m)? / grid.carrier_hz();
            let loc = squint_map(t.direction_sine, t.range_m, ratio)?;
            out_of_region |= !loc.visible;
            per_subcarrier.push(loc);
        }
        apparent.push(per_subcarrier);
    }
    if out_of_region {
        log::warn!(
            "squinted target locations leave the visible region at band-edge subcarriers"
        );
    }

    let t_count = probe.snapshots();
    let noise_scale = noise_power.sqrt();
    let mut observations = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let f_m = grid.frequency(m)?;
        let mut field = DMatrix::<Complex64>::zeros(n, t_count);
        if k > 0 {
            let mut a_m = DMatrix::zeros(n, k);
            for (col, t) in targets.iter().enumerate() {
                let a = nearfield_steering(cfg, t.direction_sine, t.range_m, f_m)?;
                a_m.column_mut(col).copy_from(a.entries());
            }
            // A_m diag(beta) A_m^T X_m, built right to left.
            let mut echoed = a_m.transpose() * probe.transmit(m);
            for (row, mut r) in echoed.row_iter_mut().enumerate() {
                r *= betas[(row, m)];
            }
            field = &a_m * echoed;
        }
        if noise_power > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::NOISE, m as u64));
            for z in field.iter_mut() {
                *z += standard_complex(&mut rng) * noise_scale;
            }
        }
        observations.push(bank.adjoint_times(&field)?);
    }

    Ok(ObservationSet {
        observations,
        noise_power,
        apparent,
        out_of_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn cfg(n: usize) -> ArrayConfig {
        ArrayConfig::half_wavelength(n, 300e9).unwrap()
    }

    fn grid(m: usize) -> WidebandGrid {
        WidebandGrid::new(300e9, 30e9, m).unwrap()
    }

    // -------- probe --------

    #[test]
    fn probe_precoder_rows_have_power_one_over_n() {
        let p = generate_probe(&cfg(16), &grid(2), 4, 2.0, 8, 11).unwrap();
        let f = p.precoder();
        let mut trace = 0.0;
        for i in 0..16 {
            let row_power: f64 = (0..4).map(|j| f[(i, j)].norm_sqr()).sum();
            assert_abs_diff_eq!(row_power, 1.0 / 16.0, epsilon = 1e-14);
            trace += row_power;
        }
        assert_abs_diff_eq!(trace, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn probe_trace_power_matches_the_target_level() {
        // trace((1/T) X X^H) concentrates at P_r / M.
        let (power, m_count, t) = (3.0, 2, 10_000);
        let p = generate_probe(&cfg(16), &grid(m_count), 4, power, t, 5).unwrap();
        for m in 0..m_count {
            let x = p.transmit(m);
            let trace: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / t as f64;
            let expected = power / m_count as f64;
            assert!(
                (trace - expected).abs() / expected < 0.05,
                "subcarrier {m}: empirical trace {trace}, expected {expected}"
            );
        }
    }

    #[test]
    fn probe_is_deterministic_and_zero_at_zero_power() {
        let a = generate_probe(&cfg(8), &grid(3), 2, 2.0, 16, 99).unwrap();
        let b = generate_probe(&cfg(8), &grid(3), 2, 2.0, 16, 99).unwrap();
        for m in 0..3 {
            assert_eq!(a.transmit(m), b.transmit(m));
        }
        let z = generate_probe(&cfg(8), &grid(3), 2, 0.0, 16, 99).unwrap();
        for m in 0..3 {
            assert!(z.transmit(m).iter().all(|v| v.norm() == 0.0));
        }
        assert!(matches!(
            generate_probe(&cfg(8), &grid(3), 2, 2.0, 0, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_probe(&cfg(8), &grid(3), 0, 2.0, 16, 1),
            Err(Error::Config(_))
        ));
    }

    // -------- combiner --------

    #[test]
    fn combiner_blocks_are_unit_modulus_with_bounded_phase() {
        let n = 32;
        let bank = random_combiner(&cfg(n), 8, 21).unwrap();
        assert_eq!(bank.n_slots(), 4);
        let expected = 1.0 / (n as f64).sqrt();
        for j in 0..4 {
            for z in bank.block(j).iter() {
                assert_abs_diff_eq!(z.norm(), expected, epsilon = 1e-14);
                // Phase within [-pi/2, pi/2] means non-negative real part.
                assert!(z.re >= 0.0);
            }
        }
        let fro2: f64 = bank.full().iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(fro2, 8.0, epsilon = 1e-10);
    }

    #[test]
    fn combiner_slots_are_zero_outside_their_block() {
        let bank = random_combiner(&cfg(12), 3, 77).unwrap();
        for j in 0..4 {
            let w_j = bank.slot_combiner(j);
            for row in 0..12 {
                for col in 0..3 {
                    let inside = row / 3 == j;
                    if !inside {
                        assert_eq!(w_j[(row, col)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
        assert!(matches!(
            random_combiner(&cfg(12), 5, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn combiner_vector_application_matches_dense_adjoint_multiply() {
        let bank = random_combiner(&cfg(24), 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a: Vec<Complex64> = (0..24).map(|_| standard_complex(&mut rng)).collect();
        let dense = bank.full().adjoint() * DVector::from_column_slice(&a);
        let mut fast = vec![Complex64::new(0.0, 0.0); 24];
        bank.adjoint_times_vector(&a, &mut fast);
        for i in 0..24 {
            assert!((dense[i] - fast[i]).norm() < 1e-13);
        }
    }

    // -------- reflections --------

    #[test]
    fn reflections_are_unit_variance_and_deterministic() {
        let b = reflection_coefficients(100, 100, 7);
        let mean_power: f64 =
            b.iter().map(|z| z.norm_sqr()).sum::<f64>() / (b.nrows() * b.ncols()) as f64;
        assert!(
            (mean_power - 1.0).abs() < 0.05,
            "mean |beta|^2 = {mean_power}"
        );
        assert_eq!(b, reflection_coefficients(100, 100, 7));
        assert_ne!(b, reflection_coefficients(100, 100, 8));
        let single = reflection_coefficients(1, 1, 7);
        assert_eq!((single.nrows(), single.ncols()), (1, 1));
    }

    // -------- echo synthesis --------

    fn tiny_scene() -> (ArrayConfig, WidebandGrid, ProbeSignal, CombinerBank) {
        let c = cfg(16);
        let g = grid(3);
        let probe = generate_probe(&c, &g, 4, (3 * 16 * 16) as f64, 24, 5).unwrap();
        let bank = random_combiner(&c, 4, 5).unwrap();
        (c, g, probe, bank)
    }

    #[test]
    fn no_targets_and_no_noise_yields_exact_zeros() {
        let (c, g, probe, bank) = tiny_scene();
        let betas = DMatrix::zeros(0, 3);
        let obs = synthesize_echo(&[], &betas, &probe, &bank, &c, &g, 0.0, 1).unwrap();
        for m in 0..3 {
            assert!(obs.observation(m).iter().all(|z| z.norm() == 0.0));
        }
        assert!(!obs.out_of_region());
    }

    #[test]
    fn single_target_noiseless_observation_has_rank_one() {
        let (c, g, probe, bank) = tiny_scene();
        let targets = [Target::new(0.4, 0.05)];
        let betas = reflection_coefficients(1, 3, 2);
        let obs = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, 0.0, 1).unwrap();
        for m in 0..3 {
            let sv = obs.observation(m).clone().svd(false, false).singular_values;
            assert!(sv[0] > 0.0);
            for i in 1..sv.len() {
                assert!(
                    sv[i] / sv[0] < 1e-10,
                    "subcarrier {m}: sigma_{i}/sigma_0 = {}",
                    sv[i] / sv[0]
                );
            }
        }
    }

    #[test]
    fn noiseless_observations_stay_in_the_combined_steering_span() {
        let (c, g, probe, bank) = tiny_scene();
        let targets = [Target::new(0.4, 0.05), Target::new(-0.3, 0.08)];
        let betas = reflection_coefficients(2, 3, 9);
        let obs = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, 0.0, 1).unwrap();
        for m in 0..3 {
            let scene = scene_matrices(&targets, &betas, &bank, &c, &g, m).unwrap();
            let q = scene.combined.clone().qr().q();
            let y = obs.observation(m);
            let residual = y - &q * (q.adjoint() * y);
            assert!(
                residual.norm() / y.norm() < 1e-10,
                "subcarrier {m}: span residual {}",
                residual.norm() / y.norm()
            );
        }
    }

    #[test]
    fn stacking_slots_reproduces_the_one_shot_combining() {
        let (c, g, probe, bank) = tiny_scene();
        let targets = [Target::new(0.2, 0.06)];
        let betas = reflection_coefficients(1, 3, 4);
        let noise_power = 0.5;
        let seed = 31;
        let obs = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, noise_power, seed)
            .unwrap();

        for m in 0..3 {
            // Rebuild the pre-combining field with the same noise stream.
            let f_m = g.frequency(m).unwrap();
            let a = nearfield_steering(&c, 0.2, 0.06, f_m).unwrap();
            let a_col = DMatrix::from_column_slice(16, 1, a.as_slice());
            let mut echoed = a_col.transpose() * probe.transmit(m);
            echoed *= betas[(0, m)];
            let mut field = &a_col * echoed;
            let mut rng = ChaCha8Rng::seed_from_u64(seed::mix2(seed, tags::NOISE, m as u64));
            for z in field.iter_mut() {
                *z += standard_complex(&mut rng) * noise_power.sqrt();
            }

            // Slot-by-slot collection with the embedded-zero slot combiners.
            let mut stacked = DMatrix::zeros(16, 24);
            for j in 0..bank.n_slots() {
                let rows = j * 4;
                let slot = bank.slot_combiner(j).adjoint() * &field;
                stacked.view_mut((rows, 0), (4, 24)).copy_from(&slot);
            }

            let diff = (&stacked - obs.observation(m)).norm();
            assert!(diff < 1e-12, "subcarrier {m}: stacking mismatch {diff}");
        }
    }

    #[test]
    fn combined_noise_covariance_is_white_in_the_fully_digital_case() {
        // With one rf chain per slot the blocks are scalars of modulus
        // 1/sqrt(N), so W^H W = (1/N) I exactly and the combined noise
        // covariance must converge to (sigma^2/N) I.
        let n = 32;
        let t = 50_000;
        let c = cfg(n);
        let g = WidebandGrid::new(300e9, 30e9, 1).unwrap();
        let probe = generate_probe(&c, &g, 1, 1.0, t, 3).unwrap();
        let bank = random_combiner(&c, 1, 3).unwrap();
        let betas = DMatrix::zeros(0, 1);
        let obs = synthesize_echo(&[], &betas, &probe, &bank, &c, &g, 1.0, 12).unwrap();

        let y = obs.observation(0);
        let r = (y * y.adjoint()).unscale(t as f64);
        let eye = DMatrix::<Complex64>::identity(n, n).unscale(n as f64);
        let rel = (&r - &eye).norm() / eye.norm();
        assert!(rel < 0.05, "noise covariance relative error {rel}");
    }

    #[test]
    fn whitened_bank_applies_a_unitary_per_slot() {
        let bank = random_combiner(&cfg(24), 4, 9).unwrap();
        let white = bank.whitened().unwrap();
        let eye = DMatrix::<Complex64>::identity(4, 4);
        for j in 0..white.n_slots() {
            // adjoint_times applies B_j^H; unitarity means B_j^H B_j = I.
            let b = white.block(j);
            assert!((b.adjoint() * b - &eye).norm() < 1e-10, "slot {j}");
        }
        // Whitened combining of a steering vector preserves its norm.
        let a = nearfield_steering(&cfg(24), 0.3, 0.07, 300e9).unwrap();
        let mut out = vec![Complex64::new(0.0, 0.0); 24];
        white.adjoint_times_vector(a.as_slice(), &mut out);
        let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn whitening_observations_matches_the_dense_factor() {
        let (c, g, probe, bank) = tiny_scene();
        let targets = [Target::new(0.3, 0.06)];
        let betas = reflection_coefficients(1, 3, 8);
        let obs = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, 0.25, 3).unwrap();
        let white = whiten_observations(&obs, &bank).unwrap();

        // Dense route: G^{-1/2} from the full combiner Gram.
        let gram = bank.full().adjoint() * bank.full();
        let eig = gram.symmetric_eigen();
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
            Complex64::new(1.0 / l.sqrt(), 0.0)
        }));
        let factor = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        for m in 0..3 {
            let dense = &factor * obs.observation(m);
            let diff = (&dense - white.observation(m)).norm() / dense.norm();
            assert!(diff < 1e-9, "subcarrier {m}: whitening mismatch {diff}");
        }
        // Bookkeeping rides along unchanged.
        assert_eq!(white.noise_power(), obs.noise_power());
        assert_eq!(white.out_of_region(), obs.out_of_region());
        assert_eq!(white.apparent(0, 2), obs.apparent(0, 2));
    }

    #[test]
    fn whitened_noise_covariance_is_white() {
        // Noise-only scene, hybrid collection: raw combined covariance is
        // blkdiag(W̄_j^H W̄_j)-colored, whitened covariance approaches
        // sigma^2 I.
        let n = 32;
        let t = 50_000;
        let c = cfg(n);
        let g = WidebandGrid::new(300e9, 30e9, 1).unwrap();
        let probe = generate_probe(&c, &g, 4, 1.0, t, 3).unwrap();
        let bank = random_combiner(&c, 4, 3).unwrap();
        let betas = DMatrix::zeros(0, 1);
        let obs = synthesize_echo(&[], &betas, &probe, &bank, &c, &g, 1.0, 12).unwrap();
        let white = whiten_observations(&obs, &bank).unwrap();

        let y = white.observation(0);
        let r = (y * y.adjoint()).unscale(t as f64);
        let eye = DMatrix::<Complex64>::identity(n, n);
        let rel = (&r - &eye).norm() / eye.norm();
        assert!(rel < 0.05, "whitened noise covariance relative error {rel}");
    }

    #[test]
    fn band_edge_squint_can_leave_the_visible_region() {
        let (c, g, probe, bank) = tiny_scene();
        let betas = reflection_coefficients(1, 3, 2);
        let steep = [Target::new(0.98, 0.05)];
        let obs = synthesize_echo(&steep, &betas, &probe, &bank, &c, &g, 0.0, 1).unwrap();
        // Above-carrier subcarriers magnify the apparent direction.
        assert!(obs.out_of_region());
        assert!(obs.apparent(0, 2).direction_sine > 1.0);
        assert!(!obs.apparent(0, 2).visible);

        let mild = [Target::new(0.1, 0.05)];
        let obs = synthesize_echo(&mild, &betas, &probe, &bank, &c, &g, 0.0, 1).unwrap();
        assert!(!obs.out_of_region());
        // Center subcarrier of an odd grid sits at the carrier: no squint.
        assert_eq!(obs.apparent(0, 1).delta_u, 0.0);
        assert_eq!(obs.apparent(0, 1).delta_r, 0.0);
    }

    #[test]
    fn scene_matrices_expose_the_apparent_location_structure() {
        let (c, g, probe, bank) = tiny_scene();
        let _ = probe;
        let targets = [Target::new(0.5, 0.06)];
        let betas = reflection_coefficients(1, 3, 6);
        for m in 0..3 {
            let scene = scene_matrices(&targets, &betas, &bank, &c, &g, m).unwrap();
            // weighted_gram is Hermitian PSD.
            let wg = &scene.weighted_gram;
            assert!((wg - wg.adjoint()).norm() < 1e-12);
            let eig = wg.clone().symmetric_eigen();
            for v in eig.eigenvalues.iter() {
                assert!(*v >= -1e-10 * wg.norm());
            }
            // Combined column aligns with the combined carrier steering of
            // the apparent location (they differ by a global phase only).
            let ratio = g.frequency(m).unwrap() / g.carrier_hz();
            let loc = squint_map(0.5, 0.06, ratio).unwrap();
            let ap = nearfield_steering(&c, loc.direction_sine, loc.range_m, g.carrier_hz())
                .unwrap();
            let ap_col = bank
                .adjoint_times(&DMatrix::from_column_slice(16, 1, ap.as_slice()))
                .unwrap();
            let d = scene.combined.column(0);
            let corr = d.dotc(&ap_col.column(0)).norm() / (d.norm() * ap_col.norm());
            assert_relative_eq!(corr, 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn synthesis_validates_inputs() {
        let (c, g, probe, bank) = tiny_scene();
        let betas = reflection_coefficients(1, 3, 2);
        let bad_dir = [Target::new(1.0, 0.05)];
        assert!(matches!(
            synthesize_echo(&bad_dir, &betas, &probe, &bank, &c, &g, 0.0, 1),
            Err(Error::Domain(_))
        ));
        let bad_range = [Target::new(0.1, 0.0)];
        assert!(matches!(
            synthesize_echo(&bad_range, &betas, &probe, &bank, &c, &g, 0.0, 1),
            Err(Error::Domain(_))
        ));
        let wrong_betas = reflection_coefficients(2, 3, 2);
        assert!(matches!(
            synthesize_echo(&[Target::new(0.1, 0.05)], &wrong_betas, &probe, &bank, &c, &g, 0.0, 1),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            synthesize_echo(&[Target::new(0.1, 0.05)], &betas, &probe, &bank, &c, &g, -1.0, 1),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn synthesis_is_deterministic_with_expected_shapes(
            seed in 0u64..1000,
            u in -0.8f64..0.8,
            r in 0.03f64..0.12,
            noise in prop::sample::select(vec![0.0f64, 0.25, 1.0]),
        ) {
            let (c, g, probe, bank) = tiny_scene();
            let targets = [Target::new(u, r)];
            let betas = reflection_coefficients(1, 3, seed);
            let a = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, noise, seed).unwrap();
            let b = synthesize_echo(&targets, &betas, &probe, &bank, &c, &g, noise, seed).unwrap();
            prop_assert_eq!(a.n_subcarriers(), 3);
            for m in 0..3 {
                prop_assert_eq!(a.observation(m).nrows(), 16);
                prop_assert_eq!(a.observation(m).ncols(), 24);
                prop_assert_eq!(a.observation(m), b.observation(m));
            }
        }
    }
}
