//! Sample covariance and its split into signal and noise eigenspaces.
//!
//! MUSIC needs, per subcarrier, the orthonormal eigenvectors of the sample
//! covariance `R_m = (1/T) Y_m Y_m^H` separated at the target count `K`: the
//! `K` dominant eigenvectors span the signal subspace, the remaining `N - K`
//! the noise subspace. Everything downstream consumes the two bases through
//! projectors, so the per-column phase ambiguity of the eigendecomposition
//! is harmless; ordering ambiguities at an eigenvalue tie across the split
//! boundary are not, and are therefore reported on the result.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::ObservationSet;

/// Sample covariance `(1/T) Y Y^H`, symmetrized as `(R + R^H)/2` to keep the
/// eigensolver on an exactly Hermitian input.
pub fn sample_covariance(observation: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let t = observation.ncols().max(1) as f64;
    let r = (observation * observation.adjoint()).unscale(t);
    (&r + r.adjoint()).unscale(2.0)
}

/// Orthonormal eigenbasis of one covariance matrix, split at the target
/// count.
#[derive(Clone, Debug)]
pub struct SubspacePair {
    signal: DMatrix<Complex64>,
    noise: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
    boundary_tie: bool,
}

impl SubspacePair {
    /// Signal basis `U^S` (`N x K`), dominant eigenvectors first.
    pub fn signal(&self) -> &DMatrix<Complex64> {
        &self.signal
    }

    /// Noise basis `U^N` (`N x (N - K)`).
    pub fn noise(&self) -> &DMatrix<Complex64> {
        &self.noise
    }

    /// All eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_antennas(&self) -> usize {
        self.signal.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.signal.ncols()
    }

    /// True when the eigenvalues straddling the signal/noise split are equal
    /// to within rounding, making the split non-unique.
    pub fn boundary_tie(&self) -> bool {
        self.boundary_tie
    }
}

/// Hermitian eigendecomposition split into signal and noise subspaces.
///
/// Eigenpairs are sorted by descending eigenvalue; ties keep the
/// eigensolver's original order (stable sort), and a tie across the split
/// boundary raises the [`SubspacePair::boundary_tie`] diagnostic.
pub fn eigendecompose(covariance: &DMatrix<Complex64>, k: usize) -> Result<SubspacePair> {
    let n = covariance.nrows();
    if covariance.ncols() != n {
        return Err(Error::Dimension(format!(
            "covariance must be square, got {}x{}",
            n,
            covariance.ncols()
        )));
    }
    if k >= n {
        return Err(Error::Identifiability(format!(
            "need at least one noise dimension: k = {k}, n = {n}"
        )));
    }
    if covariance.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("covariance has non-finite entries".into()));
    }

    let eig = covariance.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let boundary_tie = k > 0 && (eigenvalues[k - 1] - eigenvalues[k]).abs() <= 1e-12 * scale;

    let mut signal = DMatrix::zeros(n, k);
    for (col, &i) in order[..k].iter().enumerate() {
        signal.column_mut(col).copy_from(&eig.eigenvectors.column(i));
    }
    let mut noise = DMatrix::zeros(n, n - k);
    for (col, &i) in order[k..].iter().enumerate() {
        noise.column_mut(col).copy_from(&eig.eigenvectors.column(i));
    }

    Ok(SubspacePair {
        signal,
        noise,
        eigenvalues,
        boundary_tie,
    })
}

/// Covariance + eigendecomposition for every subcarrier of an observation
/// set. Checks the snapshot-count side of identifiability (`T >= K`).
pub fn decompose_all(observations: &ObservationSet, k: usize) -> Result<Vec<SubspacePair>> {
    if observations.snapshots() < k {
        return Err(Error::Identifiability(format!(
            "{} snapshots cannot resolve {} targets",
            observations.snapshots(),
            k
        )));
    }
    observations
        .per_subcarrier()
        .iter()
        .map(|y| eigendecompose(&sample_covariance(y), k))
        .collect()
}
