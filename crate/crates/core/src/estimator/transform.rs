//! Per-subcarrier steering transforms and the corrected noise subspace.
//!
//! A transform diagonal `tau` carries the carrier steering vector of a
//! hypothesis onto a subcarrier-dependent steering vector by elementwise
//! multiplication. Two diagonals matter here:
//!
//! - [`squint_transform`] is the beam-pointing form: it maps
//!   `a(u, r, f_c)` onto `a(ū_m, r̄_m, f_m)`, the steering of the squinted
//!   location at subcarrier `m` (ratio `η_m = f_c / f_m`). Because the
//!   squinted location is defined by phase alignment, this diagonal is a
//!   constant phase — it describes where a carrier-built beam points, not
//!   how an echo looks.
//! - [`echo_transform`] is the data-side form: it maps `a(u, r, f_c)` onto
//!   `a(u, r, f_m)`, the signature a target at `(u, r)` actually leaves in
//!   subcarrier `m`. This is the diagonal the corrected spectrum needs for
//!   its per-subcarrier peaks to coincide at the physical location.
//!
//! Both are computed as literal elementwise ratios of steering vectors, so
//! multiplying the diagonal back onto the denominator reproduces the
//! numerator to machine precision.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{nearfield_steering, squint_map, ArrayConfig, SteeringVector, WidebandGrid};
use crate::error::{Error, Result};

/// Unit-modulus diagonal relating two equal-modulus steering vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformDiag {
    entries: DVector<Complex64>,
}

impl TransformDiag {
    /// Elementwise ratio `numerator ./ denominator`.
    pub fn between(numerator: &SteeringVector, denominator: &SteeringVector) -> Result<Self> {
        if numerator.len() != denominator.len() {
            return Err(Error::Dimension(format!(
                "transform between vectors of length {} and {}",
                numerator.len(),
                denominator.len()
            )));
        }
        let entries = DVector::from_iterator(
            numerator.len(),
            numerator
                .as_slice()
                .iter()
                .zip(denominator.as_slice())
                .map(|(n, d)| n / d),
        );
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &DVector<Complex64> {
        &self.entries
    }

    /// `diag(tau) * v`.
    pub fn apply(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if v.len() != self.len() {
            return Err(Error::Dimension(format!(
                "transform of length {} applied to vector of length {}",
                self.len(),
                v.len()
            )));
        }
        Ok(self.entries.component_mul(v))
    }
}

/// Beam-pointing transform: carries `a(u, r, f_c)` onto the steering of the
/// squinted location `(ū_m, r̄_m)` evaluated at `f_m` (squint ratio
/// `η_m = f_c / f_m`). Exact by construction as an elementwise ratio.
pub fn squint_transform(
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    u: f64,
    r: f64,
    m: usize,
) -> Result<TransformDiag> {
    let eta = grid.ratio(m)?;
    let mapped = squint_map(u, r, eta)?;
    if !(mapped.range_m > 0.0) {
        return Err(Error::Domain(format!(
            "squinted range is not positive for u={u}, r={r}, ratio={eta}"
        )));
    }
    let numer = nearfield_steering(cfg, mapped.direction_sine, mapped.range_m, grid.frequency(m)?)?;
    let denom = nearfield_steering(cfg, u, r, grid.carrier_hz())?;
    TransformDiag::between(&numer, &denom)
}

/// Data-side transform: carries `a(u, r, f_c)` onto `a(u, r, f_m)`, the echo
/// signature of the same physical location at subcarrier `m`.
pub fn echo_transform(
    cfg: &ArrayConfig,
    grid: &WidebandGrid,
    u: f64,
    r: f64,
    m: usize,
) -> Result<TransformDiag> {
    let numer = nearfield_steering(cfg, u, r, grid.frequency(m)?)?;
    let denom = nearfield_steering(cfg, u, r, grid.carrier_hz())?;
    TransformDiag::between(&numer, &denom)
}

/// Corrected noise subspace `V^N = diag(tau)^H W U^N`.
///
/// Scoring a carrier-steering hypothesis against `V^N` is the same as
/// scoring the transformed steering against `W U^N`, which is what makes a
/// single carrier-frequency grid search work across all subcarriers.
pub fn corrected_noise_subspace(
    transform: &TransformDiag,
    combiner: &DMatrix<Complex64>,
    noise_basis: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = transform.len();
    if combiner.nrows() != n || combiner.ncols() != n {
        return Err(Error::Dimension(format!(
            "combiner must be {n}x{n}, got {}x{}",
            combiner.nrows(),
            combiner.ncols()
        )));
    }
    if noise_basis.nrows() != n {
        return Err(Error::Dimension(format!(
            "noise basis must have {n} rows, got {}",
            noise_basis.nrows()
        )));
    }
    let mut projected = combiner * noise_basis;
    for (row, mut entries) in projected.row_iter_mut().enumerate() {
        let scale = transform.entries()[row].conj();
        for z in entries.iter_mut() {
            *z *= scale;
        }
    }
    Ok(projected)
}
