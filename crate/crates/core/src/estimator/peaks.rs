//! Peak extraction: strict 2-D local maxima, ranked and padded.

use serde::Serialize;

use crate::error::{Error, Result};

use super::SpectrumGrid;

/// One extracted peak. `range_m` is `None` on direction-only spectra.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub direction_sine: f64,
    pub range_m: Option<f64>,
    pub value: f64,
    pub direction_index: usize,
    pub range_index: usize,
}

/// Peak list for one spectrum. `degraded` is set when the surface held fewer
/// strict local maxima than requested and the list was padded with the
/// highest remaining cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimates {
    pub mode: String,
    pub peaks: Vec<PeakEstimate>,
    pub degraded: bool,
}

/// Ranking: value descending, then direction index, then range index, so
/// equal-valued cells resolve deterministically.
fn rank(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Extract the `k` highest strict local maxima of the spectrum.
///
/// A cell is a local maximum when it strictly exceeds every existing
/// neighbor in its 8-neighborhood; boundary cells compare only the neighbors
/// they have. If fewer than `k` maxima exist, the result is padded with the
/// highest not-yet-chosen cells and flagged degraded.
pub fn find_peaks(spectrum: &SpectrumGrid, k: usize) -> Result<Estimates> {
    let nu = spectrum.n_direction();
    let nr = spectrum.n_range();
    let cells = nu * nr;
    if k == 0 {
        return Err(Error::Config("peak count must be at least 1".into()));
    }
    if k > cells {
        return Err(Error::Config(format!(
            "cannot take {k} peaks from a grid of {cells} cells"
        )));
    }

    let mut maxima: Vec<(f64, usize, usize)> = Vec::new();
    for iu in 0..nu {
        for ir in 0..nr {
            let v = spectrum.value(iu, ir);
            let mut is_max = true;
            'hood: for du in -1i64..=1 {
                for dr in -1i64..=1 {
                    if du == 0 && dr == 0 {
                        continue;
                    }
                    let ju = iu as i64 + du;
                    let jr = ir as i64 + dr;
                    if ju < 0 || jr < 0 || ju >= nu as i64 || jr >= nr as i64 {
                        continue;
                    }
                    if spectrum.value(ju as usize, jr as usize) >= v {
                        is_max = false;
                        break 'hood;
                    }
                }
            }
            if is_max {
                maxima.push((v, iu, ir));
            }
        }
    }
    maxima.sort_by(rank);
    maxima.truncate(k);

    let degraded = maxima.len() < k;
    if degraded {
        let chosen: Vec<(usize, usize)> = maxima.iter().map(|&(_, iu, ir)| (iu, ir)).collect();
        let mut rest: Vec<(f64, usize, usize)> = (0..nu)
            .flat_map(|iu| (0..nr).map(move |ir| (iu, ir)))
            .filter(|cell| !chosen.contains(cell))
            .map(|(iu, ir)| (spectrum.value(iu, ir), iu, ir))
            .collect();
        rest.sort_by(rank);
        maxima.extend(rest.into_iter().take(k - maxima.len()));
    }

    let peaks = maxima
        .into_iter()
        .map(|(value, iu, ir)| PeakEstimate {
            direction_sine: spectrum.direction_axis()[iu],
            range_m: if spectrum.direction_only() {
                None
            } else {
                Some(spectrum.range_axis()[ir])
            },
            value,
            direction_index: iu,
            range_index: ir,
        })
        .collect();
    Ok(Estimates {
        mode: spectrum.mode().to_string(),
        peaks,
        degraded,
    })
}
