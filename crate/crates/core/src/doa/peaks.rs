use super::grid::{wrap_frequency, FrequencyGrid};
use super::{DoaEstimate, EstimateDiagnostics, Estimator};
use crate::error::{Error, Result};

/// Vertex offset, in grid steps, of the parabola through `ln` of three
/// neighbouring spectrum samples. `None` when the samples are not strictly
/// positive or not concave.
pub fn log_parabolic_offset(left: f64, center: f64, right: f64) -> Option<f64> {
    if !(left > 0.0 && center > 0.0 && right > 0.0) {
        return None;
    }
    let (l, c, r) = (left.ln(), center.ln(), right.ln());
    let curvature = l - 2.0 * c + r;
    if !(curvature < 0.0) {
        return None;
    }
    Some((0.5 * (l - r) / curvature).clamp(-0.5, 0.5))
}

/// Picks the `k` strongest local maxima of a circular spectrum and refines
/// each one by log-domain quadratic interpolation. When the spectrum has
/// fewer than `k` local maxima the remaining slots are filled with the
/// largest unrefined samples and `diagnostics.fallback` is set.
pub fn pick_peaks(
    spectrum: &[f64],
    grid: &FrequencyGrid,
    k: usize,
    method: Estimator,
) -> Result<DoaEstimate> {
    let g = grid.size();
    if spectrum.len() != g {
        return Err(Error::DimensionMismatch {
            expected: g,
            actual: spectrum.len(),
        });
    }
    if k == 0 || g <= 2 * k {
        return Err(Error::InvalidParameter(format!(
            "peak picking needs 1 <= k and G > 2k, got k={k}, G={g}"
        )));
    }
    let at = |i: isize| spectrum[i.rem_euclid(g as isize) as usize];
    let mut maxima: Vec<usize> = (0..g)
        .filter(|&i| {
            let i = i as isize;
            at(i) > at(i - 1) && at(i) >= at(i + 1)
        })
        .collect();
    maxima.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)));
    maxima.truncate(k);

    let mut picks: Vec<(f64, f64)> = maxima
        .iter()
        .map(|&i| {
            let ii = i as isize;
            let offset = log_parabolic_offset(at(ii - 1), at(ii), at(ii + 1)).unwrap_or(0.0);
            (
                wrap_frequency(grid.points()[i] + offset * grid.spacing()),
                spectrum[i],
            )
        })
        .collect();

    let fallback = picks.len() < k;
    if fallback {
        let mut rest: Vec<usize> = (0..g).filter(|i| !maxima.contains(i)).collect();
        rest.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)));
        picks.extend(
            rest.into_iter()
                .take(k - picks.len())
                .map(|i| (grid.points()[i], spectrum[i])),
        );
    }
    picks.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DoaEstimate {
        frequencies: picks.iter().map(|p| p.0).collect(),
        method,
        diagnostics: EstimateDiagnostics {
            peak_values: picks.iter().map(|p| p.1).collect(),
            fallback,
            ..Default::default()
        },
    })
}
