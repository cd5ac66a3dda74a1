//! IAA-APES: alternates between the model covariance
//! `R = A(Ω) diag(P) A(Ω)^H` and per-grid-point amplitude estimates
//! `ŝ_{g,l} = a_g^H R^{-1} z_l / (a_g^H R^{-1} a_g)`, with
//! `P_g = (1/L) Σ_l |ŝ_{g,l}|²`.
//!
//! Using `R` in place of `Q(ν_g) = R − P_g a_g a_g^H` gives the same `ŝ` by
//! the matrix inversion lemma, so one factorization serves every grid point.
//! `Σ_l |a^H R^{-1} z_l|²` is evaluated as `a^H (R^{-1} S R^{-1}) a` with
//! `S = Z Z^H`, which keeps each sweep at `O(G N)`.

use super::grid::{FrequencyGrid, GridSteering};
use super::peaks::pick_peaks;
use super::{DoaEstimate, Estimator};
use crate::ces::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HpdFactor};

/// Relative power change below which the iteration stops.
pub const IAA_TOLERANCE: f64 = 1e-6;
/// Diagonal loading added to `R` before inversion, relative to `trace(R)/N`.
pub const DIAGONAL_LOADING: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaaOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IaaOptions {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: IAA_TOLERANCE,
        }
    }
}

/// Converged (or last) IAA power spectrum over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IaaSpectrum {
    pub power: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
}

fn loaded_inverse(r: &CMatrix) -> Result<CMatrix> {
    let n = r.nrows();
    let load = DIAGONAL_LOADING * crate::linalg::trace_re(r) / n as f64;
    let mut loaded = r.clone();
    for i in 0..n {
        loaded[(i, i)] += load;
    }
    Ok(HpdFactor::new(&loaded)?.inverse())
}

/// Runs the IAA power iteration. The starting spectrum is the
/// matched-filter periodogram `(1/L) Σ_l |a_g^H z_l|² / N²`.
pub fn iaa_apes_power(
    snapshots: &SnapshotSet,
    grid: &FrequencyGrid,
    opts: IaaOptions,
) -> Result<IaaSpectrum> {
    iaa_apes_power_with(
        snapshots,
        grid,
        &GridSteering::new(grid, snapshots.n_sensors()),
        opts,
    )
}

pub(crate) fn iaa_apes_power_with(
    snapshots: &SnapshotSet,
    grid: &FrequencyGrid,
    steering: &GridSteering,
    opts: IaaOptions,
) -> Result<IaaSpectrum> {
    let n = snapshots.n_sensors();
    let l = snapshots.n_snapshots() as f64;
    if grid.size() < n {
        return Err(Error::InvalidParameter(format!(
            "IAA-APES needs G >= N, got G={}, N={n}",
            grid.size()
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "IAA-APES needs max_iter >= 1".into(),
        ));
    }
    let z = snapshots.matrix();
    let sample_cov = (z * z.adjoint()).unscale(l);

    let mut power = Vec::with_capacity(grid.size());
    steering.quadratic_forms(&sample_cov, &mut power);
    let n2 = (n * n) as f64;
    for p in power.iter_mut() {
        *p = p.max(0.0) / n2;
    }

    let (mut num, mut den) = (Vec::new(), Vec::new());
    for iter in 1..=opts.max_iter {
        let r = steering.weighted_outer_sum(&power);
        if !(crate::linalg::trace_re(&r) > 0.0) {
            return Ok(IaaSpectrum {
                power: vec![0.0; grid.size()],
                iterations: iter - 1,
                converged: false,
                degenerate: true,
            });
        }
        let r_inv = loaded_inverse(&r)?;
        let weighted = &r_inv * &sample_cov * &r_inv;
        steering.quadratic_forms(&weighted, &mut num);
        steering.quadratic_forms(&r_inv, &mut den);
        let mut max_change = 0.0f64;
        let mut max_power = 0.0f64;
        for g in 0..power.len() {
            let next = num[g].max(0.0) / (den[g] * den[g]);
            max_change = max_change.max((next - power[g]).abs());
            max_power = max_power.max(next);
            power[g] = next;
        }
        if max_change <= opts.tol * max_power {
            return Ok(IaaSpectrum {
                power,
                iterations: iter,
                converged: true,
                degenerate: false,
            });
        }
    }
    Ok(IaaSpectrum {
        power,
        iterations: opts.max_iter,
        converged: false,
        degenerate: false,
    })
}

/// Explicit amplitude estimates `ŝ_{g,l}` (`G × L`) for the powers `power`
/// on the steering matrix `a_grid` (`N × G`).
pub fn signal_estimates(
    snapshots: &SnapshotSet,
    a_grid: &CMatrix,
    power: &[f64],
) -> Result<CMatrix> {
    let g = a_grid.ncols();
    if power.len() != g {
        return Err(Error::DimensionMismatch {
            expected: g,
            actual: power.len(),
        });
    }
    let mut r = CMatrix::zeros(a_grid.nrows(), a_grid.nrows());
    for (col, &p) in power.iter().enumerate() {
        let a = a_grid.column(col);
        r += (a * a.adjoint()).scale(p);
    }
    let r_inv = loaded_inverse(&r)?;
    let w = &r_inv * a_grid; // N × G
    let numer = w.adjoint() * snapshots.matrix(); // G × L
    let mut out = numer;
    for col in 0..g {
        let denom = (a_grid.column(col).adjoint() * w.column(col))[(0, 0)].re;
        out.row_mut(col).unscale_mut(denom);
    }
    Ok(out)
}

/// IAA-APES estimate: the `k` strongest peaks of the converged power
/// spectrum, refined as in [`pick_peaks`].
pub fn iaa_apes_estimate(
    snapshots: &SnapshotSet,
    k: usize,
    grid: &FrequencyGrid,
    max_iter: usize,
) -> Result<DoaEstimate> {
    iaa_apes_estimate_with(
        snapshots,
        k,
        grid,
        &GridSteering::new(grid, snapshots.n_sensors()),
        max_iter,
    )
}

pub(crate) fn iaa_apes_estimate_with(
    snapshots: &SnapshotSet,
    k: usize,
    grid: &FrequencyGrid,
    steering: &GridSteering,
    max_iter: usize,
) -> Result<DoaEstimate> {
    let n = snapshots.n_sensors();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "IAA-APES needs 1 <= K < N, got K={k}, N={n}"
        )));
    }
    let spectrum = iaa_apes_power_with(
        snapshots,
        grid,
        steering,
        IaaOptions {
            max_iter,
            ..Default::default()
        },
    )?;
    let mut est = pick_peaks(&spectrum.power, grid, k, Estimator::IaaApes)?;
    est.diagnostics.iterations = spectrum.iterations;
    est.diagnostics.converged = spectrum.converged;
    est.diagnostics.degenerate = spectrum.degenerate;
    Ok(est)
}
