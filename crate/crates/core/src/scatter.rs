//! Scatter-matrix estimators used to feed MUSIC: the sample covariance,
//! spatial-sign based estimators (NSCM, Kendall's tau) and the Tyler and
//! Huber M-estimators.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ces::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{add_outer, hermitian_part, trace_re, CMatrix, CVector, HpdFactor};

/// Which estimator produced a [`ScatterEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScatterEstimator {
    Scm,
    Nscm,
    KendallTau,
    Tyler,
    Huber,
}

impl fmt::Display for ScatterEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Scm => "SCM",
            Self::Nscm => "NSCM",
            Self::KendallTau => "KT",
            Self::Tyler => "Tyler",
            Self::Huber => "Huber",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate {
    pub matrix: CMatrix,
    pub estimator: ScatterEstimator,
    /// Zero for the closed-form estimators.
    pub iterations_used: usize,
    pub converged: bool,
}

impl ScatterEstimate {
    fn closed_form(matrix: CMatrix, estimator: ScatterEstimator) -> Self {
        Self {
            matrix,
            estimator,
            iterations_used: 0,
            converged: true,
        }
    }
}

/// Stopping rule of the M-estimator fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Relative Frobenius change between iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
        }
    }
}

/// Output of [`m_fixed_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub matrix: CMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Sample covariance matrix `(1/L) Σ z_l z_l^H`.
pub fn scm(snapshots: &SnapshotSet) -> ScatterEstimate {
    let z = snapshots.matrix();
    let m = (z * z.adjoint()).unscale(snapshots.n_snapshots() as f64);
    ScatterEstimate::closed_form(hermitian_part(&m), ScatterEstimator::Scm)
}

/// `z / ‖z‖`, or the zero vector for `z = 0`.
pub fn spatial_sign(z: &CVector) -> CVector {
    let norm = z.norm();
    if norm > 0.0 {
        z.unscale(norm)
    } else {
        CVector::zeros(z.len())
    }
}

/// Normalized SCM `(1/L) Σ v(z_l) v(z_l)^H`.
pub fn nscm(snapshots: &SnapshotSet) -> ScatterEstimate {
    let n = snapshots.n_sensors();
    let l = snapshots.n_snapshots();
    let mut acc = CMatrix::zeros(n, n);
    for i in 0..l {
        let v = spatial_sign(&snapshots.snapshot(i));
        add_outer(&mut acc, v.as_slice(), 1.0);
    }
    ScatterEstimate::closed_form(acc.unscale(l as f64), ScatterEstimator::Nscm)
}

/// Kendall's tau SCM: spatial-sign covariance of all ordered pairwise
/// differences, normalized by `L(L−1)`.
pub fn kendall_tau_scm(snapshots: &SnapshotSet) -> Result<ScatterEstimate> {
    let n = snapshots.n_sensors();
    let l = snapshots.n_snapshots();
    if l < 2 {
        return Err(Error::InvalidParameter(format!(
            "Kendall's tau SCM needs L >= 2 snapshots, got {l}"
        )));
    }
    let z = snapshots.matrix();
    let mut acc = CMatrix::zeros(n, n);
    let mut diff = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..l {
        for j in i + 1..l {
            let mut norm_sq = 0.0;
            for (m, d) in diff.iter_mut().enumerate() {
                *d = z[(m, i)] - z[(m, j)];
                norm_sq += d.norm_sqr();
            }
            if norm_sq > 0.0 {
                // The (i, j) and (j, i) terms coincide.
                add_outer(&mut acc, &diff, 2.0 / norm_sq);
            }
        }
    }
    Ok(ScatterEstimate::closed_form(
        acc.unscale((l * (l - 1)) as f64),
        ScatterEstimator::KendallTau,
    ))
}

fn weighted_scm(z: &CMatrix, weights: &[f64]) -> CMatrix {
    let n = z.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for (l, &w) in weights.iter().enumerate() {
        add_outer(&mut acc, z.column(l).as_slice(), w);
    }
    acc.unscale(weights.len() as f64)
}

fn quadratic_forms(z: &CMatrix, sigma: &CMatrix) -> Result<Vec<f64>> {
    let factor = HpdFactor::new(sigma)?;
    Ok((0..z.ncols())
        .map(|l| factor.quadratic_form_inv(&z.column(l).into_owned()))
        .collect())
}

/// One application of the M-estimator map
/// `Σ ↦ (1/L) Σ_l φ(z_l^H Σ^{-1} z_l) z_l z_l^H`.
pub fn m_step(
    snapshots: &SnapshotSet,
    weight: impl Fn(f64) -> f64,
    sigma: &CMatrix,
) -> Result<CMatrix> {
    let z = snapshots.matrix();
    let weights: Vec<f64> = quadratic_forms(z, sigma)?.into_iter().map(weight).collect();
    Ok(weighted_scm(z, &weights))
}

/// Iterates the M-estimator map from `Σ⁽⁰⁾ = I` until the relative Frobenius
/// change drops below `opts.tol`. Returns `converged = false` with the last
/// iterate when `opts.max_iter` is exhausted.
pub fn m_fixed_point(
    snapshots: &SnapshotSet,
    weight: impl Fn(f64) -> f64,
    opts: FixedPointOptions,
) -> Result<FixedPoint> {
    let n = snapshots.n_sensors();
    let mut current = CMatrix::identity(n, n);
    for iter in 1..=opts.max_iter {
        let next = m_step(snapshots, &weight, &current)?;
        let change = (&next - &current).norm() / current.norm();
        current = next;
        if change < opts.tol {
            return Ok(FixedPoint {
                matrix: current,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        matrix: current,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// `‖Σ − M(Σ)‖_F / ‖Σ‖_F` for the M-estimator map `M`.
pub fn fixed_point_residual(
    snapshots: &SnapshotSet,
    weight: impl Fn(f64) -> f64,
    sigma: &CMatrix,
) -> Result<f64> {
    let mapped = m_step(snapshots, weight, sigma)?;
    Ok((sigma - mapped).norm() / sigma.norm())
}

/// Tyler's weight `φ(t) = N/t`.
pub fn tyler_weight(n: usize) -> impl Fn(f64) -> f64 {
    let n = n as f64;
    move |t| n / t
}

/// Tyler's M-estimator, normalized to `trace = N`.
pub fn tyler(snapshots: &SnapshotSet) -> Result<ScatterEstimate> {
    tyler_with(snapshots, FixedPointOptions::default())
}

pub fn tyler_with(snapshots: &SnapshotSet, opts: FixedPointOptions) -> Result<ScatterEstimate> {
    let n = snapshots.n_sensors();
    check_enough_snapshots(snapshots)?;
    let z = snapshots.matrix();
    if let Some(l) = (0..z.ncols()).find(|&l| z.column(l).norm() == 0.0) {
        return Err(Error::Domain(format!(
            "Tyler's estimator is undefined for the zero snapshot at index {l}"
        )));
    }
    let fp = m_fixed_point(snapshots, tyler_weight(n), opts)?;
    let scale = n as f64 / trace_re(&fp.matrix);
    Ok(ScatterEstimate {
        matrix: hermitian_part(&fp.matrix.scale(scale)),
        estimator: ScatterEstimator::Tyler,
        iterations_used: fp.iterations,
        converged: fp.converged,
    })
}

fn check_enough_snapshots(snapshots: &SnapshotSet) -> Result<()> {
    let (n, l) = (snapshots.n_sensors(), snapshots.n_snapshots());
    if l < n {
        Err(Error::InvalidParameter(format!(
            "M-estimators need L >= N snapshots, got L={l}, N={n}"
        )))
    } else {
        Ok(())
    }
}

/// Huber tuning constants derived from the quantile level `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberTuning {
    pub q: f64,
    /// Threshold `δ²` on the quadratic form.
    pub delta_sq: f64,
    /// Scaling constant `b`.
    pub b: f64,
}

impl HuberTuning {
    /// `2δ²` is the `q`-quantile of `χ²_{2N}` and
    /// `b = F_{χ²_{2N+2}}(2δ²) + δ²(1−q)/N`.
    pub fn new(q: f64, n: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Huber quantile level q must lie in (0, 1), got {q}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("sensor count must be >= 1".into()));
        }
        let nf = n as f64;
        let chi = |dof: f64| ChiSquared::new(dof).expect("positive degrees of freedom");
        let two_delta_sq = chi(2.0 * nf).inverse_cdf(q);
        let delta_sq = 0.5 * two_delta_sq;
        let b = chi(2.0 * nf + 2.0).cdf(two_delta_sq) + delta_sq * (1.0 - q) / nf;
        Ok(Self { q, delta_sq, b })
    }

    /// `φ(t) = 1/b` for `t ≤ δ²`, else `δ²/(t b)`.
    pub fn weight(&self, t: f64) -> f64 {
        if t <= self.delta_sq {
            1.0 / self.b
        } else {
            self.delta_sq / (t * self.b)
        }
    }
}

pub fn huber_tuning(q: f64, n: usize) -> Result<HuberTuning> {
    HuberTuning::new(q, n)
}

/// Huber's M-estimator (no rescaling).
pub fn huber(snapshots: &SnapshotSet, tuning: &HuberTuning) -> Result<ScatterEstimate> {
    huber_with(snapshots, tuning, FixedPointOptions::default())
}

pub fn huber_with(
    snapshots: &SnapshotSet,
    tuning: &HuberTuning,
    opts: FixedPointOptions,
) -> Result<ScatterEstimate> {
    check_enough_snapshots(snapshots)?;
    let fp = m_fixed_point(snapshots, |t| tuning.weight(t), opts)?;
    Ok(ScatterEstimate {
        matrix: hermitian_part(&fp.matrix),
        estimator: ScatterEstimator::Huber,
        iterations_used: fp.iterations,
        converged: fp.converged,
    })
}
