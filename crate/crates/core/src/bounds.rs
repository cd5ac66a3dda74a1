//! Stochastic CRB and its semiparametric counterpart for ULA spatial
//! frequencies under CES snapshots.
//!
//! Both bounds share the matrix
//! `C = Re{ (D^H Π⊥_A D) ⊙ (Γ A^H Σ^{-1} A Γ)^T }`; the semiparametric bound
//! is the stochastic one inflated by `N(N+1) / Ē{Q² ψ(Q)²}`.

use nalgebra::{Cholesky, SymmetricEigen};
use serde::Serialize;

use crate::array::{build_scatter, derivative_matrix, orthogonal_projector, SourceScenario};
use crate::ces::DensityGenerator;
use crate::error::{Error, Result};
use crate::linalg::{HpdFactor, RMatrix, CONDITION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Scrb,
    Sscrb,
}

/// A `K × K` lower bound on the covariance of a frequency estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub matrix: RMatrix,
    pub frobenius_index: f64,
    pub kind: BoundKind,
}

impl BoundResult {
    fn new(matrix: RMatrix, kind: BoundKind) -> Self {
        let frobenius_index = matrix.norm();
        Self {
            matrix,
            frobenius_index,
            kind,
        }
    }
}

/// The real symmetric matrix `C(ν, ζ)` shared by both bounds.
pub fn c_matrix(scenario: &SourceScenario) -> Result<RMatrix> {
    let n = scenario.n_sensors();
    let a = scenario.steering_matrix();
    let d = derivative_matrix(scenario.frequencies(), n);
    let proj = orthogonal_projector(&a)?;
    let sigma = build_scatter(scenario);
    let sigma_inv_a = HpdFactor::new(&sigma)?.solve(&a);
    let gamma = scenario.source_cov();

    let x = d.adjoint() * proj * &d;
    let y = gamma * a.adjoint() * sigma_inv_a * gamma;
    let k = scenario.n_sources();
    let c = RMatrix::from_fn(k, k, |i, j| (x[(i, j)] * y[(j, i)]).re);
    Ok((&c + c.transpose()).scale(0.5))
}

/// Inverse of a symmetric positive-definite matrix, rejecting condition
/// numbers above [`CONDITION_LIMIT`].
fn spd_inverse(c: &RMatrix) -> Result<RMatrix> {
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let condition = max / min;
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let chol = Cholesky::new(c.clone()).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: min,
    })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()).scale(0.5))
}

fn check_snapshots(l: usize) -> Result<()> {
    if l == 0 {
        Err(Error::InvalidParameter(
            "snapshot count must be >= 1".into(),
        ))
    } else {
        Ok(())
    }
}

/// Stochastic CRB `σ²/(2L) C^{-1}`.
pub fn scrb(scenario: &SourceScenario, l: usize) -> Result<BoundResult> {
    check_snapshots(l)?;
    let c_inv = spd_inverse(&c_matrix(scenario)?)?;
    let scale = scenario.noise_power() / (2.0 * l as f64);
    Ok(BoundResult::new(c_inv.scale(scale), BoundKind::Scrb))
}

/// Ratio `N(N+1) / Ē{Q² ψ(Q)²}` between the semiparametric and the
/// Gaussian stochastic bound.
pub fn sscrb_factor(dg: &DensityGenerator, n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + 1.0) / dg.expected_q2psi2(n)
}

/// Semiparametric stochastic CRB `N(N+1)σ² / (2L Ē{Q²ψ²}) C^{-1}`.
pub fn sscrb(scenario: &SourceScenario, l: usize, dg: &DensityGenerator) -> Result<BoundResult> {
    dg.validate()?;
    let base = scrb(scenario, l)?;
    let factor = sscrb_factor(dg, scenario.n_sensors());
    Ok(BoundResult::new(
        base.matrix.scale(factor),
        BoundKind::Sscrb,
    ))
}

/// Frobenius norm of the bound matrix.
pub fn bound_index(bound: &BoundResult) -> f64 {
    bound.matrix.norm()
}
