//! Uniform linear array geometry: steering vectors, their derivatives, and
//! the structured scatter matrix `A Γ A^H + σ² I`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_condition, hermitian_defect, CMatrix, CVector, HermitianEigen, CONDITION_LIMIT,
};

/// Sources impinging on an `N`-sensor ULA.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    n_sensors: usize,
    frequencies: Vec<f64>,
    source_cov: CMatrix,
    noise_power: f64,
}

impl SourceScenario {
    pub fn new(
        n_sensors: usize,
        frequencies: Vec<f64>,
        source_cov: CMatrix,
        noise_power: f64,
    ) -> Result<Self> {
        let k = frequencies.len();
        let mut problems = Vec::new();
        if n_sensors < 2 {
            problems.push(format!("N must be >= 2, got {n_sensors}"));
        }
        if k == 0 || k >= n_sensors {
            problems.push(format!("need 1 <= K < N, got K={k}, N={n_sensors}"));
        }
        for &nu in &frequencies {
            if !(nu > -0.5 && nu <= 0.5) {
                problems.push(format!("frequency {nu} outside (-0.5, 0.5]"));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if frequencies[i] == frequencies[j] {
                    problems.push(format!("duplicate frequency {}", frequencies[i]));
                }
            }
        }
        if source_cov.nrows() != k || source_cov.ncols() != k {
            problems.push(format!(
                "source covariance must be {k}x{k}, got {}x{}",
                source_cov.nrows(),
                source_cov.ncols()
            ));
        } else {
            let scale = source_cov.norm().max(1.0);
            if hermitian_defect(&source_cov) > 1e-12 * scale {
                problems.push("source covariance is not Hermitian".into());
            } else if k > 0 && HermitianEigen::new(&source_cov).min_eigenvalue() < -1e-12 * scale {
                problems.push("source covariance has a negative eigenvalue".into());
            }
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            problems.push(format!("noise power must be > 0, got {noise_power}"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidParameter(problems.join("; ")));
        }
        Ok(Self {
            n_sensors,
            frequencies,
            source_cov,
            noise_power,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_sources(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn source_cov(&self) -> &CMatrix {
        &self.source_cov
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Copy with the noise power replaced.
    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::new(
            self.n_sensors,
            self.frequencies.clone(),
            self.source_cov.clone(),
            noise_power,
        )
    }

    pub fn steering_matrix(&self) -> CMatrix {
        steering_matrix(&self.frequencies, self.n_sensors)
    }
}

/// `a(ν) = (1, e^{j2πν}, …, e^{j2π(N−1)ν})^T`.
pub fn steering_vector(nu: f64, n: usize) -> CVector {
    CVector::from_fn(n, |m, _| {
        Complex64::from_polar(1.0, 2.0 * PI * nu * m as f64)
    })
}

/// `da(ν)/dν`, element `m` equal to `j2πm e^{j2πmν}`.
pub fn steering_derivative(nu: f64, n: usize) -> CVector {
    CVector::from_fn(n, |m, _| {
        let w = 2.0 * PI * m as f64;
        Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * nu)
    })
}

/// Steering matrix with column `k` equal to `a(ν_k)`.
pub fn steering_matrix(nus: &[f64], n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, nus.len());
    for (k, &nu) in nus.iter().enumerate() {
        a.set_column(k, &steering_vector(nu, n));
    }
    a
}

/// Matrix whose columns are the steering derivatives.
pub fn derivative_matrix(nus: &[f64], n: usize) -> CMatrix {
    let mut d = CMatrix::zeros(n, nus.len());
    for (k, &nu) in nus.iter().enumerate() {
        d.set_column(k, &steering_derivative(nu, n));
    }
    d
}

/// `Σ = A Γ A^H + σ² I`.
pub fn build_scatter(scenario: &SourceScenario) -> CMatrix {
    let a = scenario.steering_matrix();
    let n = scenario.n_sensors();
    let mut sigma = &a * scenario.source_cov() * a.adjoint();
    for i in 0..n {
        sigma[(i, i)] += Complex64::new(scenario.noise_power(), 0.0);
    }
    crate::linalg::hermitian_part(&sigma)
}

/// `Π⊥_A = I − A (A^H A)^{-1} A^H`.
pub fn orthogonal_projector(a: &CMatrix) -> Result<CMatrix> {
    let gram = a.adjoint() * a;
    let condition = hermitian_condition(&gram);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let gram_inv = crate::linalg::HpdFactor::new(&gram)?.inverse();
    let n = a.nrows();
    let proj = CMatrix::identity(n, n) - a * gram_inv * a.adjoint();
    Ok(crate::linalg::hermitian_part(&proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_re;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn steering_vector_examples() {
        let a = steering_vector(0.0, 4);
        assert!(a.iter().all(|&x| x == c(1.0, 0.0)));
        let a = steering_vector(0.25, 4);
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (x, e) in a.iter().zip(expected) {
            assert!((x - e).norm() < 1e-15);
        }
        let a = steering_vector(0.5, 3);
        for (x, e) in a.iter().zip([1.0, -1.0, 1.0]) {
            assert!((x - c(e, 0.0)).norm() < 1e-15);
        }
        for nu in [-0.37, 0.1, 0.49] {
            let a = steering_vector(nu, 9);
            assert_eq!(a[0], c(1.0, 0.0));
            assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn derivative_examples() {
        let d = steering_derivative(0.0, 3);
        assert_eq!(d[0], c(0.0, 0.0));
        assert!((d[1] - c(0.0, 2.0 * PI)).norm() < 1e-15);
        assert!((d[2] - c(0.0, 4.0 * PI)).norm() < 1e-15);
        assert_eq!(steering_derivative(0.3, 5)[0], c(0.0, 0.0));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for nu in [-0.4, -0.1, 0.0, 0.1, 0.3] {
            let fd = (steering_vector(nu + h, 8) - steering_vector(nu - h, 8)).unscale(2.0 * h);
            let d = steering_derivative(nu, 8);
            for (x, y) in fd.iter().zip(d.iter()) {
                assert!((x - y).norm() < 1e-5, "nu={nu}");
            }
        }
    }

    #[test]
    fn steering_matrix_rank() {
        let a = steering_matrix(&[-0.1, 0.3], 8);
        assert_eq!(a.shape(), (8, 2));
        assert_eq!(a.column(1), steering_vector(0.3, 8));
        let sv = a.clone().svd(false, false).singular_values;
        assert!(sv.min() > 1.0);
        let dup = steering_matrix(&[0.2, 0.2], 8);
        let sv = dup.svd(false, false).singular_values;
        assert!(sv.min() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        let g = CMatrix::identity(2, 2);
        assert!(SourceScenario::new(8, vec![-0.1, 0.3], g.clone(), 1.0).is_ok());
        assert!(SourceScenario::new(2, vec![-0.1, 0.3], g.clone(), 1.0).is_err());
        assert!(SourceScenario::new(8, vec![0.2, 0.2], g.clone(), 1.0).is_err());
        assert!(SourceScenario::new(8, vec![-0.5, 0.3], g.clone(), 1.0).is_err());
        assert!(SourceScenario::new(8, vec![0.5, 0.3], g.clone(), 1.0).is_ok());
        assert!(SourceScenario::new(8, vec![-0.1, 0.3], g.clone(), 0.0).is_err());
        let mut bad = g.clone();
        bad[(0, 1)] = c(2.0, 0.0);
        bad[(1, 0)] = c(2.0, 0.0);
        let err = SourceScenario::new(8, vec![-0.1, 0.3], bad, 1.0).unwrap_err();
        assert!(err.to_string().contains("negative eigenvalue"));
    }

    #[test]
    fn scatter_examples() {
        let s = SourceScenario::new(4, vec![0.2], CMatrix::zeros(1, 1), 2.0).unwrap();
        assert_eq!(build_scatter(&s), CMatrix::identity(4, 4).scale(2.0));
        let s = SourceScenario::new(2, vec![0.0], CMatrix::identity(1, 1), 1.0).unwrap();
        let sigma = build_scatter(&s);
        let expected =
            CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert!((sigma - expected).norm() < 1e-15);
    }

    #[test]
    fn scatter_trace_and_spectrum() {
        // Uncorrelated sources: cross terms of A Γ A^H would otherwise add to the trace.
        let gamma = CMatrix::from_diagonal(&CVector::from_vec(vec![c(10.0, 0.0), c(1.0, 0.0)]));
        let s = SourceScenario::new(8, vec![-0.1, 0.3], gamma, 1.5).unwrap();
        let sigma = build_scatter(&s);
        assert!((trace_re(&sigma) - (8.0 * 11.0 + 8.0 * 1.5)).abs() < 1e-12);
        assert!(hermitian_defect(&sigma) == 0.0);
        assert!(HermitianEigen::new(&sigma).min_eigenvalue() >= 1.5 - 1e-12);
    }

    #[test]
    fn projector_properties() {
        let a = steering_matrix(&[-0.1, 0.3], 8);
        let p = orthogonal_projector(&a).unwrap();
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!(hermitian_defect(&p) < 1e-12);
        assert!((&p * &a).norm() < 1e-12);
        assert!((trace_re(&p) - 6.0).abs() < 1e-12);
        let square = steering_matrix(&[0.0, 0.25, 0.5, -0.25], 4);
        assert!(orthogonal_projector(&square).unwrap().norm() < 1e-12);
        let dup = steering_matrix(&[0.2, 0.2], 8);
        assert!(matches!(
            orthogonal_projector(&dup),
            Err(Error::IllConditioned { .. })
        ));
    }
}
