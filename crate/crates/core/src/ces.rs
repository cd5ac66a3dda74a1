//! Complex elliptically symmetric (CES) snapshot model.
//!
//! A zero-mean CES vector admits the stochastic representation
//! `z = sqrt(Q) Σ^{1/2} u`, where `u` is uniform on the unit complex sphere
//! and `Q` is the second-order modular variate with pdf
//! `p_Q(q) = π^N / Γ(N) · q^{N-1} h(q)`. Every density generator here is
//! scaled so that `E{Q} = N`, which makes the scatter matrix equal to the
//! covariance matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, CMatrix, CVector};
use crate::quadrature::integrate_positive_line;

/// Density generator of a CES distribution, scale-constrained to `E{Q} = N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityGenerator {
    Gaussian,
    /// Complex t-distribution with `lambda` degrees of freedom (`lambda > 1`).
    StudentT {
        lambda: f64,
    },
    /// Generalized Gaussian with shape `s > 0`; `s = 1` is Gaussian.
    GeneralizedGaussian {
        s: f64,
    },
}

/// One realization of the second-order modular variate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ModularVariateSample(f64);

impl ModularVariateSample {
    pub fn new(q: f64) -> Result<Self> {
        if q >= 0.0 && q.is_finite() {
            Ok(Self(q))
        } else {
            Err(Error::Domain(format!(
                "modular variate must be >= 0, got {q}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl DensityGenerator {
    pub fn student_t(lambda: f64) -> Result<Self> {
        let dg = Self::StudentT { lambda };
        dg.validate()?;
        Ok(dg)
    }

    pub fn generalized_gaussian(s: f64) -> Result<Self> {
        let dg = Self::GeneralizedGaussian { s };
        dg.validate()?;
        Ok(dg)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian => Ok(()),
            Self::StudentT { lambda } if lambda > 1.0 && lambda.is_finite() => Ok(()),
            Self::StudentT { lambda } => Err(Error::InvalidParameter(format!(
                "Student-t shape lambda must be > 1 for E{{Q}} to exist, got {lambda}"
            ))),
            Self::GeneralizedGaussian { s } if s > 0.0 && s.is_finite() => Ok(()),
            Self::GeneralizedGaussian { s } => Err(Error::InvalidParameter(format!(
                "generalized Gaussian shape s must be > 0, got {s}"
            ))),
        }
    }

    /// Short human-readable label, e.g. `t(2)` or `GG(0.1)`.
    pub fn label(&self) -> String {
        match *self {
            Self::Gaussian => "Gaussian".into(),
            Self::StudentT { lambda } => format!("t({lambda})"),
            Self::GeneralizedGaussian { s } => format!("GG({s})"),
        }
    }

    /// Shape parameter (`lambda` or `s`); `None` for the Gaussian.
    pub fn shape(&self) -> Option<f64> {
        match *self {
            Self::Gaussian => None,
            Self::StudentT { lambda } => Some(lambda),
            Self::GeneralizedGaussian { s } => Some(s),
        }
    }

    /// Same family with a different shape parameter.
    pub fn with_shape(&self, shape: f64) -> Result<Self> {
        let dg = match self {
            Self::Gaussian => {
                return Err(Error::InvalidParameter(
                    "the Gaussian family has no shape parameter".into(),
                ))
            }
            Self::StudentT { .. } => Self::StudentT { lambda: shape },
            Self::GeneralizedGaussian { .. } => Self::GeneralizedGaussian { s: shape },
        };
        dg.validate()?;
        Ok(dg)
    }

    /// Student-t scale `η = λ/(λ−1)`.
    pub fn eta(&self) -> Option<f64> {
        match *self {
            Self::StudentT { lambda } => Some(lambda / (lambda - 1.0)),
            _ => None,
        }
    }

    /// Generalized-Gaussian scale `b = [N Γ(N/s) / Γ((N+1)/s)]^s`, as a logarithm.
    pub fn ln_gg_scale(&self, n: usize) -> Option<f64> {
        match *self {
            Self::GeneralizedGaussian { s } => {
                let n = n as f64;
                Some(s * (n.ln() + ln_gamma(n / s) - ln_gamma((n + 1.0) / s)))
            }
            _ => None,
        }
    }

    pub fn gg_scale(&self, n: usize) -> Option<f64> {
        self.ln_gg_scale(n).map(f64::exp)
    }

    /// `ln h(t)` with the normalizing constant included.
    pub fn ln_density_h(&self, n: usize, t: f64) -> Result<f64> {
        check_n(n)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "density generator needs t >= 0, got {t}"
            )));
        }
        let nf = n as f64;
        let ln_pi_n = nf * PI.ln();
        Ok(match *self {
            Self::Gaussian => -ln_pi_n - t,
            Self::StudentT { lambda } => {
                let scale = lambda / self.eta().expect("Student-t has eta");
                ln_gamma(lambda + nf) - ln_pi_n - ln_gamma(lambda) + lambda * scale.ln()
                    - (lambda + nf) * (scale + t).ln()
            }
            Self::GeneralizedGaussian { s } => {
                let ln_b = self.ln_gg_scale(n).expect("GG has b");
                s.ln() + ln_gamma(nf)
                    - (nf / s) * ln_b
                    - ln_pi_n
                    - ln_gamma(nf / s)
                    - (s * t.ln() - ln_b).exp()
            }
        })
    }

    /// Density generator `h(t)`.
    pub fn density_h(&self, n: usize, t: f64) -> Result<f64> {
        self.ln_density_h(n, t).map(f64::exp)
    }

    /// `ψ(t) = d ln h(t) / dt`. Undefined at `t = 0` for GG with `s < 1`.
    pub fn psi(&self, n: usize, t: f64) -> Result<f64> {
        check_n(n)?;
        let singular_at_zero = matches!(*self, Self::GeneralizedGaussian { s } if s < 1.0);
        if t < 0.0 || (t == 0.0 && singular_at_zero) || t.is_nan() {
            return Err(Error::Domain(format!("psi is undefined at t = {t}")));
        }
        Ok(match *self {
            Self::Gaussian => -1.0,
            Self::StudentT { lambda } => {
                let scale = lambda / self.eta().expect("Student-t has eta");
                -(lambda + n as f64) / (scale + t)
            }
            Self::GeneralizedGaussian { s } => {
                let ln_b = self.ln_gg_scale(n).expect("GG has b");
                if s == 1.0 {
                    -(-ln_b).exp()
                } else {
                    -s * ((s - 1.0) * t.ln() - ln_b).exp()
                }
            }
        })
    }

    /// `ln p_Q(q)` for `q > 0`.
    pub fn ln_modular_pdf(&self, n: usize, q: f64) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::Domain(format!("modular pdf needs q > 0, got {q}")));
        }
        let nf = n as f64;
        Ok(nf * PI.ln() - ln_gamma(nf) + (nf - 1.0) * q.ln() + self.ln_density_h(n, q)?)
    }

    /// Pdf of the second-order modular variate.
    pub fn modular_pdf(&self, n: usize, q: f64) -> Result<f64> {
        self.ln_modular_pdf(n, q).map(f64::exp)
    }

    /// Cdf of the second-order modular variate.
    pub fn modular_cdf(&self, n: usize, q: f64) -> Result<f64> {
        check_n(n)?;
        if q <= 0.0 {
            return Ok(0.0);
        }
        let nf = n as f64;
        Ok(match *self {
            Self::Gaussian => gamma_lr(nf, q),
            Self::StudentT { lambda } => {
                // Q/(λ-1) is a ratio of Gamma(N) and Gamma(λ) variates.
                let x = q / (lambda - 1.0);
                beta_reg(nf, lambda, x / (1.0 + x))
            }
            Self::GeneralizedGaussian { s } => {
                let ln_b = self.ln_gg_scale(n).expect("GG has b");
                gamma_lr(nf / s, (s * q.ln() - ln_b).exp())
            }
        })
    }

    /// Draws the modular variate through an exact Gamma-based construction.
    pub fn sample_modular_variate<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<ModularVariateSample> {
        check_n(n)?;
        self.validate()?;
        let nf = n as f64;
        let gamma = |shape: f64| Gamma::new(shape, 1.0).expect("positive Gamma shape");
        let q = match *self {
            Self::Gaussian => gamma(nf).sample(rng),
            Self::StudentT { lambda } => {
                let x: f64 = gamma(nf).sample(rng);
                let y: f64 = gamma(lambda).sample(rng);
                (lambda - 1.0) * x / y
            }
            Self::GeneralizedGaussian { s } => {
                let g: f64 = gamma(nf / s).sample(rng);
                ((self.ln_gg_scale(n).expect("GG has b") + g.ln()) / s).exp()
            }
        };
        ModularVariateSample::new(q)
    }

    /// Closed form of `Ē{Q² ψ(Q)²}`.
    pub fn expected_q2psi2(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Self::Gaussian => nf * (nf + 1.0),
            Self::StudentT { lambda } => nf * (nf + 1.0) * (lambda + nf) / (nf + lambda + 1.0),
            Self::GeneralizedGaussian { s } => nf * (nf + s),
        }
    }

    /// `Ē{Q² ψ(Q)²}` by adaptive quadrature of `q² ψ(q)² p_Q(q)`.
    pub fn expected_q2psi2_numeric(&self, n: usize) -> Result<f64> {
        check_n(n)?;
        self.validate()?;
        integrate_positive_line(
            |u| {
                let q = u.exp();
                match (self.psi(n, q), self.ln_modular_pdf(n, q)) {
                    (Ok(psi), Ok(lp)) if psi != 0.0 => 3.0 * u + 2.0 * psi.abs().ln() + lp,
                    _ => f64::NEG_INFINITY,
                }
            },
            1e-10,
        )
        .map(|r| r.value)
    }

    /// `∫ q^k p_Q(q) dq` by adaptive quadrature.
    pub fn modular_moment_numeric(&self, n: usize, k: i32) -> Result<f64> {
        check_n(n)?;
        self.validate()?;
        integrate_positive_line(
            |u| {
                self.ln_modular_pdf(n, u.exp())
                    .map(|lp| (k as f64 + 1.0) * u + lp)
                    .unwrap_or(f64::NEG_INFINITY)
            },
            1e-10,
        )
        .map(|r| r.value)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("sensor count must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `L` i.i.d. snapshots of an `N`-sensor array.
///
/// Stored column-wise: column `l` of [`SnapshotSet::matrix`] is snapshot `z_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    data: CMatrix,
}

impl SnapshotSet {
    /// Wraps an `N × L` matrix whose columns are snapshots.
    pub fn from_columns(data: CMatrix) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "snapshot set needs N >= 1 and L >= 1".into(),
            ));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter(
                "snapshot entries must be finite".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Builds a set from individual snapshot vectors of equal length.
    pub fn from_snapshots(snapshots: &[Vec<Complex64>]) -> Result<Self> {
        let l = snapshots.len();
        let n = snapshots.first().map_or(0, Vec::len);
        if let Some(bad) = snapshots.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Self::from_columns(CMatrix::from_fn(n, l, |r, c| snapshots[c][r]))
    }

    pub fn n_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn snapshot(&self, l: usize) -> CVector {
        self.data.column(l).into_owned()
    }

    /// Applies `f` to every snapshot, returning a new set.
    pub fn map_snapshots(&self, mut f: impl FnMut(usize, CVector) -> CVector) -> Result<Self> {
        let mut out = self.data.clone();
        for l in 0..self.n_snapshots() {
            let v = f(l, self.snapshot(l));
            out.set_column(l, &v);
        }
        Self::from_columns(out)
    }
}

/// Uniform draw on the unit complex `N`-sphere.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        let norm = v.norm();
        if norm > 0.0 {
            return v.unscale(norm);
        }
    }
}

/// Draws `L` snapshots `z_l = sqrt(Q_l) Σ^{1/2} u_l`.
pub fn sample_snapshots<R: Rng + ?Sized>(
    scatter: &CMatrix,
    dg: &DensityGenerator,
    l: usize,
    rng: &mut R,
) -> Result<SnapshotSet> {
    let n = scatter.nrows();
    if scatter.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: scatter.ncols(),
        });
    }
    if l == 0 {
        return Err(Error::InvalidParameter(
            "snapshot count must be >= 1".into(),
        ));
    }
    let root = hermitian_sqrt(scatter)?;
    let mut data = CMatrix::zeros(n, l);
    for col in 0..l {
        let q = dg.sample_modular_variate(n, rng)?.value();
        let u = sample_uniform_sphere(n, rng);
        data.set_column(col, &(&root * u).scale(q.sqrt()));
    }
    SnapshotSet::from_columns(data)
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`. Sorts in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}
