//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Condition number beyond which a matrix is treated as numerically singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let sym = hermitian_part(m);
        let eig = SymmetricEigen::new(sym);
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V f(Λ) V^H`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            let v = self.eigenvectors.column(k);
            for c in 0..n {
                let vc = v[c].conj() * w;
                for r in 0..n {
                    out[(r, c)] += v[r] * vc;
                }
            }
        }
        out
    }
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Hermitian principal square root of a positive-definite matrix.
pub fn hermitian_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(m);
    let min = eig.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(eig.map_eigenvalues(f64::sqrt))
}

/// Cholesky factor of a Hermitian positive-definite matrix, rejecting
/// matrices whose condition number exceeds [`CONDITION_LIMIT`].
///
/// The condition number is estimated from the squared ratio of the largest
/// to smallest Cholesky diagonal, which is a lower bound on the true value.
#[derive(Debug, Clone)]
pub struct HpdFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HpdFactor {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let chol = Cholesky::new(hermitian_part(m)).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?;
        let diag = chol.l_dirty().diagonal();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in diag.iter() {
            lo = lo.min(d.re);
            hi = hi.max(d.re);
        }
        let condition = (hi / lo).powi(2);
        if !(condition.is_finite() && condition <= CONDITION_LIMIT) {
            return Err(Error::IllConditioned {
                condition,
                limit: CONDITION_LIMIT,
            });
        }
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &CVector) -> CVector {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> CMatrix {
        hermitian_part(&self.chol.inverse())
    }

    /// `z^H M^{-1} z` evaluated through the triangular factor.
    pub fn quadratic_form_inv(&self, z: &CVector) -> f64 {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(z)
            .expect("Cholesky factor has a nonzero diagonal");
        y.norm_squared()
    }
}

/// Condition number of a Hermitian positive-definite matrix from its spectrum.
pub fn hermitian_condition(m: &CMatrix) -> f64 {
    let eig = HermitianEigen::new(m);
    let min = eig.min_eigenvalue();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        eig.max_eigenvalue() / min
    }
}

/// Largest absolute entry of `M - M^H`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Real part of the trace.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Adds `v v^H * weight` to `acc`.
pub fn add_outer(acc: &mut CMatrix, v: &[Complex64], weight: f64) {
    let n = v.len();
    for c in 0..n {
        let vc = v[c].conj() * weight;
        for r in 0..n {
            acc[(r, c)] += v[r] * vc;
        }
    }
}

/// Sums of the diagonals of a square matrix: `c[k] = Σ_{n-m=k} X[m, n]`
/// for `k = 0..N`. For Hermitian `X` and a ULA steering vector,
/// `a(ν)^H X a(ν) = c[0] + 2 Re Σ_{k≥1} c[k] e^{j2πkν}`.
pub fn upper_diagonal_sums(x: &CMatrix) -> Vec<Complex64> {
    let n = x.nrows();
    (0..n)
        .map(|k| (0..n - k).map(|m| x[(m, m + k)]).sum())
        .collect()
}
