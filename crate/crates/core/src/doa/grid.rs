use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{upper_diagonal_sums, CMatrix};

/// Uniform grid of `G` spatial frequencies `−0.5 + g/G`, `g = 0..G`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub const MIN_SIZE: usize = 64;
    pub const DEFAULT_SIZE: usize = 4096;

    pub fn new(size: usize) -> Result<Self> {
        if size < Self::MIN_SIZE {
            return Err(Error::InvalidParameter(format!(
                "frequency grid needs at least {} points, got {size}",
                Self::MIN_SIZE
            )));
        }
        let g = size as f64;
        Ok(Self {
            points: (0..size).map(|i| -0.5 + i as f64 / g).collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size() as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the grid point nearest to `nu` (circularly).
    pub fn nearest_index(&self, nu: f64) -> usize {
        let g = self.size() as f64;
        let idx = ((nu + 0.5) * g).round().rem_euclid(g);
        idx as usize % self.size()
    }
}

/// Wraps a frequency into `[−0.5, 0.5)`.
pub fn wrap_frequency(nu: f64) -> f64 {
    let w = (nu + 0.5).rem_euclid(1.0) - 0.5;
    if w >= 0.5 {
        -0.5
    } else {
        w
    }
}

/// Precomputed phasors `e^{j2πkν_g}`, `k = 1..N`, for fast evaluation of
/// steering-vector quadratic forms `a(ν_g)^H X a(ν_g)` over a grid.
#[derive(Debug, Clone)]
pub struct GridSteering {
    n: usize,
    size: usize,
    // Row-major G × (N − 1): entry (g, k − 1) is e^{j2πkν_g}.
    phasors: Vec<Complex64>,
}

impl GridSteering {
    pub fn new(grid: &FrequencyGrid, n: usize) -> Self {
        let lag = n.saturating_sub(1);
        let mut phasors = Vec::with_capacity(grid.size() * lag);
        for &nu in grid.points() {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * nu);
            let mut p = w;
            for _ in 0..lag {
                phasors.push(p);
                p *= w;
            }
        }
        Self {
            n,
            size: grid.size(),
            phasors,
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.n
    }

    /// `a(ν_g)^H X a(ν_g)` for every grid point; `X` must be Hermitian.
    pub fn quadratic_forms(&self, x: &CMatrix, out: &mut Vec<f64>) {
        let c = upper_diagonal_sums(x);
        let lag = self.n.saturating_sub(1);
        out.clear();
        out.extend((0..self.size).map(|g| {
            let row = &self.phasors[g * lag..(g + 1) * lag];
            let cross: f64 = row
                .iter()
                .zip(&c[1..])
                .map(|(p, ck)| ck.re * p.re - ck.im * p.im)
                .sum();
            c[0].re + 2.0 * cross
        }));
    }

    /// Toeplitz matrix `Σ_g P_g a(ν_g) a(ν_g)^H`.
    pub fn weighted_outer_sum(&self, power: &[f64]) -> CMatrix {
        let lag = self.n.saturating_sub(1);
        let mut r = vec![Complex64::new(0.0, 0.0); self.n];
        for (g, &p) in power.iter().enumerate() {
            r[0] += p;
            for (k, ph) in self.phasors[g * lag..(g + 1) * lag].iter().enumerate() {
                r[k + 1] += ph * p;
            }
        }
        CMatrix::from_fn(self.n, self.n, |i, j| {
            if i >= j {
                r[i - j]
            } else {
                r[j - i].conj()
            }
        })
    }
}
