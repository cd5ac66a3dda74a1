//! Adaptive Gauss–Kronrod quadrature, used as an independent numerical
//! oracle for the closed-form moments of the modular variate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod nodes (non-negative half) and weights; the 7-point Gauss
// rule uses the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 200_000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive G7/K15 integration of `f` over `[a, b]`, starting from
/// `initial_panels` equal subintervals. Fails rather than truncating when the
/// tolerance cannot be met within `max_intervals`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    initial_panels: usize,
    opts: QuadratureOptions,
) -> Result<Integral> {
    let panels = initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let (mut value, mut error) = (0.0, 0.0);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let p = gk15(&f, lo, hi);
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Integral {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Resum periodically to keep the running totals free of drift.
        if heap.len() % 4096 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Integrates a positive function over the whole real line given its
/// logarithm `log_g`. The support is located by scanning for the maximum of
/// `log_g` and then walking outward until it falls `DROP` nats below the
/// peak, so the truncated tails are below `e^-DROP` relative.
pub fn integrate_positive_line(log_g: impl Fn(f64) -> f64, rel_tol: f64) -> Result<Integral> {
    const DROP: f64 = 80.0;
    const STEP: f64 = 0.125;
    const SCAN: f64 = 400.0;

    let mut peak_u = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut u = -SCAN;
    while u <= SCAN {
        let v = log_g(u);
        if v > peak {
            peak = v;
            peak_u = u;
        }
        u += STEP;
    }
    if !peak.is_finite() {
        return Err(Error::Domain(
            "integrand has no finite mass on the scanned support".into(),
        ));
    }
    let walk = |dir: f64| -> Result<f64> {
        let mut u = peak_u;
        for _ in 0..2_000_000 {
            u += dir * STEP;
            if log_g(u) < peak - DROP {
                return Ok(u);
            }
        }
        Err(Error::Domain("integrand tail decays too slowly".into()))
    };
    let lo = walk(-1.0)?;
    let hi = walk(1.0)?;
    let panels = ((hi - lo) / (4.0 * STEP)).ceil() as usize;
    // Rescale by the peak so the integrand is O(1) near its maximum.
    let scaled = integrate(
        |u| (log_g(u) - peak).exp(),
        lo,
        hi,
        panels,
        QuadratureOptions {
            rel_tol,
            ..Default::default()
        },
    )?;
    let scale = peak.exp();
    Ok(Integral {
        value: scaled.value * scale,
        error: scaled.error * scale,
        intervals: scaled.intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(6) - 3.0 * x, 0.0, 2.0, 1, Default::default()).unwrap();
        assert!((r.value - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integral() {
        let opts = QuadratureOptions {
            abs_tol: 1e-13,
            ..Default::default()
        };
        let r = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1, opts).unwrap();
        assert!(r.value.abs() < 1e-12);
        let r = integrate(|x| x.cos(), 0.0, 1.0, 1, Default::default()).unwrap();
        assert!((r.value - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn whole_line_gaussian() {
        let r = integrate_positive_line(|u| -0.5 * (u - 3.0) * (u - 3.0), 1e-12).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whole_line_heavy_tail() {
        // ∫ e^u / (1 + e^u)^2 du = 1 (logistic density).
        let r = integrate_positive_line(|u| u - 2.0 * u.exp().ln_1p(), 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = QuadratureOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_intervals: 4,
        };
        let err = integrate(|x| x.abs().sqrt().recip(), -1.0, 1.0, 1, opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
