//! Direction-of-arrival estimators: MUSIC over a frequency grid (fed by any
//! of the scatter estimators) and IAA-APES.

mod grid;
pub(crate) mod iaa;
pub(crate) mod music;
mod peaks;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{wrap_frequency, FrequencyGrid, GridSteering};
pub use iaa::{
    iaa_apes_estimate, iaa_apes_power, signal_estimates, IaaOptions, IaaSpectrum, DIAGONAL_LOADING,
    IAA_TOLERANCE,
};
pub use music::{music_estimate, music_pseudospectrum, music_pseudospectrum_with};
pub use peaks::{log_parabolic_offset, pick_peaks};

use crate::error::{Error, Result};
use crate::scatter::ScatterEstimator;

/// A DOA estimation method, as named in configs and result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    MusicScm,
    MusicNscm,
    MusicKt,
    MusicTyler,
    MusicHuber,
    IaaApes,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Self::MusicScm,
        Self::MusicNscm,
        Self::MusicKt,
        Self::MusicTyler,
        Self::MusicHuber,
        Self::IaaApes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MusicScm => "MUSIC-SCM",
            Self::MusicNscm => "MUSIC-NSCM",
            Self::MusicKt => "MUSIC-KT",
            Self::MusicTyler => "MUSIC-Tyler",
            Self::MusicHuber => "MUSIC-Huber",
            Self::IaaApes => "IAA-APES",
        }
    }

    /// The scatter estimator behind a MUSIC variant.
    pub fn scatter(&self) -> Option<ScatterEstimator> {
        Some(match self {
            Self::MusicScm => ScatterEstimator::Scm,
            Self::MusicNscm => ScatterEstimator::Nscm,
            Self::MusicKt => ScatterEstimator::KendallTau,
            Self::MusicTyler => ScatterEstimator::Tyler,
            Self::MusicHuber => ScatterEstimator::Huber,
            Self::IaaApes => return None,
        })
    }

    pub fn music(scatter: ScatterEstimator) -> Self {
        match scatter {
            ScatterEstimator::Scm => Self::MusicScm,
            ScatterEstimator::Nscm => Self::MusicNscm,
            ScatterEstimator::KendallTau => Self::MusicKt,
            ScatterEstimator::Tyler => Self::MusicTyler,
            ScatterEstimator::Huber => Self::MusicHuber,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(Estimator::name).collect();
                Error::Config(format!(
                    "unknown estimator '{s}'; valid names are {}",
                    names.join(", ")
                ))
            })
    }
}

impl Serialize for Estimator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Estimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateDiagnostics {
    /// Spectrum value at each returned (unrefined) peak.
    pub peak_values: Vec<f64>,
    /// Fewer than `k` local maxima were found.
    pub fallback: bool,
    pub iterations: usize,
    pub converged: bool,
    /// The spectrum carried no information (e.g. all-zero data).
    pub degenerate: bool,
}

/// `K` estimated spatial frequencies in ascending order, each in `[−0.5, 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    pub frequencies: Vec<f64>,
    pub method: Estimator,
    pub diagnostics: EstimateDiagnostics,
}

/// Pairs sorted estimates with sorted true frequencies and returns the
/// signed errors `ν̂_(k) − ν_(k)`.
pub fn match_frequencies(estimate: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    Ok(sorted(estimate)
        .iter()
        .zip(sorted(truth))
        .map(|(e, t)| e - t)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
        }
        let err = "MUSIC-XYZ".parse::<Estimator>().unwrap_err().to_string();
        for e in Estimator::ALL {
            assert!(err.contains(e.name()));
        }
    }

    #[test]
    fn matching_examples() {
        assert_eq!(
            match_frequencies(&[-0.1, 0.3], &[-0.1, 0.3]).unwrap(),
            vec![0.0, 0.0]
        );
        let e = match_frequencies(&[0.29, -0.12], &[-0.1, 0.3]).unwrap();
        assert!((e[0] + 0.02).abs() < 1e-15 && (e[1] + 0.01).abs() < 1e-15);
        assert!(match_frequencies(&[0.1], &[0.1, 0.2]).is_err());
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn sorted_pairing_is_minimal_assignment(
            truth in prop::collection::vec(-0.45f64..0.45, 1..=3),
            noise in prop::collection::vec(-0.02f64..0.02, 3),
            shuffle in any::<u64>(),
        ) {
            let k = truth.len();
            // Well separated truths, small errors: the regime sorted pairing targets.
            let mut t = truth.clone();
            t.sort_by(f64::total_cmp);
            prop_assume!(t.windows(2).all(|w| w[1] - w[0] > 0.1));
            let mut est: Vec<f64> = truth.iter().zip(&noise).map(|(a, b)| a + b).collect();
            est.rotate_left((shuffle % k as u64) as usize);
            let errs = match_frequencies(&est, &truth).unwrap();
            let cost: f64 = errs.iter().map(|e| e * e).sum();
            let best = permutations(k)
                .into_iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| (est[i] - truth[j]).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            prop_assert!((cost - best).abs() <= 1e-15);
        }
    }
}
