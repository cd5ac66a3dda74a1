//! Experiment configuration: a JSON document in which every field is
//! optional and falls back to the reference two-source scenario.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::SourceScenario;
use crate::ces::DensityGenerator;
use crate::doa::{Estimator, FrequencyGrid};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scatter::HuberTuning;

/// Largest trial count addressable by the per-trial stream layout.
pub const MAX_TRIALS: usize = 1 << 40;

/// Default Student-t shape grid for shape sweeps.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0];
/// Default generalized-Gaussian shape grid for shape sweeps.
pub const DEFAULT_S_GRID: [f64; 5] = [0.1, 0.2, 0.5, 1.0, 1.5];

/// What is varied across the rows of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Source `k` has power `σ² · 10^((snr + offsets_db[k]) / 10)`.
    Snr {
        #[serde(default = "default_snr_values")]
        values_db: Vec<f64>,
        #[serde(default = "default_snr_offsets")]
        offsets_db: Vec<f64>,
    },
    /// Varies the shape of the configured distribution family at fixed
    /// per-source SNRs. `values` defaults to the family's standard grid.
    Shape {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default = "default_shape_snrs")]
        snr_db: Vec<f64>,
    },
}

fn default_snr_values() -> Vec<f64> {
    (0..=6).map(|i| 5.0 * i as f64).collect()
}

fn default_snr_offsets() -> Vec<f64> {
    vec![0.0, -10.0]
}

fn default_shape_snrs() -> Vec<f64> {
    vec![15.0, 10.0]
}

impl Default for Sweep {
    fn default() -> Self {
        Self::Snr {
            values_db: default_snr_values(),
            offsets_db: default_snr_offsets(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_sensors: usize,
    /// Snapshot count `L`; defaults to `3N`.
    pub snapshots: Option<usize>,
    /// True spatial frequencies; their count is `K`.
    pub frequencies: Vec<f64>,
    /// Correlation coefficient between every pair of sources.
    pub correlation: f64,
    pub noise_power: f64,
    pub distribution: DensityGenerator,
    pub sweep: Sweep,
    pub estimators: Vec<Estimator>,
    pub trials: usize,
    pub grid_size: usize,
    pub huber_q: f64,
    pub iaa_max_iter: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sensors: 8,
            snapshots: None,
            frequencies: vec![-0.1, 0.3],
            correlation: 0.3,
            noise_power: 1.0,
            distribution: DensityGenerator::StudentT { lambda: 2.0 },
            sweep: Sweep::default(),
            estimators: Estimator::ALL.to_vec(),
            trials: 1000,
            grid_size: FrequencyGrid::DEFAULT_SIZE,
            huber_q: 0.6,
            iaa_max_iter: 30,
            master_seed: 1,
        }
    }
}

/// One row of a sweep: the scenario and distribution that every trial
/// at this sweep value draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub scenario: SourceScenario,
    pub distribution: DensityGenerator,
}

impl ExperimentConfig {
    pub fn n_sources(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.unwrap_or(3 * self.n_sensors)
    }

    /// Column label of the swept quantity.
    pub fn sweep_param(&self) -> &'static str {
        match (&self.sweep, self.distribution) {
            (Sweep::Snr { .. }, _) => "snr_db",
            (Sweep::Shape { .. }, DensityGenerator::StudentT { .. }) => "lambda",
            (Sweep::Shape { .. }, DensityGenerator::GeneralizedGaussian { .. }) => "s",
            (Sweep::Shape { .. }, DensityGenerator::Gaussian) => "shape",
        }
    }

    /// Swept values in row order.
    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            Sweep::Snr { values_db, .. } => values_db.clone(),
            Sweep::Shape {
                values: Some(v), ..
            } => v.clone(),
            Sweep::Shape { values: None, .. } => match self.distribution {
                DensityGenerator::StudentT { .. } => DEFAULT_LAMBDA_GRID.to_vec(),
                DensityGenerator::GeneralizedGaussian { .. } => DEFAULT_S_GRID.to_vec(),
                DensityGenerator::Gaussian => Vec::new(),
            },
        }
    }

    /// Source covariance with per-source powers `p` and pairwise
    /// correlation `ρ`: `Γ_ij = ρ √(p_i p_j)` off the diagonal.
    fn source_cov(&self, snr_db: impl Iterator<Item = f64>) -> CMatrix {
        let p: Vec<f64> = snr_db
            .map(|snr| self.noise_power * 10f64.powf(snr / 10.0))
            .collect();
        let k = p.len();
        CMatrix::from_fn(k, k, |i, j| {
            let v = if i == j {
                p[i]
            } else {
                self.correlation * (p[i] * p[j]).sqrt()
            };
            Complex64::new(v, 0.0)
        })
    }

    fn point(&self, index: usize, value: f64) -> Result<SweepPoint> {
        let (cov, distribution) = match &self.sweep {
            Sweep::Snr { offsets_db, .. } => (
                self.source_cov(offsets_db.iter().map(|o| value + o)),
                self.distribution,
            ),
            Sweep::Shape { snr_db, .. } => (
                self.source_cov(snr_db.iter().copied()),
                self.distribution.with_shape(value)?,
            ),
        };
        let scenario = SourceScenario::new(
            self.n_sensors,
            self.frequencies.clone(),
            cov,
            self.noise_power,
        )?;
        Ok(SweepPoint {
            index,
            value,
            scenario,
            distribution,
        })
    }

    /// Builds every sweep point; fails on the first invalid one.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        self.sweep_values()
            .into_iter()
            .enumerate()
            .map(|(i, v)| self.point(i, v))
            .collect()
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let n = self.n_sensors;
        let k = self.n_sources();
        if n < 2 {
            problems.push(format!("n_sensors must be >= 2, got {n}"));
        }
        if k == 0 || k >= n {
            problems.push(format!(
                "the number of sources K (= number of frequencies) must satisfy 1 <= K < N, got K={k}, N={n}"
            ));
        }
        if self.n_snapshots() < n {
            problems.push(format!(
                "snapshots L must be >= n_sensors N for the M-estimators, got L={}, N={n}",
                self.n_snapshots()
            ));
        }
        if !(self.correlation.abs() <= 1.0) {
            problems.push(format!(
                "correlation must lie in [-1, 1], got {}",
                self.correlation
            ));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            problems.push(format!("noise_power must be > 0, got {}", self.noise_power));
        }
        if let Err(e) = self.distribution.validate() {
            problems.push(format!("distribution: {e}"));
        }
        if self.estimators.is_empty() {
            problems.push("estimators must not be empty".into());
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                problems.push(format!("estimator {e} listed twice"));
            }
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            problems.push(format!("trials must lie in [1, 2^40], got {}", self.trials));
        }
        if let Err(e) = FrequencyGrid::new(self.grid_size) {
            problems.push(format!("grid_size: {e}"));
        } else if self.grid_size <= 2 * k || self.grid_size < n {
            problems.push(format!(
                "grid_size must exceed 2K and be >= N, got {}",
                self.grid_size
            ));
        }
        if self.estimators.contains(&Estimator::MusicHuber) {
            if let Err(e) = HuberTuning::new(self.huber_q, n.max(1)) {
                problems.push(format!("huber_q: {e}"));
            }
        }
        if self.iaa_max_iter == 0 {
            problems.push("iaa_max_iter must be >= 1".into());
        }

        let per_source = match &self.sweep {
            Sweep::Snr { offsets_db, .. } => ("offsets_db", offsets_db),
            Sweep::Shape { snr_db, .. } => ("snr_db", snr_db),
        };
        if per_source.1.len() != k {
            problems.push(format!(
                "sweep.{} needs one entry per source ({k}), got {}",
                per_source.0,
                per_source.1.len()
            ));
        }
        if matches!(self.sweep, Sweep::Shape { .. })
            && matches!(self.distribution, DensityGenerator::Gaussian)
        {
            problems.push(
                "a shape sweep needs a student_t or generalized_gaussian distribution".into(),
            );
        }
        let values = self.sweep_values();
        if values.is_empty() && !matches!(self.distribution, DensityGenerator::Gaussian) {
            problems.push("sweep values must not be empty".into());
        }
        if values.len() >= 1 << 24 {
            problems.push("too many sweep values".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            problems.push("sweep values must be finite".into());
        }

        // Scenario-level checks (frequency range, duplicates, shapes) only make
        // sense once the shapes above are consistent.
        if problems.is_empty() {
            for (i, v) in values.iter().enumerate() {
                if let Err(e) = self.point(i, *v) {
                    problems.push(format!("sweep value {v}: {e}"));
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Parses and validates a JSON configuration. Omitted fields take their
/// defaults, so `{}` is the full reference experiment.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let mut msg = format!("line {}, column {}: {e}", e.line(), e.column());
        if let Some(src) = text.lines().nth(e.line().saturating_sub(1)) {
            let _ = write!(msg, "\n  | {src}");
        }
        Error::Config(msg)
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_experiment() {
        let c = parse_config_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.n_snapshots(), 24);
        assert_eq!(c.n_sources(), 2);
        assert_eq!(
            c.sweep_values(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        );
        assert_eq!(c.estimators.len(), 6);
        assert_eq!(
            (c.trials, c.grid_size, c.iaa_max_iter, c.huber_q),
            (1000, 4096, 30, 0.6)
        );
    }

    #[test]
    fn snr_mapping() {
        let c = ExperimentConfig::default();
        let p = &c.sweep_points().unwrap()[3];
        assert_eq!(p.value, 15.0);
        let g = p.scenario.source_cov();
        assert!((g[(0, 0)].re - 10f64.powf(1.5)).abs() < 1e-12);
        assert!((g[(1, 1)].re - 10f64.powf(0.5)).abs() < 1e-12);
        assert!((g[(0, 1)].re - 0.3 * 10f64.powf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn shape_sweep_defaults() {
        let c = parse_config_str(
            r#"{"distribution": {"family": "generalized_gaussian", "s": 1.0}, "sweep": {"kind": "shape"}}"#,
        )
        .unwrap();
        assert_eq!(c.sweep_param(), "s");
        let pts = c.sweep_points().unwrap();
        assert_eq!(pts.len(), DEFAULT_S_GRID.len());
        assert_eq!(
            pts[0].distribution,
            DensityGenerator::GeneralizedGaussian { s: 0.1 }
        );
        let g = pts[0].scenario.source_cov();
        assert!((g[(0, 0)].re - 10f64.powf(1.5)).abs() < 1e-12);
        assert!((g[(1, 1)].re - 10.0).abs() < 1e-12);
        let t = parse_config_str(r#"{"sweep": {"kind": "shape"}}"#).unwrap();
        assert_eq!(t.sweep_values(), DEFAULT_LAMBDA_GRID.to_vec());
    }

    #[test]
    fn k_not_below_n_is_rejected() {
        let err =
            parse_config_str(r#"{"n_sensors": 2, "frequencies": [-0.1, 0.3], "snapshots": 24}"#)
                .unwrap_err()
                .to_string();
        assert!(err.contains("1 <= K < N"), "{err}");
    }

    #[test]
    fn unknown_estimator_lists_valid_names() {
        let err = parse_config_str(r#"{"estimators": ["MUSIC-SCM", "ESPRIT"]}"#)
            .unwrap_err()
            .to_string();
        for e in Estimator::ALL {
            assert!(err.contains(e.name()), "{err}");
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let err = parse_config_str(
            r#"{"trials": 0, "estimators": [], "grid_size": 10, "iaa_max_iter": 0, "noise_power": -1}"#,
        )
        .unwrap_err()
        .to_string();
        for needle in [
            "trials",
            "estimators",
            "grid_size",
            "iaa_max_iter",
            "noise_power",
        ] {
            assert!(err.contains(needle), "missing {needle}: {err}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_context() {
        let err = parse_config_str("{\n  \"trials\": 10,\n  \"grid_size\": ,\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("\"grid_size\": ,"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_config_str(r#"{"trails": 10}"#).is_err());
    }

    #[test]
    fn gaussian_shape_sweep_is_rejected() {
        let err = parse_config_str(
            r#"{"distribution": {"family": "gaussian"}, "sweep": {"kind": "shape"}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("shape sweep"), "{err}");
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), c);
    }
}
