//! Seeded Monte Carlo sweeps comparing estimator MSE with the bounds.
//!
//! Every trial owns a random stream derived only from
//! `(master_seed, sweep index, trial index)`, and per-trial results are
//! reduced in trial order, so results do not depend on how many worker
//! threads execute the trials.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array::build_scatter;
use crate::bounds::{scrb, sscrb};
use crate::ces::{sample_snapshots, SnapshotSet};
use crate::config::{ExperimentConfig, SweepPoint};
use crate::doa::{match_frequencies, DoaEstimate, Estimator, FrequencyGrid, GridSteering};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::scatter::HuberTuning;

/// Exact CSV header of sweep results.
pub const CSV_HEADER: &str =
    "sweep_param,sweep_value,estimator,mse,mse_stderr,sscrb,scrb,trials,failures";
/// Exact CSV header of bound tables.
pub const BOUNDS_CSV_HEADER: &str = "sweep_param,sweep_value,scrb,sscrb,ratio";

/// Runs one DOA method on one snapshot set. The harness is generic over
/// this so tests can observe exactly what each estimator receives.
pub trait DoaBackend: Sync {
    fn estimate(&self, method: Estimator, snapshots: &SnapshotSet, k: usize)
        -> Result<DoaEstimate>;
}

/// The real estimators, with grid tables precomputed once per sweep.
#[derive(Debug, Clone)]
pub struct StandardBackend {
    grid: FrequencyGrid,
    steering: GridSteering,
    huber: Option<HuberTuning>,
    iaa_max_iter: usize,
}

impl StandardBackend {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let grid = FrequencyGrid::new(config.grid_size)?;
        let steering = GridSteering::new(&grid, config.n_sensors);
        let huber = if config.estimators.contains(&Estimator::MusicHuber) {
            Some(HuberTuning::new(config.huber_q, config.n_sensors)?)
        } else {
            None
        };
        Ok(Self {
            grid,
            steering,
            huber,
            iaa_max_iter: config.iaa_max_iter,
        })
    }
}

impl DoaBackend for StandardBackend {
    fn estimate(
        &self,
        method: Estimator,
        snapshots: &SnapshotSet,
        k: usize,
    ) -> Result<DoaEstimate> {
        match method.scatter() {
            Some(scatter) => crate::doa::music::music_estimate_with(
                snapshots,
                scatter,
                k,
                &self.grid,
                &self.steering,
                self.huber.as_ref(),
            ),
            None => crate::doa::iaa::iaa_apes_estimate_with(
                snapshots,
                k,
                &self.grid,
                &self.steering,
                self.iaa_max_iter,
            ),
        }
    }
}

/// Random stream of one trial.
pub fn trial_rng(master_seed: u64, sweep_index: usize, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((sweep_index as u64) << 40) | trial_index as u64);
    rng
}

/// The snapshots every estimator sees in one trial.
pub fn trial_snapshots(
    config: &ExperimentConfig,
    point: &SweepPoint,
    trial_index: usize,
) -> Result<SnapshotSet> {
    let mut rng = trial_rng(config.master_seed, point.index, trial_index);
    sample_snapshots(
        &build_scatter(&point.scenario),
        &point.distribution,
        config.n_snapshots(),
        &mut rng,
    )
}

/// Per-estimator outcome of one trial: estimated frequencies, or the error
/// that excluded this trial from the estimator's average.
pub type TrialOutcome = Vec<(Estimator, Result<Vec<f64>>)>;

/// One Monte Carlo realization: samples one snapshot set and runs every
/// configured estimator on it.
pub fn run_trial(
    config: &ExperimentConfig,
    point: &SweepPoint,
    trial_index: usize,
    backend: &dyn DoaBackend,
) -> Result<TrialOutcome> {
    let snapshots = trial_snapshots(config, point, trial_index)?;
    let k = config.n_sources();
    Ok(config
        .estimators
        .iter()
        .map(|&m| (m, backend.estimate(m, &snapshots, k).map(|e| e.frequencies)))
        .collect())
}

/// Mean of `‖e‖²` over trials and the standard error of that mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseIndex {
    pub mse: f64,
    pub stderr: f64,
}

/// `‖e eᵀ‖_F`, computed from the explicit outer product.
pub fn outer_product_frobenius(e: &[f64]) -> f64 {
    let v = RMatrix::from_column_slice(e.len(), 1, e);
    (&v * v.transpose()).norm()
}

/// Mean squared error norm over trials. Because `e eᵀ` has rank one,
/// `‖e eᵀ‖_F = ‖e‖²`, so this is also the mean Frobenius norm of the
/// error outer products.
pub fn mse_index(errors: &[Vec<f64>]) -> Result<MseIndex> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter("MSE of an empty error list".into()));
    }
    let sq: Vec<f64> = errors
        .iter()
        .map(|e| e.iter().map(|x| x * x).sum())
        .collect();
    let n = sq.len() as f64;
    let mse = sq.iter().sum::<f64>() / n;
    let stderr = if sq.len() > 1 {
        let var = sq.iter().map(|x| (x - mse).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MseIndex { mse, stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub estimator: Estimator,
    /// NaN when every trial failed for this estimator.
    pub mse: f64,
    pub mse_stderr: f64,
    pub sscrb: f64,
    pub scrb: f64,
    /// Trials contributing to `mse`.
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep_param: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, sweep_value: f64, estimator: Estimator) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.estimator == estimator)
    }

    /// Total failed trials per estimator.
    pub fn failure_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            *out.entry(r.estimator.name().to_string()).or_insert(0) += r.failures;
        }
        out
    }

    /// Writes the header and one line per row. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                self.sweep_param,
                r.sweep_value,
                r.estimator,
                r.mse,
                r.mse_stderr,
                r.sscrb,
                r.scrb,
                r.trials,
                r.failures
            )?;
        }
        Ok(())
    }
}

/// Runs the configured sweep on the current rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    run_sweep_with(config, &StandardBackend::from_config(config)?)
}

pub fn run_sweep_with(config: &ExperimentConfig, backend: &dyn DoaBackend) -> Result<SweepResult> {
    let points = config.sweep_points()?;
    let l = config.n_snapshots();
    let mut rows = Vec::with_capacity(points.len() * config.estimators.len());
    for point in &points {
        let scrb_index = scrb(&point.scenario, l)?.frobenius_index;
        let sscrb_index = sscrb(&point.scenario, l, &point.distribution)?.frobenius_index;
        let truth = point.scenario.frequencies();

        // Indexed collect keeps trial order fixed regardless of scheduling.
        let outcomes: Vec<TrialOutcome> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, point, t, backend))
            .collect::<Result<_>>()?;

        for (slot, &method) in config.estimators.iter().enumerate() {
            let mut errors = Vec::with_capacity(outcomes.len());
            let mut failures = 0;
            for outcome in &outcomes {
                match outcome[slot]
                    .1
                    .as_ref()
                    .map(|est| match_frequencies(est, truth))
                {
                    Ok(Ok(e)) => errors.push(e),
                    _ => failures += 1,
                }
            }
            let index = mse_index(&errors).unwrap_or(MseIndex {
                mse: f64::NAN,
                stderr: f64::NAN,
            });
            rows.push(SweepRow {
                sweep_value: point.value,
                estimator: method,
                mse: index.mse,
                mse_stderr: index.stderr,
                sscrb: sscrb_index,
                scrb: scrb_index,
                trials: errors.len(),
                failures,
            });
        }
    }
    Ok(SweepResult {
        sweep_param: config.sweep_param().to_string(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub sweep_value: f64,
    pub scrb: f64,
    pub sscrb: f64,
}

/// SCRB and SSCRB indices at every sweep value, without Monte Carlo.
pub fn bounds_table(config: &ExperimentConfig) -> Result<Vec<BoundRow>> {
    config.validate()?;
    let l = config.n_snapshots();
    config
        .sweep_points()?
        .iter()
        .map(|p| {
            Ok(BoundRow {
                sweep_value: p.value,
                scrb: scrb(&p.scenario, l)?.frobenius_index,
                sscrb: sscrb(&p.scenario, l, &p.distribution)?.frobenius_index,
            })
        })
        .collect()
}

pub fn write_bounds_csv(
    sweep_param: &str,
    rows: &[BoundRow],
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "{BOUNDS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{sweep_param},{},{},{},{}",
            r.sweep_value,
            r.scrb,
            r.sscrb,
            r.sscrb / r.scrb
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Sweep;
    use rand::Rng;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 8,
            grid_size: 512,
            sweep: Sweep::Snr {
                values_db: vec![20.0],
                offsets_db: vec![0.0, -10.0],
            },
            ..Default::default()
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(
            mse_index(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap().mse,
            0.0
        );
        let one = mse_index(&[vec![0.3, 0.4]]).unwrap();
        assert!((one.mse - 0.25).abs() < 1e-15);
        assert_eq!(one.stderr, 0.0);
        assert!(mse_index(&[]).is_err());
        let two = mse_index(&[vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(two.mse, 0.5);
        assert!((two.stderr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rank_one_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let k = rng.random_range(1..5);
            let e: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sq: f64 = e.iter().map(|x| x * x).sum();
            assert!((outer_product_frobenius(&e) - sq).abs() <= 1e-14);
        }
        assert!((outer_product_frobenius(&[0.3, 0.4]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn trials_are_deterministic_and_distinct() {
        let c = small_config();
        let point = &c.sweep_points().unwrap()[0];
        let a = trial_snapshots(&c, point, 3).unwrap();
        let b = trial_snapshots(&c, point, 3).unwrap();
        assert_eq!(a, b);
        let other = trial_snapshots(&c, point, 4).unwrap();
        assert_ne!(a.snapshot(0), other.snapshot(0));

        let backend = StandardBackend::from_config(&c).unwrap();
        let x = run_trial(&c, point, 3, &backend).unwrap();
        let y = run_trial(&c, point, 3, &backend).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn single_estimator_gives_single_result() {
        let c = ExperimentConfig {
            estimators: vec![Estimator::MusicTyler],
            ..small_config()
        };
        let point = &c.sweep_points().unwrap()[0];
        let out = run_trial(&c, point, 0, &StandardBackend::from_config(&c).unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, Estimator::MusicTyler);
    }

    #[test]
    fn one_trial_one_row() {
        let c = ExperimentConfig {
            trials: 1,
            estimators: vec![Estimator::MusicScm],
            ..small_config()
        };
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].trials, 1);
        assert_eq!(r.sweep_param, "snr_db");
    }

    #[test]
    fn result_independent_of_thread_count() {
        let c = small_config();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sweep(&c).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    struct Failing;
    impl DoaBackend for Failing {
        fn estimate(&self, m: Estimator, _: &SnapshotSet, k: usize) -> Result<DoaEstimate> {
            if m == Estimator::IaaApes {
                Err(Error::Domain("injected".into()))
            } else {
                Ok(DoaEstimate {
                    frequencies: vec![0.0; k],
                    method: m,
                    diagnostics: Default::default(),
                })
            }
        }
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let c = ExperimentConfig {
            estimators: vec![Estimator::MusicScm, Estimator::IaaApes],
            ..small_config()
        };
        let r = run_sweep_with(&c, &Failing).unwrap();
        let iaa = r.row(20.0, Estimator::IaaApes).unwrap();
        assert_eq!((iaa.trials, iaa.failures), (0, 8));
        assert!(iaa.mse.is_nan());
        let scm = r.row(20.0, Estimator::MusicScm).unwrap();
        assert_eq!((scm.trials, scm.failures), (8, 0));
        assert!((scm.mse - 0.1).abs() < 1e-15);
        assert_eq!(r.failure_counts()["IAA-APES"], 8);
    }

    #[test]
    fn csv_layout() {
        let r = SweepResult {
            sweep_param: "snr_db".into(),
            rows: vec![SweepRow {
                sweep_value: 5.0,
                estimator: Estimator::MusicKt,
                mse: 0.1,
                mse_stderr: 1e-7,
                sscrb: 1.0 / 3.0,
                scrb: 2.5,
                trials: 10,
                failures: 0,
            }],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let line = lines.next().unwrap();
        assert!(line.starts_with("snr_db,5,MUSIC-KT,0.1,"));
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[4].parse::<f64>().unwrap(), 1e-7);
        assert_eq!(fields[5].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn bounds_table_ratio() {
        let rows = bounds_table(&ExperimentConfig::default()).unwrap();
        assert_eq!(rows.len(), 7);
        for r in rows {
            assert!((r.sscrb / r.scrb - 1.1).abs() < 1e-12);
        }
    }
}
