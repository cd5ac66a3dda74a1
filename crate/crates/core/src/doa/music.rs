use super::grid::{FrequencyGrid, GridSteering};
use super::peaks::pick_peaks;
use super::{DoaEstimate, Estimator};
use crate::ces::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianEigen};
use crate::scatter::{self, HuberTuning, ScatterEstimate, ScatterEstimator};

/// MUSIC pseudospectrum `1 / Σ_{n>K} |a(ν)^H v_n|²` on every grid point.
pub fn music_pseudospectrum(scatter: &CMatrix, k: usize, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    music_pseudospectrum_with(scatter, k, &GridSteering::new(grid, scatter.nrows()))
}

pub fn music_pseudospectrum_with(
    scatter: &CMatrix,
    k: usize,
    steering: &GridSteering,
) -> Result<Vec<f64>> {
    let n = scatter.nrows();
    if scatter.ncols() != n || steering.n_sensors() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: steering.n_sensors(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "MUSIC needs 1 <= K < N, got K={k}, N={n}"
        )));
    }
    let eig = HermitianEigen::new(scatter);
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "eigendecomposition produced non-finite values".into(),
        ));
    }
    // Ascending order: the first N − K eigenvectors span the noise subspace.
    let noise = eig.eigenvectors.columns(0, n - k);
    let projector = noise * noise.adjoint();
    let floor = n as f64 * f64::EPSILON * f64::EPSILON;
    let mut denom = Vec::new();
    steering.quadratic_forms(&projector, &mut denom);
    Ok(denom.into_iter().map(|d| 1.0 / d.max(floor)).collect())
}

/// Runs one of the scatter estimators on `snapshots`. Huber falls back to
/// `q = 0.6` when no tuning is supplied.
pub fn estimate_scatter(
    snapshots: &SnapshotSet,
    estimator: ScatterEstimator,
    huber_tuning: Option<&HuberTuning>,
) -> Result<ScatterEstimate> {
    match estimator {
        ScatterEstimator::Scm => Ok(scatter::scm(snapshots)),
        ScatterEstimator::Nscm => Ok(scatter::nscm(snapshots)),
        ScatterEstimator::KendallTau => scatter::kendall_tau_scm(snapshots),
        ScatterEstimator::Tyler => scatter::tyler(snapshots),
        ScatterEstimator::Huber => {
            let tuning = match huber_tuning {
                Some(t) => *t,
                None => HuberTuning::new(0.6, snapshots.n_sensors())?,
            };
            scatter::huber(snapshots, &tuning)
        }
    }
}

/// MUSIC estimate of `k` spatial frequencies.
pub fn music_estimate(
    snapshots: &SnapshotSet,
    estimator: ScatterEstimator,
    k: usize,
    grid: &FrequencyGrid,
    huber_tuning: Option<&HuberTuning>,
) -> Result<DoaEstimate> {
    music_estimate_with(
        snapshots,
        estimator,
        k,
        grid,
        &GridSteering::new(grid, snapshots.n_sensors()),
        huber_tuning,
    )
}

pub(crate) fn music_estimate_with(
    snapshots: &SnapshotSet,
    estimator: ScatterEstimator,
    k: usize,
    grid: &FrequencyGrid,
    steering: &GridSteering,
    huber_tuning: Option<&HuberTuning>,
) -> Result<DoaEstimate> {
    let n = snapshots.n_sensors();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "MUSIC needs 1 <= K < N, got K={k}, N={n}"
        )));
    }
    let scatter = estimate_scatter(snapshots, estimator, huber_tuning)?;
    let spectrum = music_pseudospectrum_with(&scatter.matrix, k, steering)?;
    let mut est = pick_peaks(&spectrum, grid, k, Estimator::music(estimator))?;
    est.diagnostics.iterations = scatter.iterations_used;
    est.diagnostics.converged = scatter.converged;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{build_scatter, SourceScenario};
    use crate::ces::{sample_snapshots, DensityGenerator};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn reference_gamma(snr1_db: f64, snr2_db: f64) -> CMatrix {
        let (p1, p2) = (10f64.powf(snr1_db / 10.0), 10f64.powf(snr2_db / 10.0));
        let off = c(0.3 * (p1 * p2).sqrt());
        CMatrix::from_row_slice(2, 2, &[c(p1), off, off, c(p2)])
    }

    #[test]
    fn true_scatter_peaks_on_source() {
        let grid = FrequencyGrid::new(256).unwrap();
        let nu = grid.points()[160];
        let s = SourceScenario::new(8, vec![nu], CMatrix::from_element(1, 1, c(1.0)), 1.0).unwrap();
        let spec = music_pseudospectrum(&build_scatter(&s), 1, &grid).unwrap();
        let best = (0..256)
            .max_by(|&a, &b| spec[a].total_cmp(&spec[b]))
            .unwrap();
        assert_eq!(best, 160);
        assert!(spec.iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn identity_scatter_is_flat() {
        let grid = FrequencyGrid::new(128).unwrap();
        let spec = music_pseudospectrum(&CMatrix::identity(6, 6), 2, &grid).unwrap();
        for &x in &spec {
            assert!((x / spec[0] - 1.0).abs() < 1e-10);
        }
        assert!((spec[0] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn spectrum_is_scale_invariant() {
        let grid = FrequencyGrid::new(512).unwrap();
        let sigma = build_scatter(
            &SourceScenario::new(8, vec![-0.1, 0.3], reference_gamma(15.0, 10.0), 1.0).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = sample_snapshots(&sigma, &DensityGenerator::Gaussian, 24, &mut rng).unwrap();
        let m = scatter::scm(&set).matrix;
        let a = music_pseudospectrum(&m, 2, &grid).unwrap();
        let b = music_pseudospectrum(&m.scale(37.5), 2, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_too_many_sources() {
        let grid = FrequencyGrid::new(64).unwrap();
        let set = SnapshotSet::from_columns(CMatrix::identity(4, 8)).unwrap();
        assert!(music_estimate(&set, ScatterEstimator::Scm, 4, &grid, None).is_err());
        assert!(music_pseudospectrum(&CMatrix::identity(4, 4), 4, &grid).is_err());
    }

    #[test]
    fn high_snr_recovers_sources() {
        let grid = FrequencyGrid::new(4096).unwrap();
        let sigma = build_scatter(
            &SourceScenario::new(8, vec![-0.1, 0.3], reference_gamma(60.0, 50.0), 1.0).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut good = 0;
        for _ in 0..100 {
            let set = sample_snapshots(&sigma, &DensityGenerator::Gaussian, 24, &mut rng).unwrap();
            let est = music_estimate(&set, ScatterEstimator::Scm, 2, &grid, None).unwrap();
            if (est.frequencies[0] + 0.1).abs() < 1e-3 && (est.frequencies[1] - 0.3).abs() < 1e-3 {
                good += 1;
            }
        }
        assert!(good >= 99, "{good}/100");
    }

    #[test]
    fn scm_and_tyler_agree_on_gaussian_data() {
        let grid = FrequencyGrid::new(4096).unwrap();
        let sigma = build_scatter(
            &SourceScenario::new(8, vec![-0.1, 0.3], reference_gamma(15.0, 10.0), 1.0).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = sample_snapshots(&sigma, &DensityGenerator::Gaussian, 1000, &mut rng).unwrap();
        let a = music_estimate(&set, ScatterEstimator::Scm, 2, &grid, None).unwrap();
        let b = music_estimate(&set, ScatterEstimator::Tyler, 2, &grid, None).unwrap();
        for (x, y) in a.frequencies.iter().zip(&b.frequencies) {
            assert!((x - y).abs() < 10.0 * grid.spacing());
        }
    }

    #[test]
    fn tyler_normalization_does_not_move_estimate() {
        let grid = FrequencyGrid::new(1024).unwrap();
        let sigma = build_scatter(
            &SourceScenario::new(8, vec![-0.1, 0.3], reference_gamma(15.0, 10.0), 1.0).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = sample_snapshots(
            &sigma,
            &DensityGenerator::student_t(2.0).unwrap(),
            24,
            &mut rng,
        )
        .unwrap();
        let t = scatter::tyler(&set).unwrap().matrix;
        let a = pick_peaks(
            &music_pseudospectrum(&t, 2, &grid).unwrap(),
            &grid,
            2,
            Estimator::MusicTyler,
        )
        .unwrap();
        let b = pick_peaks(
            &music_pseudospectrum(&t.scale(0.01), 2, &grid).unwrap(),
            &grid,
            2,
            Estimator::MusicTyler,
        )
        .unwrap();
        for (x, y) in a.frequencies.iter().zip(&b.frequencies) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
