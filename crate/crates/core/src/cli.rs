//! Command-line front end: `sweep`, `bounds` and `validate`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ces::{ks_critical_1pct, ks_statistic, DensityGenerator};
use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::harness::{bounds_table, run_sweep, write_bounds_csv};

#[derive(Debug, Parser)]
#[command(
    name = "ces-doa",
    version,
    about = "Robust DOA estimation under CES data: Monte Carlo sweeps and bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo sweep and write a CSV plus a `.manifest.json`.
    Sweep(RunArgs),
    /// Write the SCRB/SSCRB table for the configured sweep (no Monte Carlo).
    Bounds(RunArgs),
    /// Check closed forms against quadrature and the samplers against their laws.
    Validate,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunArgs {
    fn load_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => parse_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Everything needed to reproduce a results file.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub master_seed: u64,
    pub duration_seconds: f64,
    pub failures: std::collections::BTreeMap<String, usize>,
    pub config: &'a ExperimentConfig,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

/// Writes via `body` to `path` (or stdout), removing the file on failure.
fn write_output(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    match path {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::Config(e.to_string()))
        }
        Some(p) => {
            let result = File::create(p).and_then(|f| {
                let mut w = BufWriter::new(f);
                body(&mut w)?;
                w.flush()
            });
            result.map_err(|e| {
                let _ = std::fs::remove_file(p);
                io_err(p, e)
            })
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}"))),
    }
}

fn sweep(args: &RunArgs) -> Result<()> {
    let config = args.load_config()?;
    let start = Instant::now();
    let result = with_threads(args.threads, || run_sweep(&config))??;
    let duration = start.elapsed().as_secs_f64();
    write_output(args.output.as_deref(), |w| result.write_csv(w))?;
    if let Some(out) = &args.output {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            master_seed: config.master_seed,
            duration_seconds: duration,
            failures: result.failure_counts(),
            config: &config,
        };
        let mpath = manifest_path(out);
        let written = write_output(Some(&mpath), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(io::Error::other)?;
            writeln!(w)
        });
        if let Err(e) = written {
            let _ = std::fs::remove_file(out);
            return Err(e);
        }
    }
    Ok(())
}

fn bounds(args: &RunArgs) -> Result<()> {
    let config = args.load_config()?;
    let rows = bounds_table(&config)?;
    write_output(args.output.as_deref(), |w| {
        write_bounds_csv(config.sweep_param(), &rows, w)
    })
}

/// One self-check line.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Closed-form `Ē{Q²ψ²}` against quadrature, `E{Q} = N` by quadrature, and
/// a Kolmogorov–Smirnov test of each modular-variate sampler.
pub fn self_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    let families: Vec<DensityGenerator> = std::iter::once(DensityGenerator::Gaussian)
        .chain([1.5, 2.0, 3.0, 5.0, 10.0].map(|lambda| DensityGenerator::StudentT { lambda }))
        .chain([0.1, 0.5, 1.0, 1.5].map(|s| DensityGenerator::GeneralizedGaussian { s }))
        .collect();
    for dg in &families {
        for n in [2, 4, 8] {
            let closed = dg.expected_q2psi2(n);
            let (passed, detail) = match dg.expected_q2psi2_numeric(n) {
                Ok(num) => {
                    let rel = (num / closed - 1.0).abs();
                    (
                        rel < 1e-8,
                        format!("closed {closed}, quadrature {num}, rel {rel:.2e}"),
                    )
                }
                Err(e) => (false, e.to_string()),
            };
            checks.push(Check {
                name: format!("E{{Q^2 psi^2}} {} N={n}", dg.label()),
                passed,
                detail,
            });
            let (passed, detail) = match dg.modular_moment_numeric(n, 1) {
                Ok(m) => {
                    let rel = (m / n as f64 - 1.0).abs();
                    (rel < 1e-8, format!("E{{Q}} = {m}, rel {rel:.2e}"))
                }
                Err(e) => (false, e.to_string()),
            };
            checks.push(Check {
                name: format!("E{{Q}} = N {} N={n}", dg.label()),
                passed,
                detail,
            });
        }
    }
    let n = 8;
    let draws = 20_000;
    for (i, dg) in [
        DensityGenerator::Gaussian,
        DensityGenerator::StudentT { lambda: 2.0 },
        DensityGenerator::GeneralizedGaussian { s: 0.5 },
    ]
    .iter()
    .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE + i as u64);
        let samples: Result<Vec<f64>> = (0..draws)
            .map(|_| dg.sample_modular_variate(n, &mut rng).map(|q| q.value()))
            .collect();
        let (passed, detail) = match samples {
            Ok(mut s) => {
                let d = ks_statistic(&mut s, |q| dg.modular_cdf(n, q).unwrap_or(f64::NAN));
                let crit = ks_critical_1pct(draws);
                (d < crit, format!("KS D = {d:.4}, 1% critical {crit:.4}"))
            }
            Err(e) => (false, e.to_string()),
        };
        checks.push(Check {
            name: format!("sampler {} N={n}", dg.label()),
            passed,
            detail,
        });
    }
    checks
}

fn validate() -> Result<bool> {
    let checks = self_checks();
    let mut out = io::stdout().lock();
    for c in &checks {
        let _ = writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

pub fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep(args) => sweep(args).map(|_| true),
        Command::Bounds(args) => bounds(args).map(|_| true),
        Command::Validate => validate(),
    }
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
