//! Command-line front end: `simulate`, `estimate`, `bench` and `nile`.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 degenerate data,
//! 4 numerical failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bootstrap::{bias_correct, BootstrapModel, BootstrapResult};
use crate::error::{Error, Result};
use crate::estimate::{Algorithm, EstimateResult, Estimator};
use crate::harness::{export_table, read_grid_config, run_grid};
use crate::io::{fmt_g17, read_path_csv, read_series_file, write_path_csv};
use crate::kernels::{Family, KernelSpec};
use crate::rng::RngStream;
use crate::simulate::{Backend, SamplePath, Sampler};

pub const WORKERS_ENV: &str = "LAMPERTI_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "lamperti",
    version,
    about = "Self-similar Gaussian process simulation and index estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path on the grid j/n, j = 0..n, and write it as `t,value` CSV.
    Simulate {
        #[arg(long, value_enum)]
        process: ProcessArg,
        #[arg(long)]
        hurst: f64,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Substream index under the master seed.
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the self-similarity index of a `t,value` path file.
    Estimate {
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a Monte Carlo grid and write summary, replicate and heatmap CSVs.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the grid file's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate H on a window of an annual series, optionally bias-corrected.
    Nile {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        from_year: i64,
        #[arg(long)]
        to_year: i64,
        #[arg(long, default_value_t = 622)]
        start_year: i64,
        #[arg(long, value_enum, default_value_t = Preprocess::Demean)]
        preprocess: Preprocess,
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcessArg {
    Fbm,
    Sfbm,
    Bfbm,
    Tfbm,
}

impl From<ProcessArg> for Family {
    fn from(p: ProcessArg) -> Self {
        match p {
            ProcessArg::Fbm => Family::Fbm,
            ProcessArg::Sfbm => Family::Sfbm,
            ProcessArg::Bfbm => Family::Bfbm,
            ProcessArg::Tfbm => Family::Tfbm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Auto,
    Cholesky,
    Circulant,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Cholesky => Backend::Cholesky,
            BackendArg::Circulant => Backend::Circulant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    KnownSigma,
    Kurtosis,
    Sfbm,
    Tfbm,
    Qv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preprocess {
    /// Use the levels as they are.
    None,
    /// Subtract the window mean.
    Demean,
    /// Partial sums of the demeaned levels.
    Cumsum,
}

/// Estimator for a CLI algorithm choice. sfBm and tfBm assume unit scale
/// unless `--sigma2` is given.
pub fn estimator_for(algorithm: AlgorithmArg, sigma2: Option<f64>) -> Result<Estimator> {
    Ok(match algorithm {
        AlgorithmArg::KnownSigma => Estimator::KnownSigma {
            sigma2: sigma2.ok_or_else(|| {
                Error::Argument("--sigma2 is required for --algorithm known-sigma".into())
            })?,
        },
        AlgorithmArg::Kurtosis => Estimator::Kurtosis,
        AlgorithmArg::Sfbm => Estimator::Sfbm {
            sigma2: sigma2.unwrap_or(1.0),
        },
        AlgorithmArg::Tfbm => Estimator::Tfbm {
            sigma2: sigma2.unwrap_or(1.0),
        },
        AlgorithmArg::Qv => Estimator::Qv,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const ESTIMATE_HEADER: &str =
    "algorithm,index_estimate,h_component,k_component,iterations,residual,warnings";

pub fn estimate_row(result: &EstimateResult) -> String {
    let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}",
        result.algorithm,
        fmt_g17(result.index_estimate),
        opt(result.h_component),
        opt(result.k_component),
        result.report.iterations,
        opt(result.report.residual),
        csv_field(&result.warnings.join("; "))
    )
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Outcome of the annual-series pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct NileReport {
    pub from_year: i64,
    pub to_year: i64,
    pub count: usize,
    pub preprocess: Preprocess,
    pub estimate: EstimateResult,
    pub bootstrap: Option<BootstrapResult>,
}

/// Selects years `from..=to` of a series starting at `start_year`.
pub fn select_window(values: &[f64], start_year: i64, from: i64, to: i64) -> Result<Vec<f64>> {
    let end_year = start_year + values.len() as i64 - 1;
    if from > to || from < start_year || to > end_year {
        return Err(Error::Argument(format!(
            "window {from}..{to} is outside the series range {start_year}..{end_year}"
        )));
    }
    let lo = (from - start_year) as usize;
    let hi = (to - start_year) as usize;
    Ok(values[lo..=hi].to_vec())
}

pub fn preprocess(values: &[f64], mode: Preprocess) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    match mode {
        Preprocess::None => values.to_vec(),
        Preprocess::Demean => values.iter().map(|v| v - mean).collect(),
        Preprocess::Cumsum => values
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v - mean;
                Some(*acc)
            })
            .collect(),
    }
}

/// Kurtosis estimate on the windowed series mapped onto `j/n`, `j = 1..=n`,
/// with optional fBm parametric bootstrap bias correction.
pub fn nile_pipeline(
    values: &[f64],
    start_year: i64,
    from_year: i64,
    to_year: i64,
    mode: Preprocess,
    bootstrap: usize,
    seed: u64,
) -> Result<NileReport> {
    let window = select_window(values, start_year, from_year, to_year)?;
    let series = preprocess(&window, mode);
    let path = SamplePath::from_observations(&series)?;
    let estimate = Estimator::Kurtosis.estimate(&path)?;
    let bootstrap = if bootstrap > 0 {
        Some(bias_correct(
            &path,
            Estimator::Kurtosis,
            BootstrapModel::Fbm,
            bootstrap,
            RngStream::new(seed, 0),
        )?)
    } else {
        None
    };
    Ok(NileReport {
        from_year,
        to_year,
        count: window.len(),
        preprocess: mode,
        estimate,
        bootstrap,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            process,
            hurst,
            k,
            sigma2,
            n,
            seed,
            stream,
            backend,
            out,
        } => {
            let family = Family::from(process);
            if family.uses_k() && k.is_none() {
                return Err(Error::ParameterDomain(format!(
                    "--k is required for {family}"
                )));
            }
            let spec = KernelSpec::new(family, hurst, k.unwrap_or(1.0), sigma2)
                .map_err(|e| Error::ParameterDomain(format!("--hurst/--k/--sigma2: {e}")))?;
            if n < 2 {
                return Err(Error::ParameterDomain(format!("--n {n}: need at least 2")));
            }
            let path = Sampler::new(&spec, n, backend.into())?.sample(RngStream::new(seed, stream));
            write_path_csv(&path, &out)
        }
        Command::Estimate {
            algorithm,
            sigma2,
            input,
        } => {
            let estimator = estimator_for(algorithm, sigma2)?;
            let path = read_path_csv(&input)?;
            let result = estimator.estimate(&path)?;
            println!("{ESTIMATE_HEADER}");
            println!("{}", estimate_row(&result));
            Ok(())
        }
        Command::Bench {
            grid,
            out_dir,
            workers,
            seed,
        } => {
            let mut config = read_grid_config(&grid)?;
            if let Some(seed) = seed {
                config.master_seed = seed;
            }
            let workers = workers.unwrap_or_else(default_workers);
            let ledger = config.seed_ledger()?;
            print!("{ledger}");
            let table = run_grid(&config, workers)?;
            let files = export_table(&table, &out_dir)?;
            std::fs::write(out_dir.join("ledger.txt"), &ledger)
                .map_err(|e| Error::io("writing ledger.txt", e))?;
            println!("# wrote {}", files.summary.display());
            println!("# wrote {}", files.replicates.display());
            for h in &files.heatmaps {
                println!("# wrote {}", h.display());
            }
            Ok(())
        }
        Command::Nile {
            file,
            from_year,
            to_year,
            start_year,
            preprocess,
            bootstrap,
            seed,
        } => {
            let values = read_series_file(&file)?;
            let report = nile_pipeline(
                &values, start_year, from_year, to_year, preprocess, bootstrap, seed,
            )?;
            println!(
                "window,{}..{},values,{},preprocess,{:?}",
                report.from_year, report.to_year, report.count, report.preprocess
            );
            println!("{ESTIMATE_HEADER}");
            println!("{}", estimate_row(&report.estimate));
            if let Some(b) = &report.bootstrap {
                println!("h_raw,h_bias_corrected,replicates,bootstrap_mean,bootstrap_sd");
                println!(
                    "{},{},{},{},{}",
                    fmt_g17(b.h_raw),
                    fmt_g17(b.h_bias_corrected),
                    b.replicates,
                    fmt_g17(b.bootstrap_mean),
                    fmt_g17(b.bootstrap_sd)
                );
            }
            Ok(())
        }
    }
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::KnownSigma => Algorithm::KnownSigma,
            AlgorithmArg::Kurtosis => Algorithm::Kurtosis,
            AlgorithmArg::Sfbm => Algorithm::SfbmKnown,
            AlgorithmArg::Tfbm => Algorithm::TfbmKnown,
            AlgorithmArg::Qv => Algorithm::Qv,
        }
    }
}
