//! Monte Carlo experiment runner and CSV export.
//!
//! A grid expands into simulation cells in row-major order over
//! `family → H → K → N`. Replicate `r` of cell `c` draws its path from stream
//! `(master_seed, c·reps + r)`, and every algorithm of the grid is applied to
//! that same path. Any single replicate can therefore be re-run in isolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{applicable, Algorithm, Estimator, EstimatorConfig};
use crate::io::fmt_g17;
use crate::kernels::{Family, KernelSpec};
use crate::rng::RngStream;
use crate::simulate::{Backend, Sampler};

/// Cells whose failure fraction reaches this are marked failed.
pub const CELL_FAILURE_FRACTION: f64 = 0.05;

pub const SUMMARY_HEADER: &str =
    "family,H_true,K_true,index_true,sigma2,N,reps,algorithm,mean_estimate,mse,rmse,failures";
pub const REPLICATE_HEADER: &str =
    "family,H_true,K_true,N,algorithm,replicate,estimate,squared_error";
pub const HEATMAP_HEADER: &str = "H_true,N,rmse";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub families: Vec<Family>,
    pub hurst: Vec<f64>,
    /// Second parameter, used by bfBm/tfBm only.
    pub k: Vec<f64>,
    pub lengths: Vec<usize>,
    pub replicates: usize,
    pub sigma2: f64,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    pub backend: Backend,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            families: vec![Family::Fbm],
            hurst: vec![0.2, 0.5, 0.7, 0.8],
            k: Vec::new(),
            lengths: vec![128, 256, 512, 1024],
            replicates: 200,
            sigma2: 1.0,
            algorithms: vec![Algorithm::KnownSigma],
            master_seed: 0,
            backend: Backend::Auto,
        }
    }
}

/// One simulation configuration of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    pub cell_index: usize,
    pub spec: KernelSpec,
    pub n: usize,
}

impl ExperimentGrid {
    /// Simulation cells in seed-ledger order.
    pub fn cells(&self) -> Result<Vec<CellConfig>> {
        if self.replicates == 0 {
            return Err(Error::Argument("replicates must be at least 1".into()));
        }
        if let Some(&n) = self
            .lengths
            .iter()
            .find(|&&n| n < crate::estimate::MIN_PATH_LEN)
        {
            return Err(Error::Argument(format!(
                "path length {n} is below the estimator minimum {}",
                crate::estimate::MIN_PATH_LEN
            )));
        }
        let mut cells = Vec::new();
        for &family in &self.families {
            if family.uses_k() && self.k.is_empty() {
                return Err(Error::Argument(format!("family {family} needs a `k` list")));
            }
            let ks: &[f64] = if family.uses_k() { &self.k } else { &[1.0] };
            for &h in &self.hurst {
                for &k in ks {
                    let spec = KernelSpec::new(family, h, k, self.sigma2)?;
                    for &n in &self.lengths {
                        cells.push(CellConfig {
                            cell_index: cells.len(),
                            spec,
                            n,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }

    fn algorithms_for(&self, family: Family) -> Vec<Algorithm> {
        self.algorithms
            .iter()
            .copied()
            .filter(|&a| applicable(a, family))
            .collect()
    }

    /// Human-readable description of the grid and its stream assignment.
    pub fn seed_ledger(&self) -> Result<String> {
        let mut out = String::new();
        let names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        writeln!(
            out,
            "# master_seed={} reps={} sigma2={} backend={:?} algorithms={}",
            self.master_seed,
            self.replicates,
            fmt_g17(self.sigma2),
            self.backend,
            names.join(",")
        )
        .unwrap();
        writeln!(out, "# stream_index = cell_index * reps + replicate").unwrap();
        writeln!(out, "# cell_index,family,H,K,N,first_stream,algorithms").unwrap();
        for cell in self.cells()? {
            let algs: Vec<&str> = self
                .algorithms_for(cell.spec.family())
                .iter()
                .map(|a| a.name())
                .collect();
            writeln!(
                out,
                "# {},{},{},{},{},{},{}",
                cell.cell_index,
                cell.spec.family(),
                fmt_g17(cell.spec.h()),
                fmt_g17(cell.spec.k()),
                cell.n,
                cell.cell_index as u64 * self.replicates as u64,
                algs.join(";")
            )
            .unwrap();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub cell_index: usize,
    pub spec: KernelSpec,
    pub n: usize,
    pub algorithm: Algorithm,
    pub replicates: usize,
    /// Per-replicate estimates; `None` where the estimator failed.
    pub estimates: Vec<Option<f64>>,
    pub mean_estimate: f64,
    pub mse: f64,
    pub rmse: f64,
    pub failures: usize,
    /// Set when failures reached [`CELL_FAILURE_FRACTION`]; aggregates are NaN.
    pub failed: bool,
}

impl McCell {
    pub fn index_true(&self) -> f64 {
        self.spec.self_similarity_index()
    }

    fn aggregate(cell: &CellConfig, algorithm: Algorithm, estimates: Vec<Option<f64>>) -> Self {
        let replicates = estimates.len();
        let failures = estimates.iter().filter(|e| e.is_none()).count();
        let failed = failures as f64 >= CELL_FAILURE_FRACTION * replicates as f64 && failures > 0;
        let truth = cell.spec.self_similarity_index();
        let (mean_estimate, mse) = if failed {
            (f64::NAN, f64::NAN)
        } else {
            let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
            let m = ok.len() as f64;
            (
                ok.iter().sum::<f64>() / m,
                ok.iter().map(|h| (h - truth).powi(2)).sum::<f64>() / m,
            )
        };
        McCell {
            cell_index: cell.cell_index,
            spec: cell.spec,
            n: cell.n,
            algorithm,
            replicates,
            estimates,
            mean_estimate,
            mse,
            rmse: mse.sqrt(),
            failures,
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTable {
    pub grid: ExperimentGrid,
    /// One entry per (cell, algorithm), cells in ledger order.
    pub cells: Vec<McCell>,
}

impl McTable {
    pub fn find(
        &self,
        family: Family,
        h: f64,
        k: f64,
        n: usize,
        algorithm: Algorithm,
    ) -> Option<&McCell> {
        self.cells.iter().find(|c| {
            c.spec.family() == family
                && c.spec.h() == h
                && (!family.uses_k() || c.spec.k() == k)
                && c.n == n
                && c.algorithm == algorithm
        })
    }
}

/// Runs every cell×replicate task on a pool of `workers` threads. The result
/// does not depend on `workers`.
pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> Result<McTable> {
    run_grid_with(grid, workers, &EstimatorConfig::default())
}

pub fn run_grid_with(
    grid: &ExperimentGrid,
    workers: usize,
    config: &EstimatorConfig,
) -> Result<McTable> {
    if workers == 0 {
        return Err(Error::Argument("workers must be at least 1".into()));
    }
    let cells = grid.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;

    let reps = grid.replicates;
    pool.install(|| -> Result<McTable> {
        let samplers: Vec<Sampler> = cells
            .par_iter()
            .map(|c| Sampler::new(&c.spec, c.n, grid.backend))
            .collect::<Result<_>>()?;
        let estimators: Vec<Vec<Estimator>> = cells
            .iter()
            .map(|c| {
                grid.algorithms_for(c.spec.family())
                    .into_iter()
                    .map(|a| Estimator::for_model(a, &c.spec))
                    .collect()
            })
            .collect();

        let tasks: Vec<(usize, usize)> = (0..cells.len())
            .flat_map(|c| (0..reps).map(move |r| (c, r)))
            .collect();
        let results: Vec<Vec<Option<f64>>> = tasks
            .par_iter()
            .map(|&(c, r)| {
                let stream = RngStream::new(grid.master_seed, (c * reps + r) as u64);
                let path = samplers[c].sample(stream);
                estimators[c]
                    .iter()
                    .map(|e| {
                        e.estimate_with(&path, config)
                            .ok()
                            .map(|res| res.index_estimate)
                            .filter(|h| h.is_finite())
                    })
                    .collect()
            })
            .collect();

        let mut out = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let rows = &results[c * reps..(c + 1) * reps];
            for (a, est) in estimators[c].iter().enumerate() {
                let estimates = rows.iter().map(|row| row[a]).collect();
                out.push(McCell::aggregate(cell, est.algorithm(), estimates));
            }
        }
        Ok(McTable {
            grid: grid.clone(),
            cells: out,
        })
    })
}

/// Files written by [`export_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedFiles {
    pub summary: PathBuf,
    pub replicates: PathBuf,
    pub heatmaps: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn summary_csv(table: &McTable) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in &table.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.spec.family(),
            fmt_g17(c.spec.h()),
            fmt_g17(c.spec.k()),
            fmt_g17(c.index_true()),
            fmt_g17(c.spec.sigma2()),
            c.n,
            c.replicates,
            c.algorithm,
            fmt_g17(c.mean_estimate),
            fmt_g17(c.mse),
            fmt_g17(c.rmse),
            c.failures
        )
        .unwrap();
    }
    out
}

pub fn replicates_csv(table: &McTable) -> String {
    let mut out = String::from(REPLICATE_HEADER);
    out.push('\n');
    for c in &table.cells {
        let truth = c.index_true();
        for (r, est) in c.estimates.iter().enumerate() {
            let (e, se) = match est {
                Some(h) => (fmt_g17(*h), fmt_g17((h - truth).powi(2))),
                None => ("nan".to_string(), "nan".to_string()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.spec.family(),
                fmt_g17(c.spec.h()),
                fmt_g17(c.spec.k()),
                c.n,
                c.algorithm,
                r,
                e,
                se
            )
            .unwrap();
        }
    }
    out
}

/// `H_true,N,rmse` tables, one per (family, K, algorithm) combination, keyed
/// by a file-name suffix (empty when the table holds a single combination).
pub fn heatmap_csvs(table: &McTable) -> Vec<(String, String)> {
    let mut groups: BTreeMap<(Family, u64, Algorithm), Vec<&McCell>> = BTreeMap::new();
    let mut order = Vec::new();
    for c in &table.cells {
        let key = (c.spec.family(), c.spec.k().to_bits(), c.algorithm);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(c);
    }
    if groups.is_empty() {
        return vec![(String::new(), format!("{HEATMAP_HEADER}\n"))];
    }
    let single = groups.len() == 1;
    order
        .into_iter()
        .map(|key| {
            let cells = &groups[&key];
            let mut out = format!("{HEATMAP_HEADER}\n");
            for c in cells {
                writeln!(out, "{},{},{}", fmt_g17(c.spec.h()), c.n, fmt_g17(c.rmse)).unwrap();
            }
            let (family, k_bits, algorithm) = key;
            let suffix = if single {
                String::new()
            } else if family.uses_k() {
                format!("_{family}_k{}_{algorithm}", fmt_g17(f64::from_bits(k_bits)))
            } else {
                format!("_{family}_{algorithm}")
            };
            (suffix, out)
        })
        .collect()
}

/// Writes `summary.csv`, `replicates.csv` and the heatmap file(s) into `dir`.
pub fn export_table(table: &McTable, dir: &Path) -> Result<ExportedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let summary = dir.join("summary.csv");
    write_file(&summary, &summary_csv(table))?;
    let replicates = dir.join("replicates.csv");
    write_file(&replicates, &replicates_csv(table))?;
    let mut heatmaps = Vec::new();
    for (suffix, contents) in heatmap_csvs(table) {
        let path = dir.join(format!("heatmap{suffix}.csv"));
        write_file(&path, &contents)?;
        heatmaps.push(path);
    }
    Ok(ExportedFiles {
        summary,
        replicates,
        heatmaps,
    })
}

/// Parses the flat `key = value` grid format. List values are comma
/// separated; `#` starts a comment line.
///
/// Keys: `families`, `hurst`, `k`, `lengths`, `reps`, `algorithms`,
/// `sigma2`, `seed`, `backend`.
pub fn parse_grid_config(text: &str, origin: &Path) -> Result<ExperimentGrid> {
    let err = |line: usize, message: String| Error::Config {
        path: origin.to_path_buf(),
        line,
        message,
    };
    fn list<T, F: Fn(&str) -> Option<T>>(value: &str, parse: F) -> Option<Vec<T>> {
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(&parse)
            .collect::<Option<Vec<T>>>()
            .filter(|v| !v.is_empty())
    }

    let mut grid = ExperimentGrid {
        families: Vec::new(),
        hurst: Vec::new(),
        lengths: Vec::new(),
        ..ExperimentGrid::default()
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| err(line, format!("invalid {what} `{value}`"));
        match key {
            "families" | "family" => {
                grid.families = list(value, |s| s.parse().ok()).ok_or_else(|| bad("family list"))?
            }
            "hurst" => {
                grid.hurst = list(value, |s| s.parse().ok()).ok_or_else(|| bad("hurst list"))?
            }
            "k" => grid.k = list(value, |s| s.parse().ok()).ok_or_else(|| bad("k list"))?,
            "lengths" => {
                grid.lengths = list(value, |s| s.parse().ok()).ok_or_else(|| bad("length list"))?
            }
            "reps" => grid.replicates = value.parse().map_err(|_| bad("replicate count"))?,
            "algorithms" => {
                grid.algorithms =
                    list(value, |s| s.parse().ok()).ok_or_else(|| bad("algorithm list"))?
            }
            "sigma2" => grid.sigma2 = value.parse().map_err(|_| bad("sigma2"))?,
            "seed" => grid.master_seed = value.parse().map_err(|_| bad("seed"))?,
            "backend" => grid.backend = value.parse().map_err(|_| bad("backend"))?,
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }
    let missing = |key: &str| err(0, format!("missing required key `{key}`"));
    if grid.families.is_empty() {
        return Err(missing("families"));
    }
    if grid.hurst.is_empty() {
        return Err(missing("hurst"));
    }
    if grid.lengths.is_empty() {
        return Err(missing("lengths"));
    }
    grid.cells().map_err(|e| err(0, e.to_string()))?;
    Ok(grid)
}

pub fn read_grid_config(path: &Path) -> Result<ExperimentGrid> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_grid_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            families: vec![Family::Fbm],
            hurst: vec![0.3, 0.7],
            k: vec![],
            lengths: vec![64, 128],
            replicates: 6,
            sigma2: 1.0,
            algorithms: vec![Algorithm::KnownSigma, Algorithm::Qv],
            master_seed: 9,
            backend: Backend::Auto,
        }
    }

    #[test]
    fn cell_order_is_row_major() {
        let g = ExperimentGrid {
            families: vec![Family::Fbm, Family::Bfbm],
            hurst: vec![0.2, 0.8],
            k: vec![0.5, 0.8],
            lengths: vec![16, 32],
            ..ExperimentGrid::default()
        };
        let cells = g.cells().unwrap();
        assert_eq!(cells.len(), 2 * 2 + 2 * 2 * 2);
        assert_eq!(cells[1].n, 32);
        assert_eq!(cells[2].spec.h(), 0.8);
        assert_eq!(cells[4].spec.family(), Family::Bfbm);
        assert_eq!(cells[4].spec.k(), 0.5);
        assert_eq!(cells[6].spec.k(), 0.8);
        assert!(cells.iter().enumerate().all(|(i, c)| c.cell_index == i));
    }

    #[test]
    fn aggregates_are_consistent() {
        let table = run_grid(&tiny_grid(), 2).unwrap();
        assert_eq!(table.cells.len(), 2 * 2 * 2);
        for c in &table.cells {
            let ok: Vec<f64> = c.estimates.iter().flatten().copied().collect();
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            assert!((c.mean_estimate - mean).abs() < 1e-15);
            assert!((c.rmse * c.rmse - c.mse).abs() <= 1e-12 * c.mse);
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let g = tiny_grid();
        assert_eq!(run_grid(&g, 1).unwrap(), run_grid(&g, 8).unwrap());
    }

    #[test]
    fn replicate_reruns_in_isolation() {
        let g = tiny_grid();
        let table = run_grid(&g, 3).unwrap();
        let cell = table
            .find(Family::Fbm, 0.7, 1.0, 128, Algorithm::KnownSigma)
            .unwrap();
        let r = 4;
        let stream = RngStream::new(g.master_seed, (cell.cell_index * g.replicates + r) as u64);
        let path = crate::simulate::simulate_fbm_circulant(0.7, 1.0, 128, stream).unwrap();
        let again = crate::estimate::estimate_known_sigma(&path, 1.0)
            .unwrap()
            .index_estimate;
        assert_eq!(cell.estimates[r], Some(again));
    }

    #[test]
    fn failure_threshold() {
        let cell = CellConfig {
            cell_index: 0,
            spec: KernelSpec::fbm(0.5, 1.0).unwrap(),
            n: 64,
        };
        let mut est = vec![Some(0.5); 100];
        est[3] = None;
        let c = McCell::aggregate(&cell, Algorithm::Qv, est.clone());
        assert!(!c.failed);
        assert_eq!(c.failures, 1);
        assert_eq!(c.mean_estimate, 0.5);
        for e in est.iter_mut().take(5) {
            *e = None;
        }
        let c = McCell::aggregate(&cell, Algorithm::Qv, est);
        assert!(c.failed);
        assert!(c.mean_estimate.is_nan());
    }

    #[test]
    fn empty_table_exports_headers() {
        let table = McTable {
            grid: ExperimentGrid::default(),
            cells: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let files = export_table(&table, dir.path()).unwrap();
        assert_eq!(
            fs::read_to_string(files.summary).unwrap(),
            format!("{SUMMARY_HEADER}\n")
        );
        assert_eq!(
            fs::read_to_string(files.replicates).unwrap(),
            format!("{REPLICATE_HEADER}\n")
        );
        assert_eq!(files.heatmaps.len(), 1);
        assert_eq!(
            fs::read_to_string(&files.heatmaps[0]).unwrap(),
            format!("{HEATMAP_HEADER}\n")
        );
    }

    #[test]
    fn heatmap_files_per_combination() {
        let table = run_grid(&tiny_grid(), 2).unwrap();
        let maps = heatmap_csvs(&table);
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[0].0, "_fbm_known-sigma");
        assert_eq!(maps[0].1.lines().count(), 1 + 2 * 2);
    }

    #[test]
    fn config_parsing() {
        let text = "# table 7\nfamilies = bfbm\nhurst = 0.2, 0.8\nk = 0.5,0.8\nlengths = 128,256\nreps = 10\nalgorithms = known-sigma, kurtosis\nseed = 77\n";
        let g = parse_grid_config(text, Path::new("t.grid")).unwrap();
        assert_eq!(g.families, vec![Family::Bfbm]);
        assert_eq!(g.k, vec![0.5, 0.8]);
        assert_eq!(g.replicates, 10);
        assert_eq!(g.master_seed, 77);
        assert_eq!(
            g.algorithms,
            vec![Algorithm::KnownSigma, Algorithm::Kurtosis]
        );

        let bad = "families = fbm\nhurst = 0.5\nlengths 128\n";
        match parse_grid_config(bad, Path::new("b.grid")) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "families = fbm\nhurst = 1.5\nlengths = 128\n";
        assert!(parse_grid_config(bad, Path::new("b.grid")).is_err());
        let bad = "families = fbm\nhurst = 0.5\nlengths = 128\ncolour = blue\n";
        assert!(matches!(
            parse_grid_config(bad, Path::new("b.grid")),
            Err(Error::Config { line: 4, .. })
        ));
    }
}
