//! The benchmark harness: runs a grid of `(algorithm, sweep value, seed)`
//! cells, writes one JSON report per cell plus a manifest, and flattens
//! finished runs into plot-ready long-format CSV tables.
//!
//! Every cell is driven by one master seed that fans out into the named
//! substreams `"data"`, `"triplets"`, `"init"`, `"shuffle"`, and
//! `"eval-split"`, so a cell is reproducible from its manifest row alone.
//! Report writes are atomic (write-temp-then-rename); the manifest is
//! written once at the end. Reports are byte-stable across reruns except
//! for their wall-clock field.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{self, GeneratorKind};
use crate::eval::{self, KnnSplit};
use crate::oenn::{oenn_train, OennConfig};
use crate::optim::{train, TrainResult};
use crate::triplets::{default_triplet_count, generate_triplets, sample_test_triplets};
use crate::types::{AlgoConfig, Algorithm, Dataset, EvalReport};
use crate::{Error, Result};

/// Gram-matrix methods are refused above this item count: the `n x n`
/// variable and its per-step eigendecomposition are computationally
/// prohibitive beyond it.
pub const GRAM_ITEM_CAP: usize = 10_000;

/// The experiment families of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// One run per algorithm and seed at the canonical triplet budget.
    General,
    /// Like `General`, but read for its per-epoch error histories.
    Convergence,
    /// Sweep the triplet multiplier.
    TripletSweep,
    /// Sweep the embedding dimension (budget recomputed per dimension).
    DimSweep,
    /// Sweep the sample size.
    ScaleSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::General => "general",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::TripletSweep => "triplet-sweep",
            ExperimentKind::DimSweep => "dim-sweep",
            ExperimentKind::ScaleSweep => "scale-sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(Self::General),
            "convergence" => Ok(Self::Convergence),
            "triplet-sweep" | "triplet_sweep" => Ok(Self::TripletSweep),
            "dim-sweep" | "dim_sweep" => Ok(Self::DimSweep),
            "scale-sweep" | "scale_sweep" => Ok(Self::ScaleSweep),
            other => Err(Error::InvalidConfig(format!("unknown experiment '{other}'"))),
        }
    }

    /// Default sweep grid. The multiplier grid spans the low and large
    /// triplet regimes; the dimension grid matches the benchmark's
    /// embedding-dimension study.
    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            ExperimentKind::General | ExperimentKind::Convergence => vec![],
            ExperimentKind::TripletSweep => vec![0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
            ExperimentKind::DimSweep => vec![5.0, 15.0, 25.0, 50.0],
            ExperimentKind::ScaleSweep => vec![500.0, 1000.0, 2000.0, 4000.0],
        }
    }
}

/// Where the ground-truth data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum DataSource {
    Generator { kind: GeneratorKind, n: usize, dim: usize },
    File { path: PathBuf },
}

/// Full description of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub source: DataSource,
    pub algorithms: Vec<Algorithm>,
    /// Sweep values: triplet multipliers, embedding dimensions, or sample
    /// sizes depending on the experiment kind. Empty means the default
    /// grid.
    pub sweep: Vec<f64>,
    pub seeds: Vec<u64>,
    pub embedding_dim: usize,
    /// Triplet budget multiplier for non-sweep experiments.
    pub multiplier: f64,
    pub output_dir: PathBuf,
    /// Number of cells to run concurrently.
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("algorithm list must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list must be nonempty".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        if !(self.multiplier > 0.0) {
            return Err(Error::InvalidConfig("triplet multiplier must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be >= 1".into()));
        }
        for &v in &self.sweep {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("sweep value {v} must be positive")));
            }
            if matches!(self.experiment, ExperimentKind::DimSweep | ExperimentKind::ScaleSweep)
                && v.fract() != 0.0
            {
                return Err(Error::InvalidConfig(format!(
                    "sweep value {v} must be an integer for {}",
                    self.experiment.name()
                )));
            }
        }
        if let DataSource::Generator { n, dim, .. } = self.source {
            if n < 3 || dim == 0 {
                return Err(Error::InvalidConfig("generator needs n >= 3 and dim >= 1".into()));
            }
        }
        Ok(())
    }

    fn resolved_sweep(&self) -> Vec<f64> {
        if self.sweep.is_empty() {
            let d = self.experiment.default_sweep();
            if d.is_empty() {
                vec![self.multiplier]
            } else {
                d
            }
        } else {
            self.sweep.clone()
        }
    }
}

/// One `(algorithm, sweep value, seed)` grid point in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub algorithm: Algorithm,
    pub sweep: f64,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub triplet_count: usize,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// The manifest written at the end of a run: the fully resolved spec plus
/// one record per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub resolved_sweep: Vec<f64>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub cells_ok: usize,
    pub cells_failed: usize,
}

fn cell_dataset(spec: &ExperimentSpec, file_data: Option<&Dataset>, n_req: Option<usize>, seed: u64) -> Result<Dataset> {
    match (&spec.source, file_data) {
        (DataSource::Generator { kind, n, dim }, _) => {
            let n = n_req.unwrap_or(*n);
            match kind {
                GeneratorKind::Uniform => data_io::gen_uniform(n, *dim, seed),
                GeneratorKind::Gmm2 => data_io::gen_gmm2(n, *dim, seed),
            }
        }
        (DataSource::File { .. }, Some(ds)) => match n_req {
            None => Ok(ds.clone()),
            Some(n) if n == ds.n() => Ok(ds.clone()),
            Some(n) if n < ds.n() => {
                // Seeded subsample without replacement.
                let mut order: Vec<usize> = (0..ds.n()).collect();
                let mut rng = crate::rng::seed_stream(seed, "data");
                for i in 0..n {
                    let j = rand::Rng::gen_range(&mut rng, i..order.len());
                    order.swap(i, j);
                }
                let mut keep = order[..n].to_vec();
                keep.sort_unstable();
                ds.subset(&keep, format!("{}_n{n}", ds.name()))
            }
            Some(n) => Err(Error::InvalidConfig(format!(
                "requested {n} items but the dataset has {}",
                ds.n()
            ))),
        },
        (DataSource::File { .. }, None) => unreachable!("file data is loaded before cells run"),
    }
}

fn run_cell(
    spec: &ExperimentSpec,
    file_data: Option<&Dataset>,
    algorithm: Algorithm,
    sweep: f64,
    seed: u64,
) -> Result<(EvalReport, usize, usize, usize)> {
    let (n_req, d, multiplier) = match spec.experiment {
        ExperimentKind::TripletSweep => (None, spec.embedding_dim, sweep),
        ExperimentKind::DimSweep => (None, sweep as usize, spec.multiplier),
        ExperimentKind::ScaleSweep => (Some(sweep as usize), spec.embedding_dim, spec.multiplier),
        _ => (None, spec.embedding_dim, spec.multiplier),
    };
    let ds = cell_dataset(spec, file_data, n_req, seed)?;
    let n = ds.n();

    if algorithm.optimizes_gram() && n > GRAM_ITEM_CAP {
        return Err(Error::InvalidConfig(format!(
            "{algorithm} optimizes an {n} x {n} Gram matrix; methods over the Gram matrix \
             are refused beyond {GRAM_ITEM_CAP} items"
        )));
    }

    let count = default_triplet_count(n, d, multiplier);
    let train_set = generate_triplets(&ds, count, seed)?;

    let result: TrainResult = if algorithm == Algorithm::Oenn {
        oenn_train(&train_set, &OennConfig::new(n, d, seed))?.0
    } else {
        train(&train_set, &AlgoConfig::for_algorithm(algorithm, seed), d)?
    };

    let test_set = sample_test_triplets(&ds, seed);
    let train_err = eval::triplet_error(&result.embedding, &train_set)?;
    let test_err = eval::triplet_error(&result.embedding, &test_set)?;
    let procrustes = eval::procrustes_disparity(&result.embedding, ds.points())?;
    let knn = match ds.labels() {
        Some(labels) => Some(eval::knn_error(
            &result.embedding,
            labels,
            &KnnSplit::for_n(n, seed),
        )?),
        None => None,
    };
    let report = eval::assemble_report(
        train_err,
        test_err,
        procrustes,
        knn,
        result.wall_time_seconds,
        result.epochs_run,
        result.error_history,
    )?;
    Ok((report, n, d, count))
}

fn report_filename(algorithm: Algorithm, sweep: f64, seed: u64) -> String {
    format!("{algorithm}_sweep{sweep}_seed{seed}.json")
}

/// Run every cell of the grid, writing reports and a manifest under the
/// spec's output directory. Cell failures are recorded in the manifest,
/// not fatal.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let out = &spec.output_dir;
    let reports_dir = out.join("reports");
    fs::create_dir_all(&reports_dir)?;

    let file_data = match &spec.source {
        DataSource::File { path } => Some(data_io::read_dataset(path)?),
        DataSource::Generator { .. } => None,
    };

    let sweep = spec.resolved_sweep();
    let mut grid: Vec<(Algorithm, f64, u64)> = Vec::new();
    for &alg in &spec.algorithms {
        for &s in &sweep {
            for &seed in &spec.seeds {
                grid.push((alg, s, seed));
            }
        }
    }

    let execute = |&(alg, s, seed): &(Algorithm, f64, u64)| -> CellRecord {
        match run_cell(spec, file_data.as_ref(), alg, s, seed) {
            Ok((report, n, d, count)) => {
                let filename = report_filename(alg, s, seed);
                match data_io::write_report(reports_dir.join(&filename), &report) {
                    Ok(()) => CellRecord {
                        algorithm: alg,
                        sweep: s,
                        seed,
                        n,
                        d,
                        triplet_count: count,
                        status: CellStatus::Ok,
                        message: None,
                        report: Some(format!("reports/{filename}")),
                    },
                    Err(e) => CellRecord {
                        algorithm: alg,
                        sweep: s,
                        seed,
                        n,
                        d,
                        triplet_count: count,
                        status: CellStatus::Failed,
                        message: Some(e.to_string()),
                        report: None,
                    },
                }
            }
            Err(e) => CellRecord {
                algorithm: alg,
                sweep: s,
                seed,
                n: 0,
                d: 0,
                triplet_count: 0,
                status: CellStatus::Failed,
                message: Some(e.to_string()),
                report: None,
            },
        }
    };

    let cells: Vec<CellRecord> = if spec.jobs > 1 {
        grid.par_iter().map(execute).collect()
    } else {
        grid.iter().map(execute).collect()
    };

    let cells_ok = cells.iter().filter(|c| c.status == CellStatus::Ok).count();
    let cells_failed = cells.len() - cells_ok;
    let manifest = Manifest {
        spec: spec.clone(),
        resolved_sweep: sweep,
        cells,
    };
    let manifest_path = out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    let tmp = manifest_path.with_extension("tmp");
    fs::write(&tmp, json + "\n")?;
    fs::rename(&tmp, &manifest_path)?;

    Ok(RunSummary {
        manifest_path,
        cells_ok,
        cells_failed,
    })
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let contents = fs::read_to_string(dir.as_ref().join("manifest.json"))?;
    Ok(serde_json::from_str(&contents)?)
}

/// Metric tables emitted by [`emit_plot_data`].
pub const PLOT_METRICS: [&str; 5] = [
    "train_triplet_error",
    "test_triplet_error",
    "procrustes_disparity",
    "knn_error",
    "wall_time_seconds",
];

#[derive(Debug, Clone)]
pub struct PlotSummary {
    pub tables: Vec<PathBuf>,
    /// Reports referenced by the manifest that were missing or unreadable.
    pub warnings: Vec<String>,
}

fn json_number(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float serializes")
}

/// Flatten a finished run into one long-format CSV per metric with the
/// stable column order `algorithm,sweep,seed,value`, plus an
/// `error_history.csv` table (`algorithm,sweep,seed,epoch,value`) for
/// convergence plots. Values are serialized exactly as they appear in the
/// report JSON. Missing or corrupt reports are listed in the summary, not
/// fatal.
pub fn emit_plot_data(dir: impl AsRef<Path>) -> Result<PlotSummary> {
    let dir = dir.as_ref();
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;

    let mut warnings = Vec::new();
    let mut rows: Vec<(CellRecord, EvalReport)> = Vec::new();
    match read_manifest(dir) {
        Ok(manifest) => {
            for cell in manifest.cells {
                let Some(rel) = cell.report.clone() else {
                    continue;
                };
                match data_io::read_report(dir.join(&rel)) {
                    Ok(report) => rows.push((cell, report)),
                    Err(e) => warnings.push(format!("{rel}: {e}")),
                }
            }
        }
        Err(Error::Io(ref io)) if io.kind() == std::io::ErrorKind::NotFound => {
            // No manifest: emit header-only tables for an empty directory.
        }
        Err(e) => return Err(e),
    }

    let mut tables = Vec::new();
    for metric in PLOT_METRICS {
        let mut csv = String::from("algorithm,sweep,seed,value\n");
        for (cell, report) in &rows {
            let value = match metric {
                "train_triplet_error" => Some(report.train_triplet_error),
                "test_triplet_error" => Some(report.test_triplet_error),
                "procrustes_disparity" => Some(report.procrustes_disparity),
                "knn_error" => report.knn_error,
                "wall_time_seconds" => Some(report.wall_time_seconds),
                _ => unreachable!(),
            };
            if let Some(v) = value {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    cell.algorithm,
                    cell.sweep,
                    cell.seed,
                    json_number(v)
                ));
            }
        }
        let path = plots.join(format!("{metric}.csv"));
        fs::write(&path, csv)?;
        tables.push(path);
    }

    let mut csv = String::from("algorithm,sweep,seed,epoch,value\n");
    for (cell, report) in &rows {
        for &(epoch, err) in &report.error_history {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.algorithm,
                cell.sweep,
                cell.seed,
                epoch,
                json_number(err)
            ));
        }
    }
    let path = plots.join("error_history.csv");
    fs::write(&path, csv)?;
    tables.push(path);

    Ok(PlotSummary { tables, warnings })
}
