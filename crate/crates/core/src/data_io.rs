//! Synthetic dataset generators, tabular ingestion, PCA projection, and
//! serialization of datasets, triplets, embeddings, and reports.
//!
//! File formats:
//!
//! - **Dataset CSV** — header `x0,x1,...` with an optional trailing
//!   `label` column of integers; one point per row; floats in shortest
//!   round-trip decimal form; LF line endings; UTF-8. Embeddings reuse
//!   the same format without labels.
//! - **Triplet file** — header `n=<N>`, then one `i,j,k` triplet per
//!   line, zero-based, LF endings.
//! - **Report file** — JSON with the fields of
//!   [`EvalReport`](crate::types::EvalReport); `error_history` is an
//!   array of `[epoch, error]` pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg::sorted_symmetric_eigen;
use crate::rng::{seed_stream, standard_normal};
use crate::types::{Dataset, Embedding, EvalReport, Triplet, TripletSet};
use crate::{Error, Result};

/// Synthetic data generators used by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Points drawn uniformly from `[0, 10]^dim`, unlabeled.
    Uniform,
    /// Two unit-variance Gaussian blobs at 0 and `100 * 1`, labeled 0/1.
    Gmm2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig("generator needs n >= 3".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("generator needs dim >= 1".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        match self.kind {
            GeneratorKind::Uniform => gen_uniform(self.n, self.dim, self.seed),
            GeneratorKind::Gmm2 => gen_gmm2(self.n, self.dim, self.seed),
        }
    }
}

/// `n` points i.i.d. uniform on `[0, 10]^dim`; no labels.
pub fn gen_uniform(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed_stream(seed, "data");
    let mut points = DMatrix::zeros(n, dim);
    for r in 0..n {
        for c in 0..dim {
            points[(r, c)] = rng.gen_range(0.0..10.0);
        }
    }
    Dataset::new(points, None, format!("uniform_n{n}_d{dim}"))
}

/// Two clearly separated unit-variance Gaussian components: `floor(n/2)`
/// points at the origin (label 0) and the rest at `100 * 1` (label 1).
pub fn gen_gmm2(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed_stream(seed, "data");
    let first = n / 2;
    let mut points = DMatrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let (mean, label) = if r < first { (0.0, 0) } else { (100.0, 1) };
        for c in 0..dim {
            points[(r, c)] = mean + standard_normal(&mut rng);
        }
        labels.push(label);
    }
    Dataset::new(points, Some(labels), format!("gmm2_n{n}_d{dim}"))
}

/// Project a dataset onto the top `dim` principal components. Columns are
/// centered, the covariance uses the `1/(n-1)` normalization, components
/// are ordered by descending eigenvalue with the crate's deterministic
/// sign convention, and labels are preserved.
pub fn pca_project(ds: &Dataset, dim: usize) -> Result<Dataset> {
    let (n, full) = (ds.n(), ds.dim());
    if dim == 0 || dim > full {
        return Err(Error::InvalidConfig(format!(
            "PCA target dimension {dim} outside [1, {full}]"
        )));
    }
    let mut centered = ds.points().clone();
    for c in 0..full {
        let mean = centered.column(c).sum() / n as f64;
        for r in 0..n {
            centered[(r, c)] -= mean;
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let (_, vectors) = sorted_symmetric_eigen(&cov);
    let basis = vectors.columns(0, dim).into_owned();
    let projected = centered * basis;
    Dataset::new(
        projected,
        ds.labels().map(|l| l.to_vec()),
        format!("{}_pca{dim}", ds.name()),
    )
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Write a dataset as CSV (see the module docs for the format).
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let mut header: Vec<String> = (0..ds.dim()).map(|c| format!("x{c}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..ds.n() {
        let mut fields: Vec<String> = (0..ds.dim()).map(|c| format!("{}", ds.points()[(r, c)])).collect();
        if let Some(labels) = ds.labels() {
            fields.push(format!("{}", labels[r]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Read a dataset CSV. Errors carry the offending line number.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path)?;
    let mut lines = contents.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let labeled = columns.last() == Some(&"label");
    let dim = if labeled { columns.len() - 1 } else { columns.len() };
    if dim == 0 {
        return Err(parse_err(path, 1, "header declares no coordinate columns"));
    }
    for (c, name) in columns.iter().take(dim).enumerate() {
        if *name != format!("x{c}") {
            return Err(parse_err(path, 1, format!("expected column 'x{c}', found '{name}'")));
        }
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        for field in fields.iter().take(dim) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid float '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value '{field}'")));
            }
            rows.push(v);
        }
        if labeled {
            let field = fields[dim];
            let l: i64 = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid label '{field}'")))?;
            labels.push(l);
        }
        n += 1;
    }
    let points = DMatrix::from_row_slice(n, dim, &rows);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(points, labeled.then_some(labels), name)
}

/// Write an embedding using the dataset CSV format without labels.
pub fn write_embedding(path: impl AsRef<Path>, emb: &Embedding) -> Result<()> {
    let ds = Dataset::new(emb.coords().clone(), None, "embedding")?;
    write_dataset(path, &ds)
}

/// Read an embedding from dataset CSV; labels, if present, are ignored.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    let ds = read_dataset(path)?;
    Embedding::new(ds.points().clone())
}

/// Write a triplet file: header `n=<N>`, then one `i,j,k` per line.
pub fn write_triplets(path: impl AsRef<Path>, ts: &TripletSet) -> Result<()> {
    let mut out = format!("n={}\n", ts.n());
    for t in ts.triplets() {
        out.push_str(&format!("{},{},{}\n", t.i(), t.j(), t.k()));
    }
    write_atomic(path.as_ref(), &out)
}

/// Read a triplet file, validating every triplet against the header's
/// item count. Errors carry the offending line number.
pub fn read_triplets(path: impl AsRef<Path>) -> Result<TripletSet> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path)?;
    let mut lines = contents.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let n: usize = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(path, 1, "expected header 'n=<N>'"))?;

    let mut triplets = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(path, lineno, format!("expected 'i,j,k', found '{line}'")));
        }
        let mut idxs = [0usize; 3];
        for (slot, field) in idxs.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid index '{field}'")))?;
        }
        let [i, j, k] = idxs;
        for idx in idxs {
            if idx >= n {
                return Err(parse_err(path, lineno, format!("index {idx} >= n = {n}")));
            }
        }
        let t = Triplet::new(i, j, k)
            .map_err(|e| parse_err(path, lineno, e.to_string()))?;
        triplets.push(t);
    }
    TripletSet::new(n, triplets)
}

/// Write an evaluation report as JSON. Non-finite values are rejected.
pub fn write_report(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    report.validate()?;
    let json = serde_json::to_string_pretty(report)?;
    write_atomic(path.as_ref(), &(json + "\n"))
}

/// Read an evaluation report back from JSON.
pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let contents = fs::read_to_string(path.as_ref())?;
    let report: EvalReport = serde_json::from_str(&contents)?;
    report.validate()?;
    Ok(report)
}
