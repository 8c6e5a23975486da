//! Domain types shared by every module: datasets, triplets, embeddings,
//! Gram matrices, algorithm configuration, and evaluation reports.
//!
//! All types are immutable value data once constructed and safe to share
//! read-only across threads. Indices are zero-based everywhere; reals are
//! `f64`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance under which a Gram matrix is accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Ground-truth items: `n` points with real coordinates and optional
/// integer class labels. Used to answer triplet queries and to score
/// embeddings against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
    labels: Option<Vec<i64>>,
    name: String,
}

impl Dataset {
    /// Build a dataset from an `n x dim` coordinate matrix.
    ///
    /// Requires `n >= 3` (a triplet needs three distinct items), finite
    /// coordinates, and, if labels are given, exactly one label per point.
    pub fn new(points: DMatrix<f64>, labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        if points.nrows() < 3 {
            return Err(Error::InvalidValue(format!(
                "dataset needs at least 3 items, got {}",
                points.nrows()
            )));
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidValue("dataset has zero dimensions".into()));
        }
        if !all_finite(&points) {
            return Err(Error::InvalidValue("dataset contains non-finite coordinates".into()));
        }
        if let Some(ref l) = labels {
            if l.len() != points.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.nrows()
                )));
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Squared Euclidean distance between items `a` and `b`.
    pub fn squared_dist(&self, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.points.ncols() {
            let diff = self.points[(a, c)] - self.points[(b, c)];
            acc += diff * diff;
        }
        acc
    }

    /// A copy restricted to the given items, labels included.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        for &i in indices {
            if i >= self.n() {
                return Err(Error::IndexOutOfRange { index: i, len: self.n() });
            }
        }
        let points = DMatrix::from_fn(indices.len(), self.dim(), |r, c| self.points[(indices[r], c)]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(points, labels, name)
    }
}

/// One comparison answer: item `i` is closer to item `j` than to item `k`.
///
/// Fields are private so a triplet violating the distinctness invariant
/// cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize, usize)", into = "(usize, usize, usize)")]
pub struct Triplet {
    i: usize,
    j: usize,
    k: usize,
}

impl Triplet {
    /// Requires the three indices to be pairwise distinct.
    pub fn new(i: usize, j: usize, k: usize) -> Result<Self> {
        if i == j || i == k || j == k {
            return Err(Error::InvalidTriplet {
                i,
                j,
                k,
                reason: "indices must be pairwise distinct",
            });
        }
        Ok(Self { i, j, k })
    }

    /// The anchor item.
    #[inline]
    pub fn i(&self) -> usize {
        self.i
    }

    /// The item closer to the anchor.
    #[inline]
    pub fn j(&self) -> usize {
        self.j
    }

    /// The item farther from the anchor.
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }
}

impl TryFrom<(usize, usize, usize)> for Triplet {
    type Error = Error;

    fn try_from((i, j, k): (usize, usize, usize)) -> Result<Self> {
        Self::new(i, j, k)
    }
}

impl From<Triplet> for (usize, usize, usize) {
    fn from(t: Triplet) -> Self {
        (t.i(), t.j(), t.k())
    }
}

/// A set of triplets over `n` items. Duplicates are permitted (triplets
/// are sampled with replacement).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    n: usize,
    triplets: Vec<Triplet>,
}

impl TripletSet {
    /// Validates every triplet against the item count `n`.
    pub fn new(n: usize, triplets: Vec<Triplet>) -> Result<Self> {
        for t in &triplets {
            for idx in [t.i(), t.j(), t.k()] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
        }
        Ok(Self { n, triplets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// A new set over the same items holding the given triplets.
    pub fn with_triplets(&self, triplets: Vec<Triplet>) -> Result<Self> {
        Self::new(self.n, triplets)
    }
}

/// Learned coordinates: an `n x d` matrix, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: DMatrix<f64>,
}

impl Embedding {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.ncols() == 0 {
            return Err(Error::InvalidValue("embedding dimension must be >= 1".into()));
        }
        if !all_finite(&coords) {
            return Err(Error::InvalidValue("embedding contains non-finite coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn d(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }
}

/// Squared Euclidean distance between embedded items `a` and `b`.
pub fn squared_distance(emb: &Embedding, a: usize, b: usize) -> Result<f64> {
    let n = emb.n();
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    Ok(crate::eval::row_squared_distance(emb.coords(), a, b))
}

/// An `n x n` Gram matrix of item inner products. Symmetric within
/// [`SYMMETRY_TOL`]; after a projection step it is also PSD of rank <= d.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
}

impl GramMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "Gram matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidValue("Gram matrix contains non-finite values".into()));
        }
        for r in 0..values.nrows() {
            for c in (r + 1)..values.ncols() {
                if (values[(r, c)] - values[(c, r)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidValue(format!(
                        "Gram matrix asymmetric at ({r}, {c})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// Gram matrix of the outer product `X X^T`.
    pub fn from_coords(coords: &DMatrix<f64>) -> Self {
        let mut values = coords * coords.transpose();
        // Make symmetry exact; the product can drift by rounding.
        for r in 0..values.nrows() {
            for c in 0..r {
                let avg = 0.5 * (values[(r, c)] + values[(c, r)]);
                values[(r, c)] = avg;
                values[(c, r)] = avg;
            }
        }
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Squared distance `K_aa + K_bb - 2 K_ab` implied by a Gram matrix.
pub fn gram_delta(gram: &GramMatrix, a: usize, b: usize) -> Result<f64> {
    let n = gram.n();
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    let k = gram.values();
    Ok(k[(a, a)] + k[(b, b)] - 2.0 * k[(a, b)])
}

/// The eight embedding algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Soe,
    Ste,
    Tste,
    Ckl,
    Cklx,
    Gnmds,
    Forte,
    Oenn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Soe,
        Algorithm::Ste,
        Algorithm::Tste,
        Algorithm::Ckl,
        Algorithm::Cklx,
        Algorithm::Gnmds,
        Algorithm::Forte,
        Algorithm::Oenn,
    ];

    /// True for the methods whose optimization variable is the Gram matrix.
    pub fn optimizes_gram(self) -> bool {
        matches!(self, Algorithm::Gnmds | Algorithm::Ckl | Algorithm::Forte)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Soe => "soe",
            Algorithm::Ste => "ste",
            Algorithm::Tste => "tste",
            Algorithm::Ckl => "ckl",
            Algorithm::Cklx => "cklx",
            Algorithm::Gnmds => "gnmds",
            Algorithm::Forte => "forte",
            Algorithm::Oenn => "oenn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soe" => Ok(Algorithm::Soe),
            "ste" => Ok(Algorithm::Ste),
            "tste" | "t-ste" => Ok(Algorithm::Tste),
            "ckl" => Ok(Algorithm::Ckl),
            "cklx" | "ckl_x" | "ckl-x" => Ok(Algorithm::Cklx),
            "gnmds" => Ok(Algorithm::Gnmds),
            "forte" => Ok(Algorithm::Forte),
            "oenn" => Ok(Algorithm::Oenn),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Batch-size cap for the classical (non-OENN) methods; the effective
/// batch is `min(|T|, 1_000_000)`.
pub const CLASSIC_BATCH_CAP: usize = 1_000_000;
/// Batch-size cap for OENN; the effective batch is `min(|T|, 50_000)`.
pub const OENN_BATCH_CAP: usize = 50_000;

/// Training configuration. `for_algorithm` fills in the per-method
/// defaults (learning rates from the grid search on 1000 uniform points):
/// GNMDS 10, CKL and FORTE 100, SOE/STE/t-STE/CKLx 1, OENN 0.005.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// Cap on the mini-batch size; the effective batch is `min(cap, |T|)`.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Hinge margin of SOE (the "+1" of the triplet hinge losses).
    pub margin: f64,
    /// Scale parameter of the CKL/CKLx probability model.
    pub mu: f64,
    /// Degrees of freedom of the t-STE kernel; `None` means `max(d - 1, 1)`.
    pub alpha: Option<f64>,
    /// Trace regularizer weight for GNMDS/CKL.
    pub trace_reg: f64,
    /// Backtracking factor of FORTE's line search.
    pub rho: f64,
    /// Sufficient-decrease constant of FORTE's line search.
    pub c1: f64,
}

impl AlgoConfig {
    pub fn for_algorithm(algorithm: Algorithm, seed: u64) -> Self {
        let learning_rate = match algorithm {
            Algorithm::Gnmds => 10.0,
            Algorithm::Ckl | Algorithm::Forte => 100.0,
            Algorithm::Soe | Algorithm::Ste | Algorithm::Tste | Algorithm::Cklx => 1.0,
            Algorithm::Oenn => 0.005,
        };
        let batch_size = if algorithm == Algorithm::Oenn {
            OENN_BATCH_CAP
        } else {
            CLASSIC_BATCH_CAP
        };
        Self {
            algorithm,
            learning_rate,
            batch_size,
            max_epochs: 500,
            seed,
            margin: 1.0,
            mu: 0.1,
            alpha: None,
            trace_reg: 0.0,
            rho: 0.5,
            c1: 1e-4,
        }
    }

    /// The t-STE degrees of freedom for embedding dimension `d`.
    pub fn alpha_for(&self, d: usize) -> f64 {
        self.alpha.unwrap_or_else(|| (d as f64 - 1.0).max(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig("margin must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig("mu must be positive".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig("alpha must be positive".into()));
            }
        }
        if !(self.trace_reg >= 0.0 && self.trace_reg.is_finite()) {
            return Err(Error::InvalidConfig("trace_reg must be nonnegative".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig("rho must lie in (0, 1)".into()));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidConfig("c1 must be positive".into()));
        }
        Ok(())
    }
}

/// Per-run evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_triplet_error: f64,
    pub test_triplet_error: f64,
    pub procrustes_disparity: f64,
    /// Absent when the dataset has no labels.
    pub knn_error: Option<f64>,
    pub wall_time_seconds: f64,
    pub epochs_run: usize,
    /// `(epoch, train triplet error on the convergence subset)` per epoch.
    pub error_history: Vec<(usize, f64)>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.train_triplet_error) {
            return Err(Error::InvalidValue(format!(
                "train_triplet_error {} outside [0, 1]",
                self.train_triplet_error
            )));
        }
        if !in_unit(self.test_triplet_error) {
            return Err(Error::InvalidValue(format!(
                "test_triplet_error {} outside [0, 1]",
                self.test_triplet_error
            )));
        }
        if !(self.procrustes_disparity >= 0.0 && self.procrustes_disparity.is_finite()) {
            return Err(Error::InvalidValue("procrustes_disparity must be finite and >= 0".into()));
        }
        if let Some(k) = self.knn_error {
            if !in_unit(k) {
                return Err(Error::InvalidValue(format!("knn_error {k} outside [0, 1]")));
            }
        }
        if !(self.wall_time_seconds >= 0.0 && self.wall_time_seconds.is_finite()) {
            return Err(Error::InvalidValue("wall_time_seconds must be finite and >= 0".into()));
        }
        for &(_, e) in &self.error_history {
            if !in_unit(e) {
                return Err(Error::InvalidValue(format!("history error {e} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use rand::Rng;

    #[test]
    fn squared_distance_hand_cases() {
        let e = Embedding::new(DMatrix::from_row_slice(2, 1, &[0.0, 3.0])).unwrap();
        assert_eq!(squared_distance(&e, 0, 1).unwrap(), 9.0);
        assert_eq!(squared_distance(&e, 0, 0).unwrap(), 0.0);
        assert_eq!(squared_distance(&e, 1, 1).unwrap(), 0.0);

        let e = Embedding::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 4.0, 5.0])).unwrap();
        assert_eq!(squared_distance(&e, 0, 1).unwrap(), 25.0);
        assert!(squared_distance(&e, 0, 2).is_err());
    }

    #[test]
    fn gram_delta_hand_cases() {
        let k = GramMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(gram_delta(&k, 0, 1).unwrap(), 2.0);
        assert_eq!(gram_delta(&k, 0, 0).unwrap(), 0.0);

        // X = [[0], [3]] gives X X^T = [[0, 0], [0, 9]].
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 3.0]);
        let k = GramMatrix::from_coords(&x);
        assert_eq!(gram_delta(&k, 0, 1).unwrap(), 9.0);
        assert!(gram_delta(&k, 2, 0).is_err());
    }

    #[test]
    fn gram_delta_matches_squared_distance_on_outer_product() {
        let mut rng = seed_stream(11, "types-test");
        let x = DMatrix::from_fn(8, 3, |_, _| rng.gen_range(-2.0..2.0));
        let emb = Embedding::new(x.clone()).unwrap();
        let k = GramMatrix::from_coords(&x);
        for a in 0..8 {
            for b in 0..8 {
                let lhs = gram_delta(&k, a, b).unwrap();
                let rhs = squared_distance(&emb, a, b).unwrap();
                assert!((lhs - rhs).abs() < 1e-9, "({a},{b}): {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn dataset_invariants() {
        let two = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(Dataset::new(two, None, "tiny").is_err());

        let nan = DMatrix::from_row_slice(3, 1, &[0.0, f64::NAN, 1.0]);
        assert!(Dataset::new(nan, None, "nan").is_err());

        let ok = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(Dataset::new(ok.clone(), Some(vec![0, 1]), "short-labels").is_err());
        let ds = Dataset::new(ok, Some(vec![0, 1, 0]), "ok").unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.squared_dist(0, 2), 4.0);
    }

    #[test]
    fn triplet_invariants() {
        assert!(Triplet::new(0, 0, 1).is_err());
        assert!(Triplet::new(0, 1, 0).is_err());
        assert!(Triplet::new(0, 1, 1).is_err());
        let t = Triplet::new(0, 1, 2).unwrap();
        assert!(TripletSet::new(3, vec![t]).is_ok());
        assert!(TripletSet::new(2, vec![t]).is_err());
    }

    #[test]
    fn gram_symmetry_enforced() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 1e-3;
        assert!(GramMatrix::new(m).is_err());
    }

    #[test]
    fn config_defaults_follow_hyperparameter_table() {
        assert_eq!(AlgoConfig::for_algorithm(Algorithm::Gnmds, 0).learning_rate, 10.0);
        assert_eq!(AlgoConfig::for_algorithm(Algorithm::Ckl, 0).learning_rate, 100.0);
        assert_eq!(AlgoConfig::for_algorithm(Algorithm::Forte, 0).learning_rate, 100.0);
        for alg in [Algorithm::Soe, Algorithm::Ste, Algorithm::Tste, Algorithm::Cklx] {
            let cfg = AlgoConfig::for_algorithm(alg, 0);
            assert_eq!(cfg.learning_rate, 1.0);
            assert_eq!(cfg.batch_size, CLASSIC_BATCH_CAP);
            assert_eq!(cfg.max_epochs, 500);
        }
        let oenn = AlgoConfig::for_algorithm(Algorithm::Oenn, 0);
        assert_eq!(oenn.learning_rate, 0.005);
        assert_eq!(oenn.batch_size, OENN_BATCH_CAP);
        assert_eq!(AlgoConfig::for_algorithm(Algorithm::Tste, 0).alpha_for(3), 2.0);
        assert_eq!(AlgoConfig::for_algorithm(Algorithm::Tste, 0).alpha_for(1), 1.0);
    }

    #[test]
    fn report_validation_rejects_out_of_range() {
        let mut r = EvalReport {
            train_triplet_error: 0.0,
            test_triplet_error: 0.0,
            procrustes_disparity: 0.0,
            knn_error: None,
            wall_time_seconds: 0.0,
            epochs_run: 0,
            error_history: vec![],
        };
        assert!(r.validate().is_ok());
        r.train_triplet_error = 1.5;
        assert!(r.validate().is_err());
    }
}
