//! Evaluation criteria: triplet error, Procrustes disparity, kNN error,
//! and report assembly.

use nalgebra::DMatrix;

use crate::rng::seed_stream;
use crate::types::{Embedding, EvalReport, Triplet, TripletSet};
use crate::{Error, Result};

pub(crate) fn row_squared_distance(m: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..m.ncols() {
        let diff = m[(a, c)] - m[(b, c)];
        acc += diff * diff;
    }
    acc
}

pub(crate) fn triplet_error_coords(coords: &DMatrix<f64>, triplets: &[Triplet]) -> f64 {
    let violated = triplets
        .iter()
        .filter(|t| row_squared_distance(coords, t.i(), t.j()) > row_squared_distance(coords, t.i(), t.k()))
        .count();
    violated as f64 / triplets.len() as f64
}

pub(crate) fn triplet_error_gram(k: &DMatrix<f64>, triplets: &[Triplet]) -> f64 {
    let delta = |a: usize, b: usize| k[(a, a)] + k[(b, b)] - 2.0 * k[(a, b)];
    let violated = triplets
        .iter()
        .filter(|t| delta(t.i(), t.j()) > delta(t.i(), t.k()))
        .count();
    violated as f64 / triplets.len() as f64
}

/// Fraction of triplets violated by the embedding. A triplet is violated
/// when the anchor sits strictly farther from its near item than from its
/// far item; exact ties count as satisfied.
pub fn triplet_error(emb: &Embedding, triplets: &TripletSet) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::InvalidValue("triplet error of an empty set is undefined".into()));
    }
    if triplets.n() > emb.n() {
        return Err(Error::ShapeMismatch(format!(
            "triplets index {} items, embedding has {}",
            triplets.n(),
            emb.n()
        )));
    }
    Ok(triplet_error_coords(emb.coords(), triplets.triplets()))
}

fn center_and_normalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for c in 0..out.ncols() {
        let mean = out.column(c).sum() / n;
        for r in 0..out.nrows() {
            out[(r, c)] -= mean;
        }
    }
    let norm = out.norm();
    if norm < 1e-12 {
        return Err(Error::InvalidValue(
            "Procrustes disparity is undefined for zero-variance input".into(),
        ));
    }
    Ok(out / norm)
}

/// Standardized Procrustes disparity between an embedding and a reference
/// point set.
///
/// Both matrices are centered and scaled to unit Frobenius norm, the
/// thinner one is zero-padded when dimensions differ, and the optimal
/// orthogonal alignment (reflections allowed) is computed from the SVD of
/// the cross-product matrix. The result lies in `[0, 2]` and is invariant
/// under translation, orthogonal transforms, and positive scaling of
/// either argument.
pub fn procrustes_disparity(emb: &Embedding, truth: &DMatrix<f64>) -> Result<f64> {
    if emb.n() != truth.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows, reference has {}",
            emb.n(),
            truth.nrows()
        )));
    }
    if emb.n() < 2 {
        return Err(Error::InvalidValue("Procrustes disparity needs at least 2 points".into()));
    }
    let d = emb.d().max(truth.ncols());
    let pad = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), d);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out[(r, c)] = m[(r, c)];
            }
        }
        out
    };
    let a = center_and_normalize(&pad(emb.coords()))?;
    let b = center_and_normalize(&pad(truth))?;

    let cross = b.transpose() * &a;
    let svd = cross.svd(true, true);
    let u = svd.u.expect("SVD with vectors requested");
    let v_t = svd.v_t.expect("SVD with vectors requested");
    let rotation = u * v_t;
    let aligned = b * rotation;
    let diff = a - aligned;
    Ok(diff.norm_squared())
}

/// kNN evaluation setup: seeded 70/30 split and neighbor count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnSplit {
    pub train_fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl KnnSplit {
    /// The benchmark's setting: 70% train and `k = max(1, floor(ln n))`.
    pub fn for_n(n: usize, seed: u64) -> Self {
        Self {
            train_fraction: 0.70,
            k: ((n as f64).ln().floor() as usize).max(1),
            seed,
        }
    }
}

/// Misclassification rate of a k-nearest-neighbor classifier trained on a
/// seeded 70% split of the embedded points and evaluated on the rest.
///
/// Neighbor ties are broken by lower point index, vote ties by smaller
/// label id.
pub fn knn_error(emb: &Embedding, labels: &[i64], split: &KnnSplit) -> Result<f64> {
    let n = emb.n();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} embedded points",
            labels.len(),
            n
        )));
    }
    if !(split.train_fraction > 0.0 && split.train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
    }
    if n < 2 {
        return Err(Error::InvalidValue("kNN needs at least 2 points".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed_stream(split.seed, "eval-split");
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let train_count = ((split.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (train_idx, test_idx) = order.split_at(train_count);

    if split.k == 0 || split.k > train_count {
        return Err(Error::InvalidConfig(format!(
            "k = {} outside [1, {train_count}]",
            split.k
        )));
    }

    let coords = emb.coords();
    let mut wrong = 0usize;
    for &t in test_idx {
        // k nearest train points, ties by lower point index.
        let mut dists: Vec<(f64, usize)> = train_idx
            .iter()
            .map(|&p| (row_squared_distance(coords, t, p), p))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let mut votes: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
        for &(_, p) in dists.iter().take(split.k) {
            *votes.entry(labels[p]).or_insert(0) += 1;
        }
        // BTreeMap iterates labels ascending, so the first maximum is the
        // smallest label id among tied votes.
        let predicted = votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&l, _)| l)
            .expect("k >= 1");
        if predicted != labels[t] {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test_idx.len() as f64)
}

/// Assemble and validate an evaluation report.
pub fn assemble_report(
    train_triplet_error: f64,
    test_triplet_error: f64,
    procrustes_disparity: f64,
    knn_error: Option<f64>,
    wall_time_seconds: f64,
    epochs_run: usize,
    error_history: Vec<(usize, f64)>,
) -> Result<EvalReport> {
    let report = EvalReport {
        train_triplet_error,
        test_triplet_error,
        procrustes_disparity,
        knn_error,
        wall_time_seconds,
        epochs_run,
        error_history,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use crate::triplets::{answer_triplet, generate_triplets};
    use crate::types::Dataset;
    use rand::Rng;

    fn emb(rows: usize, cols: usize, data: &[f64]) -> Embedding {
        Embedding::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    fn set(n: usize, trips: &[(usize, usize, usize)]) -> TripletSet {
        TripletSet::new(
            n,
            trips.iter().map(|&(i, j, k)| Triplet::new(i, j, k).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn triplet_error_hand_cases() {
        let e = emb(3, 1, &[0.0, 1.0, 3.0]);
        assert_eq!(triplet_error(&e, &set(3, &[(0, 1, 2)])).unwrap(), 0.0);
        assert_eq!(triplet_error(&e, &set(3, &[(1, 2, 0)])).unwrap(), 1.0);
        assert_eq!(triplet_error(&e, &set(3, &[(0, 1, 2), (1, 2, 0)])).unwrap(), 0.5);
        assert!(triplet_error(&e, &set(3, &[])).is_err());
    }

    #[test]
    fn ties_count_as_satisfied() {
        let e = emb(3, 1, &[0.0, 2.0, -2.0]);
        assert_eq!(triplet_error(&e, &set(3, &[(0, 1, 2)])).unwrap(), 0.0);
        assert_eq!(triplet_error(&e, &set(3, &[(0, 2, 1)])).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force_on_exhaustive_triples() {
        let mut rng = seed_stream(41, "eval-brute");
        let coords = DMatrix::from_fn(8, 2, |_, _| rng.gen_range(-3.0..3.0));
        let e = Embedding::new(coords.clone()).unwrap();
        let mut trips = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    if i != j && i != k && j != k {
                        trips.push(Triplet::new(i, j, k).unwrap());
                    }
                }
            }
        }
        let ts = TripletSet::new(8, trips.clone()).unwrap();
        let fast = triplet_error(&e, &ts).unwrap();
        let mut violated = 0usize;
        for t in &trips {
            let mut dj = 0.0;
            let mut dk = 0.0;
            for c in 0..2 {
                dj += (coords[(t.i(), c)] - coords[(t.j(), c)]).powi(2);
                dk += (coords[(t.i(), c)] - coords[(t.k(), c)]).powi(2);
            }
            if dj > dk {
                violated += 1;
            }
        }
        assert_eq!(fast, violated as f64 / trips.len() as f64);
    }

    #[test]
    fn ground_truth_coordinates_have_zero_error() {
        let mut rng = seed_stream(42, "eval-truth");
        let pts = DMatrix::from_fn(20, 2, |_, _| rng.gen_range(0.0..10.0));
        let ds = Dataset::new(pts.clone(), None, "truth").unwrap();
        let ts = generate_triplets(&ds, 500, 3).unwrap();
        let e = Embedding::new(pts).unwrap();
        assert_eq!(triplet_error(&e, &ts).unwrap(), 0.0);
    }

    fn random_rotation(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let qr = raw.qr();
        qr.q()
    }

    #[test]
    fn procrustes_identity_and_similarity_invariance() {
        let mut rng = seed_stream(43, "procrustes");
        let a = DMatrix::from_fn(20, 3, |_, _| rng.gen_range(-2.0..2.0));
        let e = Embedding::new(a.clone()).unwrap();
        assert!(procrustes_disparity(&e, &a).unwrap() < 1e-12);

        for _ in 0..5 {
            let rot = random_rotation(3, &mut rng);
            let scale = rng.gen_range(0.1..5.0);
            let shift: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut b = &a * rot * scale;
            for r in 0..b.nrows() {
                for c in 0..3 {
                    b[(r, c)] += shift[c];
                }
            }
            assert!(procrustes_disparity(&e, &b).unwrap() < 1e-9);
            // Symmetry.
            let eb = Embedding::new(b.clone()).unwrap();
            let lhs = procrustes_disparity(&eb, &a).unwrap();
            let rhs = procrustes_disparity(&e, &b).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn procrustes_allows_reflections() {
        let square = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let mut mirrored = square.clone();
        for r in 0..4 {
            mirrored[(r, 0)] = -mirrored[(r, 0)];
        }
        let e = Embedding::new(square).unwrap();
        assert!(procrustes_disparity(&e, &mirrored).unwrap() < 1e-9);
    }

    #[test]
    fn procrustes_pads_dimension_mismatch() {
        let mut rng = seed_stream(44, "procrustes-pad");
        let a = DMatrix::from_fn(10, 3, |_, _| rng.gen_range(-1.0..1.0));
        let mut padded = DMatrix::zeros(10, 2);
        for r in 0..10 {
            for c in 0..2 {
                padded[(r, c)] = a[(r, c)];
            }
        }
        let e = Embedding::new(padded).unwrap();
        let v = procrustes_disparity(&e, &a).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn procrustes_rejects_degenerate_input() {
        let all_same = DMatrix::from_element(5, 2, 1.25);
        let e = Embedding::new(all_same.clone()).unwrap();
        assert!(procrustes_disparity(&e, &all_same).is_err());
    }

    #[test]
    fn knn_separable_clusters_have_zero_error() {
        let mut rng = seed_stream(45, "knn-sep");
        let n = 60;
        let coords = DMatrix::from_fn(n, 2, |r, _| {
            let center = if r < n / 2 { 0.0 } else { 100.0 };
            center + rng.gen_range(-1.0..1.0)
        });
        let labels: Vec<i64> = (0..n).map(|r| i64::from(r >= n / 2)).collect();
        let e = Embedding::new(coords).unwrap();
        let err = knn_error(&e, &labels, &KnnSplit::for_n(n, 5)).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn knn_random_labels_sit_near_half() {
        let mut errs = Vec::new();
        for seed in 0..5 {
            let mut rng = seed_stream(seed, "knn-random");
            let n = 400;
            let coords = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let labels: Vec<i64> = (0..n).map(|_| i64::from(rng.gen::<bool>())).collect();
            let e = Embedding::new(coords).unwrap();
            errs.push(knn_error(&e, &labels, &KnnSplit::for_n(n, seed)).unwrap());
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean error {mean}");
    }

    #[test]
    fn knn_k1_nearest_label_case() {
        // Three tight same-label clusters far apart: any 70/30 split
        // leaves train points in every cluster, so each test point's
        // nearest train neighbor shares its label and 1-NN is perfect.
        let mut rng = seed_stream(47, "knn-k1");
        let n = 60;
        let coords = DMatrix::from_fn(n, 1, |r, _| (r / 20) as f64 * 100.0 + rng.gen_range(-1.0..1.0));
        let labels: Vec<i64> = (0..n).map(|r| (r / 20) as i64).collect();
        let e = Embedding::new(coords).unwrap();
        for seed in 0..10 {
            let split = KnnSplit { train_fraction: 0.7, k: 1, seed };
            assert_eq!(knn_error(&e, &labels, &split).unwrap(), 0.0);
        }
    }

    #[test]
    fn knn_is_deterministic_and_validates_k() {
        let coords = DMatrix::from_row_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let labels = vec![0, 0, 1, 1, 1];
        let e = Embedding::new(coords).unwrap();
        let split = KnnSplit { train_fraction: 0.7, k: 2, seed: 8 };
        assert_eq!(
            knn_error(&e, &labels, &split).unwrap(),
            knn_error(&e, &labels, &split).unwrap()
        );
        let bad = KnnSplit { train_fraction: 0.7, k: 100, seed: 8 };
        assert!(knn_error(&e, &labels, &bad).is_err());
    }

    #[test]
    fn knn_tie_rules_prefer_lower_index_and_label() {
        // Test point 0 sits exactly between train points with labels 1
        // and 0; with k = 2 the vote ties and the smaller label id wins.
        let coords = DMatrix::from_row_slice(3, 1, &[0.0, -1.0, 1.0]);
        let labels = vec![1, 1, 0];
        let e = Embedding::new(coords).unwrap();
        // Build a split by brute-force seed search: we need {1,2} train, {0} test.
        let mut found = false;
        for seed in 0..200 {
            let split = KnnSplit { train_fraction: 0.67, k: 2, seed };
            let mut rng = seed_stream(seed, "eval-split");
            let mut order: Vec<usize> = (0..3).collect();
            for i in (1..3).rev() {
                let j = rand::Rng::gen_range(&mut rng, 0..=i);
                order.swap(i, j);
            }
            if order[2] == 0 {
                // Vote ties between labels 0 and 1 -> predicts 0, truth is 1.
                assert_eq!(knn_error(&e, &labels, &split).unwrap(), 1.0);
                found = true;
                break;
            }
        }
        assert!(found, "no seed placed point 0 in the test partition");
    }

    #[test]
    fn report_assembly_validates() {
        assert!(assemble_report(0.0, 0.0, 0.0, None, 0.0, 0, vec![]).is_ok());
        assert!(assemble_report(1.5, 0.0, 0.0, None, 0.0, 0, vec![]).is_err());
        assert!(assemble_report(0.0, 0.0, -0.1, None, 0.0, 0, vec![]).is_err());
        assert!(assemble_report(0.0, 0.0, 0.0, Some(2.0), 0.0, 0, vec![]).is_err());
        assert!(assemble_report(0.0, 0.0, 0.0, None, f64::NAN, 0, vec![]).is_err());
    }

    #[test]
    fn answer_oracle_and_error_agree() {
        let mut rng = seed_stream(46, "oracle-agree");
        let pts = DMatrix::from_fn(10, 3, |_, _| rng.gen_range(-5.0..5.0));
        let ds = Dataset::new(pts.clone(), None, "agree").unwrap();
        let e = Embedding::new(pts).unwrap();
        for _ in 0..50 {
            let i = rng.gen_range(0..10);
            let mut j = rng.gen_range(0..10);
            while j == i {
                j = rng.gen_range(0..10);
            }
            let mut k = rng.gen_range(0..10);
            while k == i || k == j {
                k = rng.gen_range(0..10);
            }
            let t = answer_triplet(&ds, i, j, k).unwrap();
            let ts = TripletSet::new(10, vec![t]).unwrap();
            assert_eq!(triplet_error(&e, &ts).unwrap(), 0.0);
        }
    }
}
