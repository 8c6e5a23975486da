//! Triplet generation from ground-truth distances.
//!
//! Triplets are sampled with replacement: three pairwise-distinct indices
//! are drawn uniformly (rejecting collisions) and ordered by the oracle
//! [`answer_triplet`], so every emitted triplet is consistent with the
//! source dataset. Test triplets come from a stream disjoint from the
//! training stream even under the same seed.

use rand::Rng;

use crate::rng::seed_stream;
use crate::types::{Dataset, Triplet, TripletSet};
use crate::{Error, Result};

/// Number of held-out triplets used for the test triplet error.
pub const TEST_TRIPLET_COUNT: usize = 10_000;

/// A training budget of `multiplier * n * d * ln(n)` triplets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletBudget {
    pub multiplier: f64,
    pub n: usize,
    pub d: usize,
}

impl TripletBudget {
    pub fn count(&self) -> usize {
        default_triplet_count(self.n, self.d, self.multiplier)
    }
}

/// `round(multiplier * n * d * ln n)`, clamped to at least 1.
///
/// The canonical budget of the benchmark is `multiplier = 2`.
pub fn default_triplet_count(n: usize, d: usize, multiplier: f64) -> usize {
    let raw = multiplier * n as f64 * d as f64 * (n as f64).ln();
    (raw.round() as usize).max(1)
}

/// The triplet oracle: orders `(j, k)` by distance from `i` in the
/// ground-truth data. Exact ties return the index-ordered triplet.
pub fn answer_triplet(ds: &Dataset, i: usize, j: usize, k: usize) -> Result<Triplet> {
    let n = ds.n();
    for idx in [i, j, k] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if i == j || i == k || j == k {
        return Err(Error::InvalidTriplet {
            i,
            j,
            k,
            reason: "oracle queries need pairwise distinct indices",
        });
    }
    let dij = ds.squared_dist(i, j);
    let dik = ds.squared_dist(i, k);
    if dij < dik {
        Triplet::new(i, j, k)
    } else if dik < dij {
        Triplet::new(i, k, j)
    } else {
        Triplet::new(i, j.min(k), j.max(k))
    }
}

fn sample_answered(ds: &Dataset, count: usize, rng: &mut impl Rng) -> TripletSet {
    let n = ds.n();
    let mut triplets = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.gen_range(0..n);
        let j = loop {
            let c = rng.gen_range(0..n);
            if c != i {
                break c;
            }
        };
        let k = loop {
            let c = rng.gen_range(0..n);
            if c != i && c != j {
                break c;
            }
        };
        let t = answer_triplet(ds, i, j, k).expect("sampled indices are distinct and in range");
        triplets.push(t);
    }
    TripletSet::new(n, triplets).expect("oracle output is always valid")
}

/// Sample `count` ground-truth-consistent training triplets.
pub fn generate_triplets(ds: &Dataset, count: usize, seed: u64) -> Result<TripletSet> {
    if count == 0 {
        return Err(Error::InvalidConfig("triplet count must be >= 1".into()));
    }
    let mut rng = seed_stream(seed, "triplets");
    Ok(sample_answered(ds, count, &mut rng))
}

/// Sample the fixed 10,000 held-out test triplets, from a stream disjoint
/// from the training stream of the same seed.
pub fn sample_test_triplets(ds: &Dataset, seed: u64) -> TripletSet {
    let mut rng = seed_stream(seed, "test-triplets");
    sample_answered(ds, TEST_TRIPLET_COUNT, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use std::collections::HashSet;

    fn line_dataset() -> Dataset {
        Dataset::new(DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 5.0]), None, "line").unwrap()
    }

    #[test]
    fn budget_hand_values() {
        // 2 * 1000 * 2 * ln(1000) = 27631.02...
        assert_eq!(default_triplet_count(1000, 2, 2.0), 27631);
        assert_eq!(default_triplet_count(3, 1, 1e-9), 1);
        // 3 * 1 * ln(3) = 3.2958 -> 3.
        assert_eq!(default_triplet_count(3, 1, 1.0), 3);
        assert_eq!(TripletBudget { multiplier: 2.0, n: 1000, d: 2 }.count(), 27631);
    }

    #[test]
    fn oracle_orders_by_distance() {
        let ds = line_dataset();
        assert_eq!(answer_triplet(&ds, 0, 1, 2).unwrap(), Triplet::new(0, 1, 2).unwrap());
        assert_eq!(answer_triplet(&ds, 0, 2, 1).unwrap(), Triplet::new(0, 1, 2).unwrap());
    }

    #[test]
    fn oracle_breaks_ties_by_index() {
        let ds = Dataset::new(DMatrix::from_row_slice(3, 1, &[0.0, 2.0, -2.0]), None, "tie").unwrap();
        assert_eq!(answer_triplet(&ds, 0, 1, 2).unwrap(), Triplet::new(0, 1, 2).unwrap());
        assert_eq!(answer_triplet(&ds, 0, 2, 1).unwrap(), Triplet::new(0, 1, 2).unwrap());
    }

    #[test]
    fn oracle_rejects_bad_queries() {
        let ds = line_dataset();
        assert!(answer_triplet(&ds, 0, 0, 1).is_err());
        assert!(answer_triplet(&ds, 0, 1, 3).is_err());
    }

    #[test]
    fn generated_triplets_are_ground_truth_consistent() {
        let ds = line_dataset();
        let ts = generate_triplets(&ds, 100, 7).unwrap();
        assert_eq!(ts.len(), 100);
        for t in ts.triplets() {
            assert!(ds.squared_dist(t.i(), t.j()) <= ds.squared_dist(t.i(), t.k()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let ds = line_dataset();
        assert_eq!(generate_triplets(&ds, 50, 3).unwrap(), generate_triplets(&ds, 50, 3).unwrap());
        assert_ne!(generate_triplets(&ds, 50, 3).unwrap(), generate_triplets(&ds, 50, 4).unwrap());
    }

    #[test]
    fn random_2d_triplets_never_violate_truth() {
        let mut rng = seed_stream(5, "triplets-test");
        let pts = DMatrix::from_fn(8, 2, |_, _| rng.gen_range(0.0..10.0));
        let ds = Dataset::new(pts, None, "rand8").unwrap();
        let ts = generate_triplets(&ds, 50, 11).unwrap();
        let violated = ts
            .triplets()
            .iter()
            .filter(|t| ds.squared_dist(t.i(), t.j()) > ds.squared_dist(t.i(), t.k()))
            .count();
        assert_eq!(violated, 0);
    }

    #[test]
    fn test_triplets_have_fixed_count_and_are_deterministic() {
        let ds = line_dataset();
        let a = sample_test_triplets(&ds, 9);
        let b = sample_test_triplets(&ds, 9);
        assert_eq!(a.len(), TEST_TRIPLET_COUNT);
        assert_eq!(a, b);
    }

    #[test]
    fn test_stream_differs_from_train_stream() {
        let ds = line_dataset();
        let train = generate_triplets(&ds, TEST_TRIPLET_COUNT, 9).unwrap();
        let test = sample_test_triplets(&ds, 9);
        assert_ne!(train, test);
    }

    #[test]
    fn tiny_dataset_only_emits_the_three_answered_triples() {
        let ds = line_dataset();
        let ts = sample_test_triplets(&ds, 1);
        let distinct: HashSet<_> = ts.triplets().iter().copied().collect();
        assert!(distinct.len() <= 3, "got {distinct:?}");
        for t in distinct {
            assert_eq!(t, answer_triplet(&ds, t.i(), t.j(), t.k()).unwrap());
        }
    }

    #[test]
    fn anchor_sampling_is_uniform() {
        let mut rng = seed_stream(2, "uniformity");
        let pts = DMatrix::from_fn(10, 2, |_, _| rng.gen_range(0.0..10.0));
        let ds = Dataset::new(pts, None, "ten").unwrap();
        let ts = generate_triplets(&ds, 100_000, 13).unwrap();
        let mut counts = [0usize; 10];
        for t in ts.triplets() {
            counts[t.i()] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            // 5-sigma binomial band around 10,000.
            assert!(
                (9_400..=10_600).contains(&c),
                "anchor {i} drawn {c} times in 100k samples"
            );
        }
    }
}
