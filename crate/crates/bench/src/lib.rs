//! Fixtures shared by the criterion benchmarks: Zipf-weighted skip lists and
//! KD trees (learned and classic) together with query streams drawn from the
//! same distribution.

use learned_search::bench::{kd_dataset, BenchConfig, Experiment};
use learned_search::distributions::sample_indices;
use learned_search::{zipf_pmf, Key, KdTree, LearnedSkipList, ProbabilityVector, WeightedPoint, ZipfSpec};

/// A learned and a classic skip list over keys `0..n`, plus sampled queries.
pub struct SkipFixture {
    pub f: ProbabilityVector,
    pub learned: LearnedSkipList<Key>,
    pub classic: LearnedSkipList<Key>,
    pub queries: Vec<Key>,
}

impl SkipFixture {
    pub fn new(n: usize, zipf_a: f64, query_count: usize, seed: u64) -> Self {
        let f = zipf_pmf(&ZipfSpec::new(n, zipf_a, 0.0).expect("valid zipf")).expect("zipf pmf");
        let learned = LearnedSkipList::from_predictions(&f, seed).expect("learned build");
        let classic = LearnedSkipList::classic_build(f.keys().to_vec(), 0.5, seed).expect("classic build");
        let queries = sample_indices(&f, query_count, seed ^ 0x5eed).into_iter().map(|i| f.keys()[i]).collect();
        Self { f, learned, classic, queries }
    }
}

/// A learned and a classic KD tree over random grid points with Zipf weights.
pub struct KdFixture {
    pub dataset: Vec<WeightedPoint>,
    pub learned: KdTree,
    pub classic: KdTree,
    pub queries: Vec<Vec<i64>>,
}

impl KdFixture {
    pub fn new(n: usize, dim: usize, zipf_a: f64, query_count: usize, seed: u64) -> Self {
        let mut config = BenchConfig::new(Experiment::KdtreeZipf).with_zipf(zipf_a, 0.0);
        config.n = n;
        config.dim = dim;
        let spec = config.zipf_spec().expect("zipf configured");
        let data = kd_dataset(&config, &spec, seed).expect("kd dataset");
        let dataset: Vec<WeightedPoint> =
            data.coords.iter().zip(data.f.probs()).map(|(c, &p)| WeightedPoint::data(c.clone(), p)).collect();
        let learned = KdTree::build(&dataset, &[]).expect("learned build");
        let classic = KdTree::classic_build(&dataset).expect("classic build");
        let queries =
            sample_indices(&data.f, query_count, seed ^ 0x5eed).into_iter().map(|i| data.coords[i].clone()).collect();
        Self { dataset, learned, classic, queries }
    }
}
