//! Zipf workloads, Shannon entropy and the Huffman expected code length.
//!
//! Logarithms are base 2 throughout.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::ProbabilityVector;
use crate::rng::rng_from_seed;
use crate::workload::QueryTrace;
use crate::Key;

#[derive(Debug, Error, PartialEq)]
#[error("invalid zipf parameters: {0}")]
pub struct ZipfError(String);

/// `f_i ∝ 1 / (i + b)^a` over ranks `i = 1..=n`.
///
/// `a = 0` gives the uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl ZipfSpec {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self, ZipfError> {
        let spec = Self { n, a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ZipfError> {
        if self.n == 0 {
            return Err(ZipfError("n must be at least 1".into()));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(ZipfError(format!("exponent {} must be finite and >= 0", self.a)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(ZipfError(format!("shift {} must be finite and >= 0", self.b)));
        }
        Ok(())
    }

    /// Unnormalized weight of rank `rank` (1-based).
    pub fn weight(&self, rank: usize) -> f64 {
        (rank as f64 + self.b).powf(-self.a)
    }
}

/// Zipf probabilities; key `r - 1` holds rank `r`.
pub fn zipf_pmf(spec: &ZipfSpec) -> Result<ProbabilityVector, ZipfError> {
    spec.validate()?;
    let weights: Vec<f64> = (1..=spec.n).map(|r| spec.weight(r)).collect();
    ProbabilityVector::from_weights((0..spec.n as Key).collect(), &weights)
        .map_err(|e| ZipfError(e.to_string()))
}

/// `Σ p_i log2(1/p_i)`, with `0 log(1/0) = 0`.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn entropy(p: &ProbabilityVector) -> f64 {
    entropy_of(p.probs())
}

#[derive(PartialEq)]
struct Weight(f64);

impl Eq for Weight {}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Codeword lengths of a Huffman code for `probs`.
///
/// The two lightest nodes are merged first; equal weights are resolved in
/// favour of the node whose smallest key index is lower.
pub fn huffman_code_lengths(probs: &[f64]) -> Vec<u32> {
    let n = probs.len();
    if n <= 1 {
        return vec![0; n];
    }
    // nodes 0..n are leaves, n.. are internal
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(Weight, usize, usize)>> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| Reverse((Weight(p), i, i)))
        .collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((Weight(wa), ka, a)) = heap.pop().unwrap();
        let Reverse((Weight(wb), kb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((Weight(wa + wb), ka.min(kb), next)));
        next += 1;
    }
    let root = next - 1;
    // parents always have larger ids, so walk down from the root
    let mut depth = vec![0u32; 2 * n - 1];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    depth.truncate(n);
    depth
}

/// `Σ p_i · depth_i` of the Huffman tree for `p`.
pub fn huffman_expected_length(p: &ProbabilityVector) -> f64 {
    huffman_code_lengths(p.probs())
        .iter()
        .zip(p.probs())
        .map(|(&d, &pi)| d as f64 * pi)
        .sum()
}

/// Inverse-CDF sampler over a fixed probability vector.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    cumulative: Vec<f64>,
}

impl IndexSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    /// Draws an index; zero-probability indices are never returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

/// `count` i.i.d. positions drawn with probabilities `p`.
pub fn sample_indices(p: &ProbabilityVector, count: usize, rng_seed: u64) -> Vec<usize> {
    let sampler = IndexSampler::new(p.probs());
    let mut rng = rng_from_seed(rng_seed);
    (0..count).map(|_| sampler.sample(&mut rng)).collect()
}

/// `count` i.i.d. keys drawn with probabilities `p`.
pub fn sample_queries(p: &ProbabilityVector, count: usize, rng_seed: u64) -> QueryTrace {
    let keys = p.keys();
    QueryTrace::new(
        sample_indices(p, count, rng_seed)
            .into_iter()
            .map(|i| keys[i])
            .collect(),
    )
}
