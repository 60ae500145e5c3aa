//! Predicted and true frequency vectors, and the noise models used to
//! produce imperfect predictions from a ground truth.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;
use crate::workload::QueryTrace;
use crate::Key;

/// Allowed deviation of a probability vector's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("every weight is zero")]
    AllZero,
    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("invalid noise spec: {0}")]
    InvalidSpec(String),
    #[error("probability vectors are over different key sets")]
    KeyMismatch,
    #[error("invalid probability vector: {0}")]
    InvalidVector(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Normalized query frequencies over a set of keys.
///
/// `probs[i]` is the probability of `keys[i]`. Entries lie in `[0, 1]` and sum
/// to one within [`SUM_TOLERANCE`]. Keys are unique; their order is whatever
/// the producer chose (skip-list construction sorts them itself).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    keys: Vec<Key>,
    probs: Vec<f64>,
}

impl ProbabilityVector {
    /// Checks every invariant and wraps the two columns.
    pub fn new(keys: Vec<Key>, probs: Vec<f64>) -> Result<Self, OracleError> {
        if keys.len() != probs.len() {
            return Err(OracleError::InvalidVector(format!(
                "{} keys but {} probabilities",
                keys.len(),
                probs.len()
            )));
        }
        if keys.is_empty() {
            return Err(OracleError::InvalidVector("no keys".into()));
        }
        if let Some((i, &p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(OracleError::InvalidVector(format!(
                "entry {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(OracleError::InvalidVector(format!("entries sum to {sum}")));
        }
        let mut seen = std::collections::HashSet::with_capacity(keys.len());
        if let Some(k) = keys.iter().find(|k| !seen.insert(**k)) {
            return Err(OracleError::InvalidVector(format!("duplicate key {k}")));
        }
        Ok(Self { keys, probs })
    }

    /// Normalizes `weights` and attaches them to `keys`.
    pub fn from_weights(keys: Vec<Key>, weights: &[f64]) -> Result<Self, OracleError> {
        let probs = normalized(weights)?;
        Self::new(keys, probs)
    }

    pub fn uniform(keys: Vec<Key>) -> Result<Self, OracleError> {
        let w = vec![1.0; keys.len()];
        Self::from_weights(keys, &w)
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `key`, or `None` if the key is not in the vector.
    pub fn get(&self, key: Key) -> Option<f64> {
        self.keys.iter().position(|&k| k == key).map(|i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Key, f64)> + '_ {
        self.keys.iter().copied().zip(self.probs.iter().copied())
    }

    /// Same probabilities, relabelled with `keys`.
    pub fn with_keys(&self, keys: Vec<Key>) -> Result<Self, OracleError> {
        Self::new(keys, self.probs.clone())
    }

    /// Writes `key,prob` rows under a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), OracleError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["key", "prob"])?;
        for (k, p) in self.iter() {
            w.write_record([k.to_string(), p.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, OracleError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut keys = Vec::new();
        let mut probs = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse_err = |what: &str| {
                OracleError::InvalidVector(format!("row {}: bad {what}", line + 2))
            };
            if rec.len() != 2 {
                return Err(parse_err("column count"));
            }
            keys.push(rec[0].trim().parse::<Key>().map_err(|_| parse_err("key"))?);
            probs.push(rec[1].trim().parse::<f64>().map_err(|_| parse_err("prob"))?);
        }
        Self::new(keys, probs)
    }
}

fn normalized(weights: &[f64]) -> Result<Vec<f64>, OracleError> {
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !w.is_finite() || **w < 0.0)
    {
        return Err(OracleError::InvalidWeight { index, value });
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(OracleError::AllZero);
    }
    Ok(weights.iter().map(|w| (w / sum).min(1.0)).collect())
}

/// Divides `weights` by their sum. Keys are the positions `0..len`.
pub fn normalize(weights: &[f64]) -> Result<ProbabilityVector, OracleError> {
    let probs = normalized(weights)?;
    ProbabilityVector::new((0..probs.len() as Key).collect(), probs)
}

/// Occurrence frequencies of the `universe` keys in `trace`.
///
/// Trace entries outside the universe are ignored. When no universe key
/// occurs at all the uniform vector is returned.
pub fn empirical_frequencies(trace: &QueryTrace, universe: &[Key]) -> ProbabilityVector {
    let index: HashMap<Key, usize> = universe.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut counts = vec![0.0f64; universe.len()];
    for k in trace.entries() {
        if let Some(&i) = index.get(k) {
            counts[i] += 1.0;
        }
    }
    ProbabilityVector::from_weights(universe.to_vec(), &counts)
        .or_else(|_| ProbabilityVector::uniform(universe.to_vec()))
        .expect("universe must be non-empty and duplicate free")
}

/// Distribution mixed into the truth by [`NoiseSpec::Mix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contaminant {
    Uniform,
    /// The truth with its ranking reversed.
    Reversed,
}

/// How predictions are derived from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NoiseSpec {
    Perfect,
    /// `alpha * f + (1 - alpha) * q`.
    Mix { alpha: f64, contaminant: Contaminant },
    /// `normalize(M_i * f_i + A_i)` with `M_i ~ U[1, m_max]`, `A_i ~ U[0, a_max]`.
    Scale { m_max: f64, a_max: f64 },
    /// Probability values permuted so the ranking is reversed.
    Adversarial,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        match *self {
            NoiseSpec::Mix { alpha, .. } if !(alpha > 0.0 && alpha <= 1.0) => Err(
                OracleError::InvalidSpec(format!("mix alpha {alpha} outside (0, 1]")),
            ),
            NoiseSpec::Scale { m_max, .. } if !(m_max >= 1.0 && m_max.is_finite()) => {
                Err(OracleError::InvalidSpec(format!("scale M_max {m_max} < 1")))
            }
            NoiseSpec::Scale { a_max, .. } if !(a_max >= 0.0 && a_max.is_finite()) => {
                Err(OracleError::InvalidSpec(format!("scale A_max {a_max} < 0")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Perfect => write!(f, "perfect"),
            NoiseSpec::Mix { alpha, contaminant: Contaminant::Uniform } => write!(f, "mix:{alpha}"),
            NoiseSpec::Mix { alpha, contaminant: Contaminant::Reversed } => {
                write!(f, "mix:{alpha}:reversed")
            }
            NoiseSpec::Scale { m_max, a_max } => write!(f, "scale:{m_max}:{a_max}"),
            NoiseSpec::Adversarial => write!(f, "adversarial"),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = OracleError;

    /// Parses `perfect`, `adversarial`, `mix:ALPHA[:uniform|:reversed]` and
    /// `scale:M_MAX:A_MAX`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OracleError::InvalidSpec(format!("cannot parse noise spec `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["perfect"] => NoiseSpec::Perfect,
            ["adversarial"] => NoiseSpec::Adversarial,
            ["mix", a] | ["mix", a, "uniform"] => NoiseSpec::Mix {
                alpha: num(a)?,
                contaminant: Contaminant::Uniform,
            },
            ["mix", a, "reversed"] => NoiseSpec::Mix {
                alpha: num(a)?,
                contaminant: Contaminant::Reversed,
            },
            ["scale", m, a] => NoiseSpec::Scale { m_max: num(m)?, a_max: num(a)? },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<NoiseSpec> for String {
    fn from(n: NoiseSpec) -> String {
        n.to_string()
    }
}

impl TryFrom<String> for NoiseSpec {
    type Error = OracleError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Indices of `probs` ordered by decreasing probability, ties by index.
fn rank_order(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// `f` with its values permuted so the most likely key gets the smallest value.
fn rank_reversed(probs: &[f64]) -> Vec<f64> {
    let order = rank_order(probs);
    let mut out = vec![0.0; probs.len()];
    for (r, &i) in order.iter().enumerate() {
        out[i] = probs[order[order.len() - 1 - r]];
    }
    out
}

/// Produces predictions from the truth `f` according to `spec`.
pub fn apply_noise(
    f: &ProbabilityVector,
    spec: &NoiseSpec,
    rng_seed: u64,
) -> Result<ProbabilityVector, OracleError> {
    spec.validate()?;
    match *spec {
        NoiseSpec::Perfect => Ok(f.clone()),
        NoiseSpec::Adversarial => f.with_keys(f.keys.clone()).map(|mut p| {
            p.probs = rank_reversed(&f.probs);
            p
        }),
        NoiseSpec::Mix { alpha, contaminant } => {
            let n = f.len() as f64;
            let q = match contaminant {
                Contaminant::Uniform => vec![1.0 / n; f.len()],
                Contaminant::Reversed => rank_reversed(&f.probs),
            };
            let probs = f
                .probs
                .iter()
                .zip(&q)
                .map(|(&fi, &qi)| (alpha * fi + (1.0 - alpha) * qi).min(1.0))
                .collect();
            ProbabilityVector::new(f.keys.clone(), probs)
        }
        NoiseSpec::Scale { m_max, a_max } => {
            let mut rng = rng_from_seed(rng_seed);
            let weights: Vec<f64> = f
                .probs
                .iter()
                .map(|&fi| {
                    let m = if m_max > 1.0 { rng.random_range(1.0..=m_max) } else { 1.0 };
                    let a = if a_max > 0.0 { rng.random_range(0.0..=a_max) } else { 0.0 };
                    m * fi + a
                })
                .collect();
            ProbabilityVector::from_weights(f.keys.clone(), &weights)
        }
    }
}

/// Whether `p_i >= alpha * f_i - beta` holds for every key.
pub fn verify_noisy(
    p: &ProbabilityVector,
    f: &ProbabilityVector,
    alpha: f64,
    beta: f64,
) -> Result<bool, OracleError> {
    if p.len() != f.len() {
        return Err(OracleError::KeyMismatch);
    }
    if p.keys == f.keys {
        return Ok(p.probs.iter().zip(&f.probs).all(|(&pi, &fi)| pi >= alpha * fi - beta));
    }
    let lookup: HashMap<Key, f64> = p.iter().collect();
    let mut ok = true;
    for (k, fi) in f.iter() {
        let pi = *lookup.get(&k).ok_or(OracleError::KeyMismatch)?;
        ok &= pi >= alpha * fi - beta;
    }
    Ok(ok)
}
