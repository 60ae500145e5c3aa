//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # skip list on a Zipf workload
//! experiment = skiplist-zipf
//! n = 4096
//! zipf_a = 1.5
//! query_count = 100000
//! noise = mix:0.5
//! trials = 9
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Every key can also be
//! set programmatically through [`BenchConfig::set`], which is how command
//! line flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::ZipfSpec;
use crate::oracle::NoiseSpec;
use crate::workload::{TraceFormat, WindowSpec};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Skip lists over Zipf-distributed keys.
    SkiplistZipf,
    /// Skip lists replaying a recorded trace.
    SkiplistTrace,
    /// History-based predictions over train/test windows of a trace.
    SkiplistRobustness,
    /// KD trees over uniformly placed points with Zipf weights.
    KdtreeZipf,
    /// As `kdtree-zipf`, with noisy predictions.
    KdtreeNoise,
    /// KD trees over binned point-cloud samples.
    KdtreePoints,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::SkiplistZipf,
        Experiment::SkiplistTrace,
        Experiment::SkiplistRobustness,
        Experiment::KdtreeZipf,
        Experiment::KdtreeNoise,
        Experiment::KdtreePoints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SkiplistZipf => "skiplist-zipf",
            Experiment::SkiplistTrace => "skiplist-trace",
            Experiment::SkiplistRobustness => "skiplist-robustness",
            Experiment::KdtreeZipf => "kdtree-zipf",
            Experiment::KdtreeNoise => "kdtree-noise",
            Experiment::KdtreePoints => "kdtree-points",
        }
    }

    pub fn is_kdtree(self) -> bool {
        matches!(self, Experiment::KdtreeZipf | Experiment::KdtreeNoise | Experiment::KdtreePoints)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown experiment `{s}`")))
    }
}

/// How Zipf weights are assigned to KD points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assignment {
    /// Ranks follow a random permutation of the points.
    #[default]
    Random,
    /// Rank grows with the distance to a randomly chosen point.
    Coherent,
}

impl FromStr for Assignment {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "random" => Ok(Assignment::Random),
            "coherent" => Ok(Assignment::Coherent),
            _ => Err(BenchError::Config(format!("unknown assignment `{s}`"))),
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assignment::Random => "random",
            Assignment::Coherent => "coherent",
        })
    }
}

/// Report encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(BenchError::Config(format!("unknown format `{s}` (json or csv)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub experiment: Experiment,
    /// Number of keys or points (raw samples for `kdtree-points`).
    pub n: usize,
    pub query_count: usize,
    /// Zipf exponent and shift; the size comes from `n`.
    pub zipf: Option<(f64, f64)>,
    pub noise: Option<NoiseSpec>,
    pub windows: Vec<WindowSpec>,
    pub trials: usize,
    pub rng_seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Promotion probability of the classic skip list.
    pub classic_p: f64,
    /// KD dimension.
    pub dim: usize,
    /// KD grid side: coordinates lie in `[1, delta]`.
    pub delta: i64,
    pub assignment: Assignment,
    pub trace_path: Option<PathBuf>,
    pub trace_format: TraceFormat,
    /// Minutes in a synthetic robustness trace.
    pub minutes: usize,
    /// Synthetic trace reshuffles key ranks every minute.
    pub drift: bool,
    pub points_path: Option<PathBuf>,
    pub query_points_path: Option<PathBuf>,
    pub resolution: f64,
}

impl BenchConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: if experiment == Experiment::KdtreePoints { 1 << 18 } else { 4096 },
            query_count: if experiment == Experiment::KdtreePoints { 1 << 16 } else { 100_000 },
            zipf: None,
            noise: None,
            windows: Vec::new(),
            trials: 9,
            rng_seed: 0,
            output_path: None,
            format: OutputFormat::Json,
            classic_p: 0.5,
            dim: 3,
            delta: 1_000_000,
            assignment: Assignment::Random,
            trace_path: None,
            trace_format: TraceFormat::Lines,
            minutes: 12,
            drift: false,
            points_path: None,
            query_points_path: None,
            resolution: 10.0,
        }
    }

    pub fn with_zipf(mut self, a: f64, b: f64) -> Self {
        self.zipf = Some((a, b));
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    /// The Zipf distribution over `n` items, if configured.
    pub fn zipf_spec(&self) -> Option<ZipfSpec> {
        self.zipf.map(|(a, b)| ZipfSpec { n: self.n, a, b })
    }

    /// Noise model, `perfect` when unset.
    pub fn noise_spec(&self) -> NoiseSpec {
        self.noise.unwrap_or(NoiseSpec::Perfect)
    }

    /// Parses a config file. The `experiment` key is required.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let pairs = parse_pairs(text)?;
        let experiment = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .map(|(_, v)| v.parse::<Experiment>())
            .transpose()?
            .ok_or_else(|| BenchError::Config("missing `experiment`".into()))?;
        let mut config = Self::new(experiment);
        for (k, v) in &pairs {
            config.set(k, v)?;
        }
        Ok(config)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
            v.trim().parse().map_err(|_| BenchError::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        let v = value.trim();
        match key.trim() {
            "experiment" => self.experiment = v.parse()?,
            "n" => self.n = num(key, v)?,
            "query_count" | "queries" => self.query_count = num(key, v)?,
            "zipf_a" => self.zipf = Some((num(key, v)?, self.zipf.map_or(0.0, |z| z.1))),
            "zipf_b" => {
                let b = num(key, v)?;
                self.zipf = Some((self.zipf.map_or(f64::NAN, |z| z.0), b));
            }
            "noise" => {
                self.noise = Some(v.parse().map_err(|e: crate::oracle::OracleError| BenchError::Config(e.to_string()))?)
            }
            "windows" => {
                self.windows = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<WindowSpec>().map_err(|e| BenchError::Config(e.to_string())))
                    .collect::<Result<_, _>>()?
            }
            "trials" => self.trials = num(key, v)?,
            "rng_seed" | "seed" => self.rng_seed = num(key, v)?,
            "output_path" | "out" => self.output_path = Some(PathBuf::from(v)),
            "format" => self.format = v.parse()?,
            "classic_p" => self.classic_p = num(key, v)?,
            "dim" => self.dim = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "assignment" => self.assignment = v.parse()?,
            "trace" | "trace_path" => self.trace_path = Some(PathBuf::from(v)),
            "trace_format" => {
                self.trace_format = match v {
                    "lines" => TraceFormat::Lines,
                    "csv" => TraceFormat::Csv,
                    _ => return Err(BenchError::Config(format!("unknown trace format `{v}`"))),
                }
            }
            "minutes" => self.minutes = num(key, v)?,
            "drift" => self.drift = num(key, v)?,
            "points" | "points_path" => self.points_path = Some(PathBuf::from(v)),
            "query_points" | "query_points_path" => self.query_points_path = Some(PathBuf::from(v)),
            "resolution" => self.resolution = num(key, v)?,
            other => return Err(BenchError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks the fields the experiment needs.
    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.n == 0 {
            return err("n must be at least 1".into());
        }
        if self.query_count == 0 {
            return err("query_count must be at least 1".into());
        }
        if let Some(z) = self.zipf_spec() {
            z.validate().map_err(|e| BenchError::Config(format!("{e} (set zipf_a)")))?;
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        if !(self.classic_p > 0.0 && self.classic_p < 1.0) {
            return err(format!("classic_p {} outside (0, 1)", self.classic_p));
        }
        match self.experiment {
            Experiment::SkiplistZipf | Experiment::KdtreeZipf if self.zipf.is_none() => {
                return err(format!("{} needs zipf_a", self.experiment));
            }
            Experiment::KdtreeNoise if self.zipf.is_none() || self.noise.is_none() => {
                return err("kdtree-noise needs zipf_a and noise".into());
            }
            Experiment::SkiplistTrace if self.trace_path.is_none() => {
                return err("skiplist-trace needs trace".into());
            }
            Experiment::SkiplistRobustness => {
                if self.windows.is_empty() {
                    return err("skiplist-robustness needs windows".into());
                }
                if self.trace_path.is_none() && self.zipf.is_none() {
                    return err("skiplist-robustness needs a trace or zipf_a for a synthetic trace".into());
                }
                if self.minutes == 0 {
                    return err("minutes must be at least 1".into());
                }
            }
            Experiment::KdtreePoints if !(self.resolution > 0.0 && self.resolution.is_finite()) => {
                return err(format!("resolution {} must be positive", self.resolution));
            }
            _ => {}
        }
        if self.experiment.is_kdtree() {
            if self.dim == 0 {
                return err("dim must be at least 1".into());
            }
            if self.delta < 1 {
                return err("delta must be at least 1".into());
            }
            let cells = (self.delta as f64).powi(self.dim as i32);
            if self.experiment != Experiment::KdtreePoints && cells < 2.0 * self.n as f64 {
                return err(format!("grid of {cells} cells is too small for {} distinct points", self.n));
            }
        }
        Ok(())
    }

    /// Every field in file syntax, for echoing into reports.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("experiment", self.experiment.to_string());
        put("n", self.n.to_string());
        put("query_count", self.query_count.to_string());
        if let Some((a, b)) = self.zipf {
            put("zipf_a", a.to_string());
            put("zipf_b", b.to_string());
        }
        put("noise", self.noise_spec().to_string());
        if !self.windows.is_empty() {
            put("windows", self.windows.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        }
        put("trials", self.trials.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("format", self.format.to_string());
        if self.experiment.is_kdtree() {
            put("dim", self.dim.to_string());
            put("delta", self.delta.to_string());
            put("assignment", self.assignment.to_string());
        } else {
            put("classic_p", self.classic_p.to_string());
        }
        if let Some(p) = &self.trace_path {
            put("trace", p.display().to_string());
            put("trace_format", format!("{:?}", self.trace_format).to_lowercase());
        }
        if self.experiment == Experiment::SkiplistRobustness {
            put("minutes", self.minutes.to_string());
            put("drift", self.drift.to_string());
        }
        if self.experiment == Experiment::KdtreePoints {
            put("resolution", self.resolution.to_string());
            if let Some(p) = &self.points_path {
                put("points", p.display().to_string());
            }
            if let Some(p) = &self.query_points_path {
                put("query_points", p.display().to_string());
            }
        }
        m
    }
}

/// `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}
