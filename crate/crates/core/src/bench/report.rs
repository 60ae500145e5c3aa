//! Benchmark reports and their JSON / CSV encodings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use super::BenchError;

/// Results for one train/test window of a robustness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub label: String,
    pub train_queries: usize,
    pub test_queries: usize,
    pub test_keys: usize,
    /// Mean steps with predictions equal to the test window's frequencies.
    pub perfect_steps: f64,
    /// Mean steps with predictions from the train window.
    pub history_steps: f64,
    pub classic_steps: f64,
    pub intersection_index: f64,
    pub entropy_reference: f64,
}

/// Metrics of one trial. Skip-list runs fill the `*_steps`/`*levels`
/// fields, KD runs the `*_depth`/`*height` fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub mean_steps: Option<f64>,
    pub classic_mean_steps: Option<f64>,
    pub mean_depth: Option<f64>,
    pub classic_mean_depth: Option<f64>,
    pub num_levels: Option<usize>,
    pub classic_num_levels: Option<usize>,
    pub height: Option<usize>,
    pub classic_height: Option<usize>,
    /// `H(f)` of the query distribution.
    pub entropy_reference: f64,
    pub huffman_reference: Option<f64>,
    /// `20 + 2 Σ f_i min(log2 1/p_i, log2 n)` (skip lists).
    pub bound_value: Option<f64>,
    /// Classic metric over learned metric.
    pub speedup: f64,
    pub wall_clock_insert_s: f64,
    pub wall_clock_query_s: f64,
    pub windows: Vec<WindowMetrics>,
}

/// Medians over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_steps: Option<f64>,
    pub classic_mean_steps: Option<f64>,
    pub mean_depth: Option<f64>,
    pub classic_mean_depth: Option<f64>,
    pub num_levels: Option<f64>,
    pub classic_num_levels: Option<f64>,
    pub height: Option<f64>,
    pub classic_height: Option<f64>,
    pub entropy_reference: f64,
    pub huffman_reference: Option<f64>,
    pub bound_value: Option<f64>,
    pub speedup: f64,
    pub wall_clock_insert_s: f64,
    pub wall_clock_query_s: f64,
    pub windows: Vec<WindowMetrics>,
}

/// A complete experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiment: String,
    /// The configuration, in config-file syntax.
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    /// How paper statements were turned into measurable quantities.
    pub calibration: Vec<String>,
    pub trials: Vec<TrialMetrics>,
    pub aggregate: Aggregate,
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

fn med<T>(items: &[T], get: impl Fn(&T) -> f64) -> f64 {
    median(&mut items.iter().map(get).collect::<Vec<_>>())
}

fn med_opt<T>(items: &[T], get: impl Fn(&T) -> Option<f64>) -> Option<f64> {
    let mut v: Vec<f64> = items.iter().filter_map(get).collect();
    (!v.is_empty()).then(|| median(&mut v))
}

impl Aggregate {
    pub fn from_trials(trials: &[TrialMetrics]) -> Self {
        let windows = match trials.first() {
            None => Vec::new(),
            Some(first) => (0..first.windows.len())
                .map(|w| {
                    let ws: Vec<&WindowMetrics> = trials.iter().map(|t| &t.windows[w]).collect();
                    WindowMetrics {
                        label: ws[0].label.clone(),
                        train_queries: ws[0].train_queries,
                        test_queries: ws[0].test_queries,
                        test_keys: med(&ws, |x| x.test_keys as f64).round() as usize,
                        perfect_steps: med(&ws, |x| x.perfect_steps),
                        history_steps: med(&ws, |x| x.history_steps),
                        classic_steps: med(&ws, |x| x.classic_steps),
                        intersection_index: med(&ws, |x| x.intersection_index),
                        entropy_reference: med(&ws, |x| x.entropy_reference),
                    }
                })
                .collect(),
        };
        let as_f = |x: Option<usize>| x.map(|v| v as f64);
        Self {
            mean_steps: med_opt(trials, |t| t.mean_steps),
            classic_mean_steps: med_opt(trials, |t| t.classic_mean_steps),
            mean_depth: med_opt(trials, |t| t.mean_depth),
            classic_mean_depth: med_opt(trials, |t| t.classic_mean_depth),
            num_levels: med_opt(trials, |t| as_f(t.num_levels)),
            classic_num_levels: med_opt(trials, |t| as_f(t.classic_num_levels)),
            height: med_opt(trials, |t| as_f(t.height)),
            classic_height: med_opt(trials, |t| as_f(t.classic_height)),
            entropy_reference: med(trials, |t| t.entropy_reference),
            huffman_reference: med_opt(trials, |t| t.huffman_reference),
            bound_value: med_opt(trials, |t| t.bound_value),
            speedup: med(trials, |t| t.speedup),
            wall_clock_insert_s: med(trials, |t| t.wall_clock_insert_s),
            wall_clock_query_s: med(trials, |t| t.wall_clock_query_s),
            windows,
        }
    }
}

impl BenchReport {
    /// Copy with every wall-clock field zeroed, for comparing runs.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.wall_clock_insert_s = 0.0;
            t.wall_clock_query_s = 0.0;
        }
        r.aggregate.wall_clock_insert_s = 0.0;
        r.aggregate.wall_clock_query_s = 0.0;
        r
    }

    /// CSV header: fixed metric columns, then per-window columns named
    /// `LABEL.metric`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "trial",
            "seed",
            "mean_steps",
            "classic_mean_steps",
            "mean_depth",
            "classic_mean_depth",
            "num_levels",
            "classic_num_levels",
            "height",
            "classic_height",
            "entropy_reference",
            "huffman_reference",
            "bound_value",
            "speedup",
            "wall_clock_insert_s",
            "wall_clock_query_s",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if let Some(t) = self.trials.first() {
            for w in &t.windows {
                for m in WINDOW_COLUMNS {
                    h.push(format!("{}.{m}", w.label));
                }
            }
        }
        h
    }
}

const WINDOW_COLUMNS: [&str; 8] = [
    "train_queries",
    "test_queries",
    "test_keys",
    "perfect_steps",
    "history_steps",
    "classic_steps",
    "intersection_index",
    "entropy_reference",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_row(t: &TrialMetrics) -> Vec<String> {
    let mut row = vec![
        t.trial.to_string(),
        t.seed.to_string(),
        opt(t.mean_steps),
        opt(t.classic_mean_steps),
        opt(t.mean_depth),
        opt(t.classic_mean_depth),
        opt(t.num_levels),
        opt(t.classic_num_levels),
        opt(t.height),
        opt(t.classic_height),
        t.entropy_reference.to_string(),
        opt(t.huffman_reference),
        opt(t.bound_value),
        t.speedup.to_string(),
        t.wall_clock_insert_s.to_string(),
        t.wall_clock_query_s.to_string(),
    ];
    for w in &t.windows {
        row.extend([
            w.train_queries.to_string(),
            w.test_queries.to_string(),
            w.test_keys.to_string(),
            w.perfect_steps.to_string(),
            w.history_steps.to_string(),
            w.classic_steps.to_string(),
            w.intersection_index.to_string(),
            w.entropy_reference.to_string(),
        ]);
    }
    row
}

/// Encodes `report`: JSON is the full nested report, CSV has a header and
/// one row per trial with empty cells for absent values.
pub fn emit_report(report: &BenchReport, format: OutputFormat) -> Result<Vec<u8>, BenchError> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).map_err(|e| BenchError::Io(e.into()))?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let write = |w: &mut csv::Writer<Vec<u8>>, r: Vec<String>| {
                w.write_record(&r).map_err(|e| BenchError::Io(e.into()))
            };
            write(&mut w, report.csv_header())?;
            for t in &report.trials {
                write(&mut w, csv_row(t))?;
            }
            w.flush()?;
            w.into_inner().map_err(|e| BenchError::Io(e.into_error()))
        }
    }
}

/// Writes the encoded report to `out`.
pub fn write_report<W: Write>(report: &BenchReport, format: OutputFormat, mut out: W) -> Result<(), BenchError> {
    out.write_all(&emit_report(report, format)?)?;
    out.flush()?;
    Ok(())
}
