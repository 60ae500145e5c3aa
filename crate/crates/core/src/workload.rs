//! Query traces: loading, temporal windows, overlap statistics and spatial
//! binning of raw point samples.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Key;

/// Seconds per synthetic minute when resolving minute-based windows.
pub const MINUTE_SECS: i64 = 60;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("window {0} lies outside the trace")]
    OutOfBounds(String),
    #[error("window {0} selects no entries")]
    EmptyWindow(String),
    #[error("train and test windows of {0} overlap")]
    Overlap(String),
    #[error("window {0} needs timestamps but the trace has none")]
    MissingTimestamps(String),
    #[error("invalid window spec `{0}`")]
    BadWindowSpec(String),
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("point {index}: {msg}")]
    BadPoint { index: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Original key strings, indexed by interned id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyTable {
    names: Vec<String>,
    ids: HashMap<String, Key>,
}

impl KeyTable {
    pub fn intern(&mut self, name: &str) -> Key {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as Key;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<Key> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: Key) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// An ordered stream of key lookups with optional nondecreasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTrace {
    entries: Vec<Key>,
    timestamps: Option<Vec<i64>>,
    table: Option<Arc<KeyTable>>,
}

impl QueryTrace {
    pub fn new(entries: Vec<Key>) -> Self {
        Self { entries, timestamps: None, table: None }
    }

    /// Panics if the lengths differ or timestamps decrease.
    pub fn with_timestamps(entries: Vec<Key>, timestamps: Vec<i64>) -> Self {
        assert_eq!(entries.len(), timestamps.len());
        assert!(timestamps.windows(2).all(|w| w[0] <= w[1]), "timestamps must be nondecreasing");
        Self { entries, timestamps: Some(timestamps), table: None }
    }

    pub fn entries(&self) -> &[Key] {
        &self.entries
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn key_table(&self) -> Option<&KeyTable> {
        self.table.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct keys in ascending order.
    pub fn distinct_keys(&self) -> Vec<Key> {
        let mut keys = self.entries.clone();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    fn select(&self, range: std::ops::Range<usize>) -> QueryTrace {
        QueryTrace {
            entries: self.entries[range.clone()].to_vec(),
            timestamps: self.timestamps.as_ref().map(|t| t[range].to_vec()),
            table: self.table.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    /// One key per line.
    Lines,
    /// `timestamp,key` rows under a header line.
    Csv,
}

impl FromStr for TraceFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lines" => Ok(TraceFormat::Lines),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(format!("unknown trace format `{other}`")),
        }
    }
}

/// Reads a trace, interning keys to dense ids in first-seen order.
pub fn load_trace<R: Read>(source: R, format: TraceFormat) -> Result<QueryTrace, WorkloadError> {
    let reader = BufReader::new(source);
    let mut table = KeyTable::default();
    let mut entries = Vec::new();
    let mut timestamps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        match format {
            TraceFormat::Lines => {
                if line.is_empty() {
                    continue;
                }
                entries.push(table.intern(line));
            }
            TraceFormat::Csv => {
                if i == 0 || line.trim().is_empty() {
                    continue;
                }
                let (ts, key) = line.split_once(',').ok_or_else(|| WorkloadError::Parse {
                    line: lineno,
                    msg: "expected `timestamp,key`".into(),
                })?;
                let ts: i64 = ts.trim().parse().map_err(|_| WorkloadError::Parse {
                    line: lineno,
                    msg: format!("bad timestamp `{ts}`"),
                })?;
                if timestamps.last().is_some_and(|&prev| ts < prev) {
                    return Err(WorkloadError::Parse {
                        line: lineno,
                        msg: "timestamps decrease".into(),
                    });
                }
                timestamps.push(ts);
                entries.push(table.intern(key.trim()));
            }
        }
    }
    if entries.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    Ok(QueryTrace {
        entries,
        timestamps: (format == TraceFormat::Csv).then_some(timestamps),
        table: Some(Arc::new(table)),
    })
}

/// Part of a trace, by entry index, by timestamp, or by minute offset from
/// the first timestamp. All ranges are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowRange {
    Index { start: usize, end: usize },
    Time { start: i64, end: i64 },
    Minutes { start: i64, end: i64 },
}

impl WindowRange {
    fn is_empty(&self) -> bool {
        match *self {
            WindowRange::Index { start, end } => start >= end,
            WindowRange::Time { start, end } | WindowRange::Minutes { start, end } => start >= end,
        }
    }

    fn overlaps(&self, other: &WindowRange) -> bool {
        use WindowRange::*;
        match (*self, *other) {
            (Index { start: a, end: b }, Index { start: c, end: d }) => a < d && c < b,
            (Time { start: a, end: b }, Time { start: c, end: d })
            | (Minutes { start: a, end: b }, Minutes { start: c, end: d }) => a < d && c < b,
            _ => false,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            WindowRange::Index { .. } => "idx",
            WindowRange::Time { .. } => "ts",
            WindowRange::Minutes { .. } => "min",
        }
    }

    fn bounds(&self) -> (i64, i64) {
        match *self {
            WindowRange::Index { start, end } => (start as i64, end as i64),
            WindowRange::Time { start, end } | WindowRange::Minutes { start, end } => (start, end),
        }
    }
}

/// A named train/test split of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    pub label: String,
    pub train: WindowRange,
    pub test: WindowRange,
    pub allow_overlap: bool,
}

impl WindowSpec {
    pub fn new(label: impl Into<String>, train: WindowRange, test: WindowRange) -> Self {
        Self { label: label.into(), train, test, allow_overlap: false }
    }

    /// Minute-based splits of a 12-minute trace: `10_2`, `2_2` (minutes 9-10
    /// against 11-12), `3_3` and `6_6`. Any other `A_B` trains on the first
    /// `A` minutes and tests on the following `B`.
    pub fn minute_preset(label: &str) -> Option<Self> {
        let (a, b) = label.split_once('_')?;
        let (a, b): (i64, i64) = (a.parse().ok()?, b.parse().ok()?);
        let (train, test) = match (a, b) {
            (2, 2) => ((8, 10), (10, 12)),
            _ => ((0, a), (a, a + b)),
        };
        Some(Self::new(
            label,
            WindowRange::Minutes { start: train.0, end: train.1 },
            WindowRange::Minutes { start: test.0, end: test.1 },
        ))
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(preset) = Self::minute_preset(&self.label) {
            if preset.train == self.train && preset.test == self.test && !self.allow_overlap {
                return write!(f, "{}", self.label);
            }
        }
        let (a, b) = self.train.bounds();
        let (c, d) = self.test.bounds();
        write!(f, "{}:{}:{a}-{b}:{c}-{d}", self.label, self.train.kind())?;
        if self.allow_overlap {
            write!(f, ":overlap")?;
        }
        Ok(())
    }
}

impl FromStr for WindowSpec {
    type Err = WorkloadError;

    /// Accepts a minute preset such as `10_2`, or
    /// `LABEL:KIND:START-END:START-END[:overlap]` with `KIND` one of
    /// `idx`, `ts`, `min`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WorkloadError::BadWindowSpec(s.to_owned());
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() == 1 {
            return Self::minute_preset(parts[0]).ok_or_else(bad);
        }
        if !(4..=5).contains(&parts.len()) {
            return Err(bad());
        }
        let range = |t: &str| -> Result<(i64, i64), WorkloadError> {
            let (a, b) = t.split_once('-').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        };
        let (a, b) = range(parts[2])?;
        let (c, d) = range(parts[3])?;
        let make = |x: i64, y: i64| -> Result<WindowRange, WorkloadError> {
            Ok(match parts[1] {
                "idx" if x >= 0 && y >= 0 => WindowRange::Index { start: x as usize, end: y as usize },
                "ts" => WindowRange::Time { start: x, end: y },
                "min" => WindowRange::Minutes { start: x, end: y },
                _ => return Err(bad()),
            })
        };
        let allow_overlap = match parts.get(4) {
            None => false,
            Some(&"overlap") => true,
            Some(_) => return Err(bad()),
        };
        Ok(Self { label: parts[0].to_owned(), train: make(a, b)?, test: make(c, d)?, allow_overlap })
    }
}

fn resolve(trace: &QueryTrace, range: &WindowRange, label: &str) -> Result<QueryTrace, WorkloadError> {
    if range.is_empty() {
        return Err(WorkloadError::EmptyWindow(label.to_owned()));
    }
    let selected = match *range {
        WindowRange::Index { start, end } => {
            if end > trace.len() {
                return Err(WorkloadError::OutOfBounds(label.to_owned()));
            }
            start..end
        }
        WindowRange::Time { start, end } => time_slice(trace, start, end, label)?,
        WindowRange::Minutes { start, end } => {
            let origin = trace
                .timestamps()
                .and_then(|t| t.first().copied())
                .ok_or_else(|| WorkloadError::MissingTimestamps(label.to_owned()))?;
            time_slice(trace, origin + start * MINUTE_SECS, origin + end * MINUTE_SECS, label)?
        }
    };
    if selected.is_empty() {
        return Err(WorkloadError::EmptyWindow(label.to_owned()));
    }
    Ok(trace.select(selected))
}

fn time_slice(
    trace: &QueryTrace,
    start: i64,
    end: i64,
    label: &str,
) -> Result<std::ops::Range<usize>, WorkloadError> {
    let ts = trace
        .timestamps()
        .ok_or_else(|| WorkloadError::MissingTimestamps(label.to_owned()))?;
    let (first, last) = (ts[0], ts[ts.len() - 1]);
    if end <= first || start > last {
        return Err(WorkloadError::OutOfBounds(label.to_owned()));
    }
    Ok(ts.partition_point(|&t| t < start)..ts.partition_point(|&t| t < end))
}

/// Train and test sub-traces of `trace`, each in original order.
pub fn split_windows(
    trace: &QueryTrace,
    spec: &WindowSpec,
) -> Result<(QueryTrace, QueryTrace), WorkloadError> {
    if !spec.allow_overlap && spec.train.overlaps(&spec.test) {
        return Err(WorkloadError::Overlap(spec.label.clone()));
    }
    let train = resolve(trace, &spec.train, &format!("{} (train)", spec.label))?;
    let test = resolve(trace, &spec.test, &format!("{} (test)", spec.label))?;
    Ok((train, test))
}

/// Consecutive windows of `minute_secs` seconds starting at the first
/// timestamp. Empty minutes are skipped.
pub fn minute_windows(trace: &QueryTrace, minute_secs: i64) -> Result<Vec<QueryTrace>, WorkloadError> {
    let ts = trace
        .timestamps()
        .ok_or_else(|| WorkloadError::MissingTimestamps("minute windows".into()))?;
    if ts.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    let origin = ts[0];
    let mut out = Vec::new();
    let mut start = 0;
    while start < ts.len() {
        let minute = (ts[start] - origin).div_euclid(minute_secs);
        let bound = origin + (minute + 1) * minute_secs;
        let end = ts.partition_point(|&t| t < bound);
        out.push(trace.select(start..end));
        start = end;
    }
    Ok(out)
}

fn key_set(t: &QueryTrace) -> HashSet<Key> {
    t.entries().iter().copied().collect()
}

/// Occurrence-weighted overlap: entries (of either window) whose key occurs
/// in both windows, over the total number of entries.
pub fn intersection_index(w1: &QueryTrace, w2: &QueryTrace) -> Result<f64, WorkloadError> {
    if w1.is_empty() || w2.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    let (s1, s2) = (key_set(w1), key_set(w2));
    let shared = |t: &QueryTrace, other: &HashSet<Key>| {
        t.entries().iter().filter(|k| other.contains(k)).count()
    };
    let hits = shared(w1, &s2) + shared(w2, &s1);
    Ok(hits as f64 / (w1.len() + w2.len()) as f64)
}

/// Distinct keys present in both windows over distinct keys in either.
pub fn intersection_index_unique(w1: &QueryTrace, w2: &QueryTrace) -> Result<f64, WorkloadError> {
    if w1.is_empty() || w2.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    let (s1, s2) = (key_set(w1), key_set(w2));
    let both = s1.intersection(&s2).count();
    let either = s1.union(&s2).count();
    Ok(both as f64 / either as f64)
}

/// Pairwise [`intersection_index`] of every pair of windows.
pub fn intersection_matrix(windows: &[QueryTrace]) -> Result<Vec<Vec<f64>>, WorkloadError> {
    let k = windows.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = intersection_index(&windows[i], &windows[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// A grid cell and how many samples fell into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub coords: Vec<i64>,
    pub count: u64,
}

/// Maps each point to `floor(coord / resolution)` per axis and merges
/// duplicates. Bins come back in lexicographic order.
pub fn bin_points(points: &[Vec<f64>], resolution: f64) -> Result<Vec<Bin>, WorkloadError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(WorkloadError::InvalidResolution(resolution));
    }
    let dim = points.first().map_or(0, Vec::len);
    let mut bins: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim || dim == 0 {
            return Err(WorkloadError::BadPoint { index, msg: format!("expected {dim} coordinates") });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(WorkloadError::BadPoint { index, msg: "non-finite coordinate".into() });
        }
        let cell = p.iter().map(|c| (c / resolution).floor() as i64).collect();
        *bins.entry(cell).or_default() += 1;
    }
    Ok(bins.into_iter().map(|(coords, count)| Bin { coords, count }).collect())
}

/// Reads real-valued points: a header line, then one comma separated row per
/// point.
pub fn read_real_points<R: Read>(source: R) -> Result<Vec<Vec<f64>>, WorkloadError> {
    let reader = BufReader::new(source);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        out.push(row.map_err(|e| WorkloadError::Parse { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn load_lines() {
        let t = load_trace("a\na\nb\n".as_bytes(), TraceFormat::Lines).unwrap();
        assert_eq!(t.entries(), &[0, 0, 1]);
        let table = t.key_table().unwrap();
        assert_eq!(table.id("a"), Some(0));
        assert_eq!(table.id("b"), Some(1));
        assert_eq!(table.name(1), Some("b"));
        assert!(t.timestamps().is_none());
    }

    #[test]
    fn load_csv() {
        let t = load_trace("ts,key\n1,x\n2,y\n".as_bytes(), TraceFormat::Csv).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.timestamps(), Some(&[1, 2][..]));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_trace("".as_bytes(), TraceFormat::Lines), Err(WorkloadError::EmptyTrace)));
        assert!(matches!(load_trace("ts,key\n".as_bytes(), TraceFormat::Csv), Err(WorkloadError::EmptyTrace)));
        assert!(matches!(
            load_trace("ts,key\n1,a\nzz,b\n".as_bytes(), TraceFormat::Csv),
            Err(WorkloadError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            load_trace("ts,key\n5,a\n4,b\n".as_bytes(), TraceFormat::Csv),
            Err(WorkloadError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            load_trace("ts,key\nnocomma\n".as_bytes(), TraceFormat::Csv),
            Err(WorkloadError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn index_windows() {
        let t = QueryTrace::new((0..12).collect());
        let spec: WindowSpec = "10_2:idx:0-10:10-12".parse().unwrap();
        let (train, test) = split_windows(&t, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (10, 2));
        assert_eq!(test.entries(), &[10, 11]);

        let empty = WindowSpec::new(
            "e",
            WindowRange::Index { start: 0, end: 0 },
            WindowRange::Index { start: 0, end: 2 },
        );
        assert!(matches!(split_windows(&t, &empty), Err(WorkloadError::EmptyWindow(_))));
        let oob: WindowSpec = "o:idx:0-5:5-20".parse().unwrap();
        assert!(matches!(split_windows(&t, &oob), Err(WorkloadError::OutOfBounds(_))));
        let overlap: WindowSpec = "x:idx:0-6:5-8".parse().unwrap();
        assert!(matches!(split_windows(&t, &overlap), Err(WorkloadError::Overlap(_))));
        let allowed: WindowSpec = "x:idx:0-6:5-8:overlap".parse().unwrap();
        assert!(split_windows(&t, &allowed).is_ok());
    }

    #[test]
    fn timestamp_windows() {
        // one entry per minute, minutes 1..=12
        let t = QueryTrace::with_timestamps((0..12).collect(), (1..=12).collect());
        let spec: WindowSpec = "6_6:ts:1-7:7-13".parse().unwrap();
        let (train, test) = split_windows(&t, &spec).unwrap();
        assert_eq!(train.entries(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(test.entries(), &[6, 7, 8, 9, 10, 11]);
        assert_eq!(test.timestamps().unwrap(), &[7, 8, 9, 10, 11, 12]);

        let no_ts = QueryTrace::new(vec![1, 2]);
        assert!(matches!(split_windows(&no_ts, &spec), Err(WorkloadError::MissingTimestamps(_))));
    }

    #[test]
    fn minute_presets() {
        let ts: Vec<i64> = (0..12).flat_map(|m| [m * 60, m * 60 + 30]).collect();
        let t = QueryTrace::with_timestamps((0..24).collect(), ts);
        let expect = [("10_2", 20, 4), ("2_2", 4, 4), ("3_3", 6, 6), ("6_6", 12, 12)];
        for (label, a, b) in expect {
            let spec: WindowSpec = label.parse().unwrap();
            assert_eq!(spec.to_string(), label);
            let (train, test) = split_windows(&t, &spec).unwrap();
            assert_eq!((train.len(), test.len()), (a, b), "{label}");
        }
        let (train, _) = split_windows(&t, &"2_2".parse().unwrap()).unwrap();
        assert_eq!(train.entries(), &[16, 17, 18, 19]);
        assert_eq!(minute_windows(&t, 60).unwrap().len(), 12);
    }

    #[test]
    fn window_spec_text_round_trip() {
        for s in ["a:idx:0-10:10-12", "b:ts:60-600:600-720:overlap", "c:min:0-3:3-6", "10_2"] {
            assert_eq!(s.parse::<WindowSpec>().unwrap().to_string(), s);
        }
        for s in ["", "x", "a:idx:0-1", "a:foo:0-1:1-2", "a:idx:-1-2:2-3", "a:idx:0-1:1-2:maybe"] {
            assert!(s.parse::<WindowSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn intersection_examples() {
        // a=0, b=1, c=2
        let w1 = QueryTrace::new(vec![0, 0, 1]);
        let w2 = QueryTrace::new(vec![0, 2]);
        assert!((intersection_index(&w1, &w2).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(intersection_index(&w1, &w1).unwrap(), 1.0);
        assert_eq!(intersection_index(&w1, &QueryTrace::new(vec![7, 8])).unwrap(), 0.0);
        assert!((intersection_index_unique(&w1, &w2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(intersection_index(&w1, &QueryTrace::new(vec![])).is_err());
    }

    #[test]
    fn binning_examples() {
        let bins = bin_points(&[vec![0.1, 0.2], vec![5.0, 5.0]], 10.0).unwrap();
        assert_eq!(bins, vec![Bin { coords: vec![0, 0], count: 2 }]);
        let bins = bin_points(&[vec![15.0, 0.0]], 10.0).unwrap();
        assert_eq!(bins, vec![Bin { coords: vec![1, 0], count: 1 }]);
        let bins = bin_points(&[vec![-0.5]], 10.0).unwrap();
        assert_eq!(bins[0].coords, vec![-1]);
        assert!(bin_points(&[vec![1.0]], 0.0).is_err());
        assert!(bin_points(&[vec![1.0], vec![1.0, 2.0]], 1.0).is_err());
    }

    #[test]
    fn reads_real_points() {
        let pts = read_real_points("x,y\n1.5,2\n-3,4e1\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![vec![1.5, 2.0], vec![-3.0, 40.0]]);
        assert!(read_real_points("x\nabc\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn intersection_symmetric_and_bounded(
            a in prop::collection::vec(0u64..20, 1..60),
            b in prop::collection::vec(0u64..20, 1..60),
        ) {
            let (w1, w2) = (QueryTrace::new(a), QueryTrace::new(b));
            let x = intersection_index(&w1, &w2).unwrap();
            prop_assert_eq!(x, intersection_index(&w2, &w1).unwrap());
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn windows_are_subsequences(len in 2usize..100, cut in 1usize..99, seed in any::<u64>()) {
            let cut = cut.min(len - 1);
            let entries: Vec<Key> = (0..len as u64).map(|i| crate::rng::splitmix64(seed ^ i) % 7).collect();
            let t = QueryTrace::new(entries.clone());
            let spec = WindowSpec::new(
                "p",
                WindowRange::Index { start: 0, end: cut },
                WindowRange::Index { start: cut, end: len },
            );
            let (train, test) = split_windows(&t, &spec).unwrap();
            prop_assert_eq!(train.entries(), &entries[..cut]);
            prop_assert_eq!(test.entries(), &entries[cut..]);
        }

        #[test]
        fn binning_conserves_and_is_stable(
            pts in prop::collection::vec(prop::collection::vec(-1000.0f64..1000.0, 3), 1..80),
            res in 0.5f64..50.0,
        ) {
            let bins = bin_points(&pts, res).unwrap();
            prop_assert_eq!(bins.iter().map(|b| b.count).sum::<u64>(), pts.len() as u64);
            // bin centres land back in their own bin
            let centres: Vec<Vec<f64>> = bins
                .iter()
                .map(|b| b.coords.iter().map(|&c| (c as f64 + 0.5) * res).collect())
                .collect();
            let again = bin_points(&centres, res).unwrap();
            let original: Vec<&Vec<i64>> = bins.iter().map(|b| &b.coords).collect();
            let rebinned: Vec<&Vec<i64>> = again.iter().map(|b| &b.coords).collect();
            prop_assert_eq!(original, rebinned);
        }
    }
}
