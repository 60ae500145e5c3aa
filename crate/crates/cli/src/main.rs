//! `learned-search`: generate workloads and run the skip-list and KD-tree
//! experiments.
//!
//! Exit status: 0 on success, 1 on configuration errors (including bad
//! arguments), 2 on I/O errors.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use learned_search::bench::{parse_pairs, run_bench, write_report, BenchConfig, BenchError, Experiment, OutputFormat};
use learned_search::kdtree::{write_points_csv, WeightedPoint};
use learned_search::oracle::{apply_noise, NoiseSpec};
use learned_search::workload::{
    bin_points, intersection_matrix, load_trace, minute_windows, read_real_points, split_windows, TraceFormat,
    WindowSpec, MINUTE_SECS,
};
use learned_search::{zipf_pmf, ZipfSpec};

#[derive(Parser)]
#[command(name = "learned-search", version, about = "Learning-augmented skip lists and KD trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Base RNG seed; trial i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trials (median-aggregated).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Workload {
    /// Number of keys or points.
    #[arg(long)]
    n: Option<usize>,
    /// Number of queries.
    #[arg(long)]
    queries: Option<usize>,
    /// Zipf exponent (0 = uniform).
    #[arg(long)]
    zipf_a: Option<f64>,
    /// Zipf shift.
    #[arg(long)]
    zipf_b: Option<f64>,
    /// Prediction noise: perfect, adversarial, mix:ALPHA[:uniform|:reversed], scale:M:A.
    #[arg(long)]
    noise: Option<String>,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Zipf probability vector as `key,prob` CSV.
    GenZipf {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Apply a noise model to the vector.
        #[arg(long)]
        noise: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Learned vs classic skip lists (skiplist-zipf or skiplist-trace).
    BenchSkiplist {
        /// skiplist-zipf or skiplist-trace.
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        workload: Workload,
        /// Trace to replay (skiplist-trace).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// lines or csv.
        #[arg(long)]
        trace_format: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Learned vs classic KD trees (kdtree-zipf, kdtree-noise, kdtree-points).
    BenchKdtree {
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        workload: Workload,
        #[arg(long)]
        dim: Option<usize>,
        /// Grid side: coordinates lie in [1, delta].
        #[arg(long)]
        delta: Option<i64>,
        /// random or coherent.
        #[arg(long)]
        assignment: Option<String>,
        /// Real-valued build samples (kdtree-points).
        #[arg(long)]
        points: Option<PathBuf>,
        /// Real-valued query samples (kdtree-points).
        #[arg(long)]
        query_points: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// History-based predictions over train/test windows of a trace.
    BenchRobustness {
        #[command(flatten)]
        workload: Workload,
        /// Comma-separated windows, e.g. 10_2,2_2,3_3,6_6.
        #[arg(long)]
        windows: Option<String>,
        /// Trace file; a synthetic Zipf trace is generated when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        trace_format: Option<String>,
        /// Minutes in the synthetic trace.
        #[arg(long)]
        minutes: Option<usize>,
        /// Reshuffle key ranks every synthetic minute.
        #[arg(long)]
        drift: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Intersection-index matrix between windows of a trace.
    AnalyzeTrace {
        #[arg(long)]
        trace: PathBuf,
        /// lines or csv; csv traces default to one window per minute.
        #[arg(long, default_value = "csv")]
        trace_format: String,
        /// Explicit windows (their test ranges are compared); defaults to minutes.
        #[arg(long)]
        windows: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Bin real-valued points into grid cells, writing `x1,...,xd,prob,is_data`.
    BinPoints {
        /// CSV of real-valued points with a header row.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        resolution: f64,
        #[command(flatten)]
        common: Common,
    },
}

/// Train/test windows used when none are configured.
const DEFAULT_WINDOWS: &str = "10_2,2_2,3_3,6_6";

enum Failure {
    Config(String),
    Io(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Io(e.to_string())
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn io_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Io(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(io_err)
        }
    }
}

type Overrides = Vec<(String, String)>;

/// Layers `defaults`, then the config file, then flag `overrides`, then the
/// common flags, and validates the result.
fn bench_config(
    common: &Common,
    default_experiment: Experiment,
    allowed: &[Experiment],
    defaults: &[(&str, &str)],
    overrides: Overrides,
) -> Result<BenchConfig, Failure> {
    let file_pairs = match &common.config {
        Some(path) => parse_pairs(&read_text(path)?)?,
        None => Vec::new(),
    };
    let chosen = overrides.iter().chain(&file_pairs).find(|(k, _)| k == "experiment");
    let experiment = match chosen {
        Some((_, v)) => v.parse::<Experiment>()?,
        None => default_experiment,
    };
    if !allowed.contains(&experiment) {
        return Err(Failure::Config(format!("experiment {experiment} does not belong to this command")));
    }
    let mut config = BenchConfig::new(experiment);
    let layered = defaults
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .chain(file_pairs)
        .chain(overrides)
        .filter(|(k, _)| k != "experiment");
    for (k, v) in layered {
        config.set(&k, &v)?;
    }
    if let Some(s) = common.seed {
        config.rng_seed = s;
    }
    if let Some(t) = common.trials {
        config.trials = t;
    }
    if let Some(f) = &common.format {
        config.format = f.parse()?;
    }
    if let Some(o) = &common.out {
        config.output_path = Some(o.clone());
    }
    config.validate()?;
    Ok(config)
}

fn workload_overrides(w: &Workload) -> Result<Overrides, Failure> {
    let mut o = Overrides::new();
    push_opt(&mut o, "n", &w.n);
    push_opt(&mut o, "query_count", &w.queries);
    push_opt(&mut o, "zipf_a", &w.zipf_a);
    push_opt(&mut o, "zipf_b", &w.zipf_b);
    push_opt(&mut o, "noise", &w.noise);
    for kv in &w.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        o.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(o)
}

fn push_opt<T: ToString>(o: &mut Overrides, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        o.push((key.to_owned(), v.to_string()));
    }
}

fn run_and_emit(config: &BenchConfig) -> Result<(), Failure> {
    let report = run_bench(config)?;
    let mut buf = Vec::new();
    write_report(&report, config.format, &mut buf)?;
    output(config.output_path.as_deref(), &buf)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenZipf { n, a, b, noise, common } => {
            let pairs = match &common.config {
                Some(path) => parse_pairs(&read_text(path)?)?,
                None => Vec::new(),
            };
            let lookup = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
            let parse_f = |v: Option<String>, key: &str| -> Result<Option<f64>, Failure> {
                v.map(|s| s.parse::<f64>().map_err(|_| Failure::Config(format!("`{key}`: bad number `{s}`")))).transpose()
            };
            let n = match n {
                Some(n) => n,
                None => lookup("n")
                    .map(|s| s.parse::<usize>().map_err(|_| Failure::Config(format!("`n`: bad number `{s}`"))))
                    .transpose()?
                    .ok_or_else(|| Failure::Config("--n is required".into()))?,
            };
            let a = a.or(parse_f(lookup("zipf_a"), "zipf_a")?).unwrap_or(1.0);
            let b = b.or(parse_f(lookup("zipf_b"), "zipf_b")?).unwrap_or(0.0);
            let noise: NoiseSpec =
                noise.or(lookup("noise")).map(|s| s.parse()).transpose().map_err(config_err)?.unwrap_or(NoiseSpec::Perfect);
            let seed = common.seed.or(lookup("rng_seed").and_then(|s| s.parse().ok())).unwrap_or(0);
            let spec = ZipfSpec::new(n, a, b).map_err(config_err)?;
            let f = zipf_pmf(&spec).map_err(config_err)?;
            let p = apply_noise(&f, &noise, seed).map_err(config_err)?;
            let format: OutputFormat = common.format.as_deref().unwrap_or("csv").parse()?;
            let bytes = match format {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    p.write_csv(&mut buf).map_err(io_err)?;
                    buf
                }
                OutputFormat::Json => {
                    let rows: Vec<serde_json::Value> =
                        p.iter().map(|(k, pr)| serde_json::json!({ "key": k, "prob": pr })).collect();
                    let mut v = serde_json::to_vec_pretty(&rows).map_err(io_err)?;
                    v.push(b'\n');
                    v
                }
            };
            output(common.out.as_deref(), &bytes)
        }
        Command::BenchSkiplist { experiment, workload, trace, trace_format, common } => {
            let mut o = workload_overrides(&workload)?;
            push_opt(&mut o, "experiment", &experiment);
            push_opt(&mut o, "trace", &trace.map(|p| p.display().to_string()));
            push_opt(&mut o, "trace_format", &trace_format);
            let allowed = [Experiment::SkiplistZipf, Experiment::SkiplistTrace];
            let config = bench_config(&common, Experiment::SkiplistZipf, &allowed, &[], o)?;
            run_and_emit(&config)
        }
        Command::BenchKdtree {
            experiment,
            workload,
            dim,
            delta,
            assignment,
            points,
            query_points,
            resolution,
            common,
        } => {
            let mut o = workload_overrides(&workload)?;
            push_opt(&mut o, "experiment", &experiment);
            push_opt(&mut o, "dim", &dim);
            push_opt(&mut o, "delta", &delta);
            push_opt(&mut o, "assignment", &assignment);
            push_opt(&mut o, "points", &points.map(|p| p.display().to_string()));
            push_opt(&mut o, "query_points", &query_points.map(|p| p.display().to_string()));
            push_opt(&mut o, "resolution", &resolution);
            let allowed = [Experiment::KdtreeZipf, Experiment::KdtreeNoise, Experiment::KdtreePoints];
            let config = bench_config(&common, Experiment::KdtreeZipf, &allowed, &[], o)?;
            run_and_emit(&config)
        }
        Command::BenchRobustness { workload, windows, trace, trace_format, minutes, drift, common } => {
            let mut o = workload_overrides(&workload)?;
            push_opt(&mut o, "windows", &windows);
            push_opt(&mut o, "trace", &trace.map(|p| p.display().to_string()));
            push_opt(&mut o, "trace_format", &trace_format);
            push_opt(&mut o, "minutes", &minutes);
            if drift {
                o.push(("drift".into(), "true".into()));
            }
            let config = bench_config(
                &common,
                Experiment::SkiplistRobustness,
                &[Experiment::SkiplistRobustness],
                &[("windows", DEFAULT_WINDOWS)],
                o,
            )?;
            run_and_emit(&config)
        }
        Command::AnalyzeTrace { trace, trace_format, windows, common } => {
            let format: TraceFormat = trace_format.parse().map_err(Failure::Config)?;
            let t = load_trace(open(&trace)?, format).map_err(|e| Failure::from(BenchError::from(e)))?;
            let (labels, parts): (Vec<String>, Vec<_>) = match windows {
                Some(list) => {
                    let mut labels = Vec::new();
                    let mut parts = Vec::new();
                    for w in list.split(',').filter(|s| !s.trim().is_empty()) {
                        let spec: WindowSpec = w.parse().map_err(config_err)?;
                        let (train, test) = split_windows(&t, &spec).map_err(|e| Failure::from(BenchError::from(e)))?;
                        labels.push(format!("{}:train", spec.label));
                        parts.push(train);
                        labels.push(format!("{}:test", spec.label));
                        parts.push(test);
                    }
                    (labels, parts)
                }
                None => {
                    let ws = minute_windows(&t, MINUTE_SECS).map_err(|e| Failure::from(BenchError::from(e)))?;
                    ((0..ws.len()).map(|i| format!("minute{i}")).collect(), ws)
                }
            };
            let m = intersection_matrix(&parts).map_err(|e| Failure::from(BenchError::from(e)))?;
            let format: OutputFormat = common.format.as_deref().unwrap_or("json").parse()?;
            let bytes = match format {
                OutputFormat::Json => {
                    let mut v = serde_json::to_vec_pretty(&serde_json::json!({ "labels": labels, "matrix": m }))
                        .map_err(io_err)?;
                    v.push(b'\n');
                    v
                }
                OutputFormat::Csv => {
                    let mut s = format!("window,{}\n", labels.join(","));
                    for (label, row) in labels.iter().zip(&m) {
                        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                        s.push_str(&format!("{label},{}\n", cells.join(",")));
                    }
                    s.into_bytes()
                }
            };
            output(common.out.as_deref(), &bytes)
        }
        Command::BinPoints { input, resolution, common } => {
            let samples = read_real_points(open(&input)?).map_err(|e| Failure::from(BenchError::from(e)))?;
            let bins = bin_points(&samples, resolution).map_err(|e| Failure::from(BenchError::from(e)))?;
            let total: u64 = bins.iter().map(|b| b.count).sum();
            let points: Vec<WeightedPoint> =
                bins.into_iter().map(|b| WeightedPoint::data(b.coords, b.count as f64 / total as f64)).collect();
            let mut buf = Vec::new();
            write_points_csv(&mut buf, &points).map_err(io_err)?;
            output(common.out.as_deref(), &buf)
        }
    }
}
