use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_learned-search"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn learned-search")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_zipf_writes_key_prob_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o = run(&["gen-zipf", "--n", "10", "--a", "1.5", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("key,prob"));
    let probs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 10);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn gen_zipf_json_and_noise() {
    let o = run(&["gen-zipf", "--n", "8", "--a", "1", "--noise", "adversarial", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    // Adversarial predictions reverse the ranks.
    assert!(rows[0]["prob"].as_f64().unwrap() < rows[7]["prob"].as_f64().unwrap());
}

#[test]
fn config_errors_exit_1() {
    assert_eq!(code(&run(&["gen-zipf", "--a", "1"])), 1);
    assert_eq!(code(&run(&["gen-zipf", "--n", "5", "--a", "-1"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["bench-skiplist", "--n", "64"])), 1, "missing zipf_a");
    assert_eq!(code(&run(&["bench-skiplist", "--zipf-a", "1", "--trials", "0"])), 1);
    assert_eq!(code(&run(&["bench-skiplist", "--zipf-a", "1", "--format", "xml"])), 1);
    assert_eq!(code(&run(&["bench-kdtree", "--experiment", "skiplist-zipf", "--zipf-a", "1"])), 1);
    assert_eq!(code(&run(&["bench-skiplist", "--zipf-a", "1", "--set", "bogus_key=3"])), 1);
    assert_eq!(code(&run(&["bench-robustness", "--windows", "nonsense"])), 1);
}

#[test]
fn io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(code(&run(&["bench-skiplist", "--config", p(&missing)])), 2);
    assert_eq!(code(&run(&["analyze-trace", "--trace", p(&missing)])), 2);
    assert_eq!(code(&run(&["bin-points", "--input", p(&missing)])), 2);
    let o = run(&[
        "bench-skiplist",
        "--experiment",
        "skiplist-trace",
        "--trace",
        p(&missing),
        "--trials",
        "1",
    ]);
    assert_eq!(code(&o), 2);
    let bad_out = dir.path().join("no/such/dir/out.json");
    let o = run(&["bench-skiplist", "--n", "32", "--queries", "100", "--zipf-a", "1", "--trials", "1", "--out", p(&bad_out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["gen-zipf", "bench-skiplist", "bench-kdtree", "bench-robustness", "analyze-trace", "bin-points"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
}

#[test]
fn bench_skiplist_json_report_is_reproducible() {
    let args = ["bench-skiplist", "--n", "512", "--queries", "5000", "--zipf-a", "1.5", "--trials", "3", "--seed", "7"];
    let a: serde_json::Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    assert_eq!(a["experiment"], "skiplist-zipf");
    assert_eq!(a["seeds"], serde_json::json!([7, 8, 9]));
    assert_eq!(a["trials"].as_array().unwrap().len(), 3);
    for key in ["mean_steps", "classic_mean_steps", "speedup"] {
        assert_eq!(a["aggregate"][key], b["aggregate"][key], "{key}");
    }
    let learned = a["aggregate"]["mean_steps"].as_f64().unwrap();
    let classic = a["aggregate"]["classic_mean_steps"].as_f64().unwrap();
    assert!(learned < classic, "learned {learned} classic {classic}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# skip list run\nn = 128\nzipf_a = 2\nquery_count = 500\ntrials = 5\n").unwrap();
    let o = run(&["bench-skiplist", "--config", p(&cfg), "--trials", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["n"], "128");
    assert_eq!(v["config"]["trials"], "2");
}

#[test]
fn bench_kdtree_csv_has_header_and_rows() {
    let o = run(&["bench-kdtree", "--n", "256", "--queries", "2000", "--zipf-a", "1.5", "--dim", "2", "--trials", "2", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("trial,seed,"));
    assert!(lines[0].contains("mean_depth"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn bench_robustness_reports_each_window() {
    let o = run(&["bench-robustness", "--n", "128", "--zipf-a", "1.2", "--trials", "1", "--windows", "2_2,3_3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let windows = v["trials"][0]["windows"].as_array().unwrap();
    assert_eq!(windows.len(), 2);
}

#[test]
fn bench_skiplist_replays_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("keys.txt");
    let body: String = (0..2000).map(|i| format!("k{}\n", if i % 3 == 0 { i % 50 } else { 1 })).collect();
    fs::write(&trace, body).unwrap();
    let o = run(&[
        "bench-skiplist",
        "--experiment",
        "skiplist-trace",
        "--trace",
        p(&trace),
        "--trace-format",
        "lines",
        "--trials",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["experiment"], "skiplist-trace");
}

#[test]
fn analyze_trace_matrix_is_symmetric_with_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    fs::write(&trace, "timestamp,key\n0,a\n5,b\n61,a\n62,c\n125,c\n").unwrap();
    let o = run(&["analyze-trace", "--trace", p(&trace)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m: Vec<Vec<f64>> = serde_json::from_value(v["matrix"].clone()).unwrap();
    assert_eq!(m.len(), 3);
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row[i], 1.0);
        for (j, &x) in row.iter().enumerate() {
            assert_eq!(x, m[j][i]);
        }
    }
    let o = run(&["analyze-trace", "--trace", p(&trace), "--format", "csv"]);
    assert!(stdout(&o).starts_with("window,minute0,minute1,minute2\n"));
}

#[test]
fn malformed_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    fs::write(&trace, "timestamp,key\nnot-a-number,a\n").unwrap();
    assert_eq!(code(&run(&["analyze-trace", "--trace", p(&trace)])), 2);
}

#[test]
fn bin_points_writes_point_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    let out = dir.path().join("bins.csv");
    fs::write(&input, "x,y,z\n1.5,2.5,3.5\n1.7,2.1,3.9\n30,40,50\n-0.5,0,0\n").unwrap();
    let o = run(&["bin-points", "--input", p(&input), "--resolution", "10", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,prob,is_data");
    assert_eq!(lines.len(), 4);
    let total: f64 = lines[1..].iter().map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}
