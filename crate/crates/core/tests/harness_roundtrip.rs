use std::path::Path;
use std::process::Command;

use jcpot::harness::config::{LambdaSpec, Method, RunConfig};
use jcpot::harness::io::{load_prediction_labels, source_file_name, TARGET_FILE, TRUTH_FILE};
use jcpot::harness::metrics::accuracy;
use jcpot::harness::{run_benchmark, write_report, Report};

fn small_config() -> RunConfig {
    let mut c = RunConfig {
        methods: Method::ALL.to_vec(),
        repetitions: 2,
        num_sources: vec![2, 3],
        seed: 11,
        ..Default::default()
    };
    c.generator.n_source = 60;
    c.generator.n_target = 50;
    c
}

#[test]
fn config_toml_round_trip() {
    let mut c = small_config();
    c.lambda = LambdaSpec::Explicit(vec![0.25, 0.75]);
    c.num_sources = vec![2];
    c.strict = true;
    let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
    assert_eq!(back, c);
    assert!(RunConfig::from_toml_str("no_such_key = 1").is_err());
}

#[test]
fn report_round_trip_and_recomputed_accuracy() {
    let report = run_benchmark(&small_config()).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert_eq!(report.entries.len(), 2 * Method::ALL.len());

    let dir = tempfile::tempdir().unwrap();
    write_report(dir.path(), &report).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back = Report::from_json(&text).unwrap();
    assert_eq!(
        back,
        Report {
            timings: Vec::new(),
            ..report.clone()
        }
    );
    assert!(dir.path().join("timings.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv, report.summary_csv());

    for e in &back.entries {
        let mut sum = 0.0;
        for r in &e.runs {
            let acc = accuracy(&r.predictions, &r.true_labels).unwrap();
            assert_eq!(acc, r.accuracy);
            sum += acc;
        }
        assert!((sum / e.runs.len() as f64 - e.mean_accuracy).abs() < 1e-12);
    }
}

#[test]
fn future_schema_is_rejected() {
    let report = run_benchmark(&RunConfig {
        repetitions: 1,
        num_sources: vec![1],
        ..small_config()
    })
    .unwrap();
    let text = report
        .to_json()
        .replace("\"schema_version\": 1", "\"schema_version\": 99");
    assert!(Report::from_json(&text).is_err());
}

fn cli<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_jcpot")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn cli_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, err) = cli(&[
        "gen",
        "--out",
        p(d),
        "--sources-count",
        "2",
        "--n-source",
        "80",
        "--n-target",
        "60",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0, "{err}");
    let s0 = d.join(source_file_name(0));
    let s1 = d.join(source_file_name(1));
    let target = d.join(TARGET_FILE);
    let truth = d.join(TRUTH_FILE);
    let data = ["--sources", p(&s0), p(&s1), "--target", p(&target)];
    let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
        head.iter().chain(&data).chain(tail).map(|s| s.to_string()).collect()
    };

    let preds = d.join("pred.csv");
    let (code, err) = cli(&with(&["adapt"], &["--method", "jcpot-lp", "--out", p(&preds)]));
    assert_eq!(code, 0, "{err}");
    let labels = load_prediction_labels(&preds).unwrap();
    assert_eq!(labels.len(), 60);

    let fit_out = d.join("fit.json");
    let (code, err) = cli(&with(&["fit"], &["--out", p(&fit_out)]));
    assert_eq!(code, 0, "{err}");
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit_out).unwrap()).unwrap();
    assert_eq!(fit["h_hat"].as_array().unwrap().len(), 2);

    // configuration errors
    assert_eq!(cli(&with(&["fit"], &["--lambda", "0.2,0.2,0.6"])).0, 2);
    assert_eq!(
        cli(&with(&["adapt"], &["--method", "target-only", "--out", p(&preds)])).0,
        2
    );
    // data errors
    let bad = d.join("bad.csv");
    std::fs::write(&bad, "f0,f1,label\n1.0,oops,0\n").unwrap();
    assert_eq!(cli(&["fit", "--sources", p(&bad), "--target", p(&target)]).0, 3);
    // numerical failure: kernel underflows
    assert_eq!(cli(&with(&["fit"], &["--epsilon", "1e-6"])).0, 4);
    // non-convergence only fails under --strict
    assert_eq!(cli(&with(&["fit"], &["--max-iter", "1", "--out", p(&fit_out)])).0, 0);
    assert_eq!(
        cli(&with(&["fit"], &["--max-iter", "1", "--strict", "--out", p(&fit_out)])).0,
        5
    );

    let bench_dir = d.join("bench");
    let (code, err) = cli(&with(
        &["bench"],
        &[
            "--target-truth",
            p(&truth),
            "--methods",
            "jcpot-lp,no-adapt",
            "--repetitions",
            "1",
            "--out",
            p(&bench_dir),
        ],
    ));
    assert_eq!(code, 0, "{err}");
    let report = Report::from_json(&std::fs::read_to_string(bench_dir.join("report.json")).unwrap()).unwrap();
    let jc = report.entry(2, Method::JcpotLp).unwrap();
    assert_eq!(jc.runs[0].predictions, labels);
}
