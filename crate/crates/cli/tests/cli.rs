use std::path::Path;
use std::process::{Command, Output};

use odl_cli::input::parse_sample;
use serde_json::Value;

fn odl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odl"))
        .args(args)
        .env_remove("ODL_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = odl(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).expect("valid JSON")
}

#[test]
fn leukemia_report_shows_recomputed_and_published_values() {
    let text = ok(&["test", "--fixture", "leukemia", "--alpha", "0.05"]);
    assert!(text.contains("-0.871605"), "{text}");
    assert!(text.contains("-3.615245"), "{text}");
    assert!(text.contains("-0.375242"), "{text}");
    assert!(text.contains("reject H0 at alpha=0.05"));
}

#[test]
fn normal_mode_warns_on_stderr() {
    let o = odl(&["test", "--values", "1 2 3"]);
    assert!(o.status.success());
    assert!(stderr(&o).starts_with("warning:"));
    let o = odl(&[
        "test",
        "--values",
        "1 2 3",
        "--mode",
        "calibrated",
        "--calibration-replicates",
        "2000",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).is_empty());
}

#[test]
fn constant_sample_gives_minus_one_third() {
    let v = json(&["test", "--values", "1 1 1 1", "--format", "json"]);
    let d = v["delta_cap"].as_f64().unwrap();
    assert!((d + 1.0 / 3.0).abs() < 1e-14, "{d}");
    assert_eq!(v["normal_approx"]["mode"], "normal_approx");
    assert!(v["calibrated"].is_null());
}

#[test]
fn usage_and_input_errors_exit_2() {
    for args in [
        vec!["test", "--alpha", "1.5", "--values", "1 2"],
        vec!["test", "--values", "1"],
        vec!["test", "--values", "1, -2"],
        vec!["test", "--values", "1 x"],
        vec!["test"],
        vec!["test", "--input", "/nonexistent/sample.txt"],
        vec!["power", "--family", "cauchy", "--theta", "1", "--n", "10"],
        vec![
            "simulate",
            "--v-plus",
            "-1",
            "--v-minus",
            "1",
            "--lambda-plus",
            "1",
            "--lambda-minus",
            "1",
            "--t-end",
            "1",
        ],
        vec!["check-odl", "--dist", "weibull", "--theta", "0"],
        vec![
            "power",
            "--family",
            "gamma",
            "--theta",
            "1",
            "--n",
            "10",
            "--workers",
            "0",
        ],
    ] {
        let o = odl(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn parse_errors_are_distinct() {
    let a = stderr(&odl(&["test", "--values", "1, -2"]));
    let b = stderr(&odl(&["test", "--values", "1 2\n3 x"]));
    let c = stderr(&odl(&["test", "--values", "# c\n4"]));
    assert!(
        a.contains("position 2") && a.contains("not positive"),
        "{a}"
    );
    assert!(b.contains("line 2, column 3"), "{b}");
    assert!(c.contains("at least 2"), "{c}");
}

#[test]
fn decision_is_not_in_exit_code() {
    // One rejects, one does not; both exit 0.
    let reject = json(&["test", "--values", &"5 ".repeat(100), "--format", "json"]);
    let keep = json(&["test", "--values", "1 2", "--format", "json"]);
    assert_eq!(reject["normal_approx"]["reject"], true);
    assert_eq!(keep["normal_approx"]["reject"], false);
}

#[test]
fn sample_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.tsv");
    let values = "0.125 3e-5, 1852\n# skipped\n7.000000000000001";
    ok(&[
        "test",
        "--values",
        values,
        "--dump-sample",
        path.to_str().unwrap(),
    ]);
    let back = parse_sample(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, parse_sample(values).unwrap());
}

#[test]
fn reads_sample_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    std::fs::write(&path, "115\n181\n# comment\n255\n").unwrap();
    let v = json(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["n"], 3);
}

#[test]
fn power_table_layout_and_determinism() {
    let args = [
        "power",
        "--family",
        "gamma",
        "--theta",
        "1,2,3",
        "--n",
        "10,20,30",
        "--replicates",
        "2000",
        "--seed",
        "42",
    ];
    let text = ok(&args);
    let header = text.lines().find(|l| l.starts_with("family")).unwrap();
    assert!(header.contains("n=10") && header.contains("n=20") && header.contains("n=30"));
    assert_eq!(
        text.lines()
            .filter(|l| l.trim_start().starts_with(['1', '2', '3']) || l.starts_with("gamma"))
            .count(),
        3
    );
    assert_eq!(text, ok(&args));

    let mut one = args.to_vec();
    one.extend(["--workers", "1", "--format", "tsv"]);
    let mut eight = args.to_vec();
    eight.extend(["--workers", "8", "--format", "tsv"]);
    let tsv = ok(&one);
    assert_eq!(tsv, ok(&eight));
    assert_eq!(tsv.lines().count(), 10);
    assert!(tsv.lines().all(|l| l.split('\t').count() == 9));
}

#[test]
fn workers_env_is_honoured() {
    let o = Command::new(env!("CARGO_BIN_EXE_odl"))
        .args([
            "power",
            "--family",
            "lfr",
            "--theta",
            "2",
            "--n",
            "10",
            "--replicates",
            "1000",
        ])
        .env("ODL_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibration_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cal.tsv");
    let p = path.to_str().unwrap();
    ok(&[
        "calibrate",
        "--n",
        "10,40",
        "--replicates",
        "4000",
        "--seed",
        "3",
        "--format",
        "tsv",
        "--out",
        p,
    ]);
    let with_file = json(&[
        "test",
        "--fixture",
        "leukemia",
        "--mode",
        "calibrated",
        "--calibration",
        p,
        "--format",
        "json",
    ]);
    let computed = json(&[
        "test",
        "--fixture",
        "leukemia",
        "--mode",
        "calibrated",
        "--calibration-replicates",
        "4000",
        "--seed",
        "3",
        "--format",
        "json",
    ]);
    assert_eq!(with_file["calibrated"], computed["calibrated"]);

    let power = json(&[
        "power",
        "--family",
        "weibull",
        "--theta",
        "1",
        "--n",
        "10,25,40",
        "--replicates",
        "1000",
        "--mode",
        "calibrated",
        "--calibration",
        p,
        "--format",
        "json",
    ]);
    assert_eq!(power["rows"].as_array().unwrap().len(), 3);
    let missing = odl(&[
        "power",
        "--family",
        "weibull",
        "--theta",
        "1",
        "--n",
        "50",
        "--replicates",
        "1000",
        "--mode",
        "calibrated",
        "--calibration",
        p,
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_summary_and_tsv() {
    let args = [
        "simulate",
        "--v-plus",
        "1",
        "--v-minus",
        "1",
        "--lambda-plus",
        "2",
        "--lambda-minus",
        "1",
        "--t-end",
        "100",
        "--seed",
        "7",
    ];
    let text = ok(&args);
    assert!(text.contains("# drift V = -0.3333333333333333"), "{text}");
    assert!(text.contains("Lambda = 1\n"), "{text}");
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "time\tstate\tage");
    assert!(rows[1..].iter().all(|r| r.split('\t').count() == 3));
    assert_eq!(text, ok(&args));
    let mut j = args.to_vec();
    j.extend(["--format", "json"]);
    let v = json(&j);
    assert_eq!(v["class"], "ODL");
    assert_eq!(v["steady_state_mean"], 1.0);
}

#[test]
fn check_odl_verdicts() {
    let text = ok(&["check-odl", "--dist", "weibull", "--theta", "0.5"]);
    assert!(text.contains("verdict      violated"), "{text}");
    assert_eq!(
        json(&[
            "check-odl",
            "--dist",
            "weibull",
            "--theta",
            "2",
            "--format",
            "json"
        ])["verdict"],
        "odl"
    );
    assert_eq!(
        json(&[
            "check-odl",
            "--dist",
            "exponential",
            "--theta",
            "1",
            "--format",
            "json"
        ])["verdict"],
        "boundary"
    );
    let tsv = ok(&[
        "check-odl",
        "--dist",
        "gamma",
        "--theta",
        "2",
        "--format",
        "tsv",
        "--points",
        "10",
    ]);
    assert_eq!(tsv.lines().count(), 11);
}

#[test]
fn every_subcommand_emits_json() {
    for args in [
        vec!["test", "--values", "1 2 3"],
        vec![
            "power",
            "--family",
            "lfr",
            "--theta",
            "1",
            "--n",
            "10",
            "--replicates",
            "1000",
        ],
        vec![
            "simulate",
            "--v-plus",
            "2",
            "--v-minus",
            "1",
            "--lambda-plus",
            "1",
            "--lambda-minus",
            "1",
            "--t-end",
            "5",
        ],
        vec!["calibrate", "--n", "5", "--replicates", "1000"],
        vec![
            "check-odl",
            "--dist",
            "lfr",
            "--theta",
            "1",
            "--points",
            "5",
        ],
    ] {
        let mut a = args.clone();
        a.extend(["--format", "json"]);
        json(&a);
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let o = odl(&[
        "check-odl",
        "--dist",
        "gamma",
        "--theta",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(Path::new(&path).exists());
}
