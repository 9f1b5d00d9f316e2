mod common;

use common::{fixture, run, run_ok, top_k, PLANTED_SUPPORT};
use serde_json::Value;

fn support() -> Vec<usize> {
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("planted_support.json")).unwrap())
            .unwrap();
    serde_json::from_value(v["support"].clone()).unwrap()
}

fn problem() -> Vec<String> {
    vec![
        "--network".into(),
        fixture("planted_net.json"),
        "--stats".into(),
        fixture("planted_stats.json"),
        "--input".into(),
        fixture("planted_input.csv"),
    ]
}

fn with_problem(head: &[&str], tail: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    args.extend(problem());
    args.extend(tail.iter().map(|s| s.to_string()));
    args
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn estimate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let data = fixture("reference_data.csv");
    let v = run_ok(&[
        "estimate",
        &data,
        "--mode",
        "lowrank",
        "--rank",
        "4",
        "-o",
        a.to_str().unwrap(),
    ]);
    assert_eq!(v["covariance"], "lowrank");
    assert_eq!(v["rank"], 4);
    assert_eq!(v["samples"], 100);
    run_ok(&[
        "estimate",
        &data,
        "--mode",
        "lowrank",
        "--rank",
        "4",
        "-o",
        b.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn estimate_reduces_excess_rank_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("small.csv");
    std::fs::write(&data, "1,2,3\n2,2,1\n0,1,5\n").unwrap();
    let out_path = dir.path().join("s.json");
    let out = run(&[
        "estimate",
        data.to_str().unwrap(),
        "--mode",
        "lowrank",
        "--rank",
        "10",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rank"], 2);
    assert_eq!(v["requested_rank"], 10);
    assert!(std::fs::read_to_string(&out_path)
        .unwrap()
        .contains("requested"));
}

#[test]
fn explain_recovers_planted_support() {
    let args = with_problem(&["explain"], &["--lambda", "0.1"]);
    let v = run_ok(&strs(&args));
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let s: Vec<f64> = serde_json::from_value(r["s"].clone()).unwrap();
        assert_eq!(top_k(&s, PLANTED_SUPPORT), support());
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn explain_with_huge_lambda_gives_zero_map() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("map.csv");
    let trace = dir.path().join("trace.csv");
    let args = with_problem(
        &["explain"],
        &[
            "--row",
            "0",
            "--lambda",
            "1e6",
            "--csv",
            csv.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ],
    );
    let v = run_ok(&strs(&args));
    let s: Vec<f64> = serde_json::from_value(v["results"][0]["s"].clone()).unwrap();
    assert!(s.iter().all(|x| *x == 0.0));
    let map = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(map.lines().count(), 21);
    assert!(std::fs::read_to_string(&trace)
        .unwrap()
        .starts_with("row,iteration,"));
}

#[test]
fn explain_config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"lambda": 1e6, "max_iters": 5}"#).unwrap();
    let args = with_problem(
        &["explain"],
        &["--row", "1", "--config", config.to_str().unwrap()],
    );
    let v = run_ok(&strs(&args));
    assert_eq!(v["lambda"], 1e6);
    assert!(v["results"][0]["iterations"].as_u64().unwrap() <= 5);
    let args = with_problem(
        &["explain"],
        &[
            "--row",
            "1",
            "--config",
            config.to_str().unwrap(),
            "--lambda",
            "0.25",
        ],
    );
    assert_eq!(run_ok(&strs(&args))["lambda"], 0.25);
}

#[test]
fn explain_rejects_negative_lambda() {
    let args = with_problem(&["explain"], &["--lambda=-1"]);
    assert_eq!(run(&strs(&args)).status.code(), Some(1));
}

#[test]
fn grad_check_on_fixture_passes() {
    let args = with_problem(&["grad-check"], &[]);
    let v = run_ok(&strs(&args));
    assert_eq!(v["instances"], 2);
    assert!(v["max_rel_err"].as_f64().unwrap() < 1e-4);
}

#[test]
fn grad_check_failure_exits_one() {
    let out = run(&["grad-check", "--random", "2", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn mc_check_median_guard() {
    let base = ["mc-check", "--random", "3", "--samples", "2000"];
    let v = run_ok(&base);
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
    let mut failing = base.to_vec();
    failing.extend(["--max-median", "0"]);
    assert_eq!(run(&failing).status.code(), Some(1));
}

#[test]
fn render_constant_half_map() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("m.csv");
    std::fs::write(&map, "0,0.5\n1,0.5\n2,0.5\n3,0.5\n").unwrap();
    let out = dir.path().join("m.pgm");
    run_ok(&[
        "render",
        "--map",
        map.to_str().unwrap(),
        "--width",
        "2",
        "--height",
        "2",
        "-o",
        out.to_str().unwrap(),
    ]);
    let bytes = std::fs::read(&out).unwrap();
    assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
    assert_eq!(&bytes[bytes.len() - 4..], &[128, 128, 128, 128]);
}

#[test]
fn render_wrong_size_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.pgm");
    let o = run(&[
        "render",
        "--map",
        &fixture("ramp_map.csv"),
        "--width",
        "3",
        "--height",
        "3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_and2() {
    let v = run_ok(&[
        "oracle",
        "--table",
        &fixture("and2.txt"),
        "--x",
        "11",
        "--delta",
        "3/4",
        "--epsilons",
        "0,1/4",
    ]);
    assert_eq!(v["k_star"], 2);
    assert_eq!(v["witness"], serde_json::json!([0, 1]));
    assert_eq!(v["achieved_probability"], "1/1");
    assert_eq!(
        v["min_distortion_by_size"],
        serde_json::json!(["3/8", "1/4", "0/1"])
    );
    let v = run_ok(&[
        "oracle",
        "--table",
        &fixture("and2.txt"),
        "--x",
        "11",
        "--delta",
        "0.5",
    ]);
    assert_eq!(v["k_star"], 1);
}

#[test]
fn oracle_dimension_mismatch_exits_one() {
    let out = run(&[
        "oracle",
        "--table",
        &fixture("and2.txt"),
        "--x",
        "111",
        "--delta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rd_curve_informed_beats_random() {
    let dir = tempfile::tempdir().unwrap();
    let maps = dir.path().join("maps.json");
    let args = with_problem(
        &["explain"],
        &["--lambda", "0.1", "-o", maps.to_str().unwrap()],
    );
    run_ok(&strs(&args));
    let curve = dir.path().join("curve.csv");
    let args = with_problem(
        &["rd-curve"],
        &[
            "--maps",
            maps.to_str().unwrap(),
            "--rates",
            "21",
            "-o",
            curve.to_str().unwrap(),
        ],
    );
    let informed = run_ok(&strs(&args));
    let points = informed["points"].as_array().unwrap();
    assert_eq!(points.len(), 21);
    assert!(points[PLANTED_SUPPORT]["distortion"].as_f64().unwrap() < 1e-8);
    assert_eq!(points[20]["distortion"], 0.0);
    assert_eq!(std::fs::read_to_string(&curve).unwrap().lines().count(), 22);

    let args = with_problem(&["rd-curve"], &["--rates", "21"]);
    let random = run_ok(&strs(&args));
    assert_eq!(random["ordering"], "random");
    assert!(informed["auc"].as_f64().unwrap() < random["auc"].as_f64().unwrap());
}

#[test]
fn malformed_network_reports_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"input_dim\": 2,\n  \"layers\": [\n}\n").unwrap();
    let args = [
        "explain",
        "--network",
        bad.to_str().unwrap(),
        "--stats",
        &fixture("planted_stats.json"),
        "--input",
        &fixture("planted_input.csv"),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn malformed_csv_and_missing_file_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = run(&[
        "estimate",
        bad.to_str().unwrap(),
        "-o",
        dir.path().join("s.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv"));

    let out = run(&[
        "render",
        "--map",
        "/nonexistent/map.csv",
        "--width",
        "1",
        "--height",
        "1",
        "-o",
        "x.pgm",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dimension_mismatch_exits_one() {
    let args = [
        "explain",
        "--network",
        &fixture("planted_net.json"),
        "--stats",
        &fixture("planted_stats.json"),
        "--input",
        &fixture("ramp_map.csv"),
    ];
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["explain"]).status.code(), Some(2));
    assert_eq!(
        run(&["grad-check", "--network", "n.json"]).status.code(),
        Some(2)
    );
}
