#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdexplain::io::relevance_csv;
use rdexplain::rng::derive_seed;
use rdexplain::testing::{planted_task, rng, PlantedTask};
use rdexplain::{optimize, sample_obfuscation, OptimizerConfig, RelevanceScores};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdexplain"))
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

/// Runs the binary and returns its output.
pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Runs the binary, requires exit code 0 and parses the stdout verdict.
pub fn run_ok(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub const PLANTED_DIM: usize = 20;
pub const PLANTED_SUPPORT: usize = 3;
pub const PLANTED_LAMBDA: f64 = 0.1;

/// The first planted task (by seed) whose support the optimizer recovers at
/// the planted λ, with its seed.
pub fn planted_fixture() -> (u64, PlantedTask) {
    (0..)
        .map(|seed| {
            (
                seed,
                planted_task(&mut rng(seed), PLANTED_DIM, PLANTED_SUPPORT),
            )
        })
        .find(|(_, task)| {
            let config = OptimizerConfig {
                lambda: PLANTED_LAMBDA,
                ..Default::default()
            };
            let (s, _) = optimize(&task.net, &task.reference, &task.x, &config).unwrap();
            top_k(s.as_slice(), PLANTED_SUPPORT) == task.support
        })
        .unwrap()
}

pub fn top_k(s: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut top = idx[..k].to_vec();
    top.sort_unstable();
    top
}

fn csv_rows(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect()
}

/// Every bundled fixture file with its expected contents.
pub fn fixture_files() -> Vec<(&'static str, Vec<u8>)> {
    let (seed, task) = planted_fixture();
    let d = PLANTED_DIM;
    // A second input row: the first one with the irrelevant components
    // redrawn, which leaves the score unchanged.
    let noise = sample_obfuscation(
        &task.reference,
        &task.x,
        &RelevanceScores::constant(d, 0.0).unwrap(),
        1,
        derive_seed(seed, 1),
    )
    .unwrap();
    let second: Vec<f64> = (0..d)
        .map(|i| {
            if task.support.contains(&i) {
                task.x[i]
            } else {
                noise.get(0, i)
            }
        })
        .collect();
    let data = sample_obfuscation(
        &task.reference,
        &task.x,
        &RelevanceScores::constant(d, 0.0).unwrap(),
        100,
        derive_seed(seed, 2),
    )
    .unwrap();
    let mut half = vec![0.0; d];
    for (i, v) in half.iter_mut().enumerate() {
        *v = i as f64 / (d - 1) as f64;
    }
    vec![
        ("planted_net.json", task.net.to_json()),
        ("planted_stats.json", task.reference.to_json()),
        (
            "planted_input.csv",
            csv_rows(&[task.x.clone(), second]).into_bytes(),
        ),
        (
            "planted_support.json",
            format!(
                "{{\"seed\":{seed},\"lambda\":{PLANTED_LAMBDA},\"support\":{:?}}}\n",
                task.support
            )
            .into_bytes(),
        ),
        ("reference_data.csv", csv_rows(&data.to_rows()).into_bytes()),
        ("ramp_map.csv", relevance_csv(&half).into_bytes()),
        ("and2.txt", b"2\n0001\n".to_vec()),
        ("or3.txt", b"3\n01111111\n".to_vec()),
    ]
}
