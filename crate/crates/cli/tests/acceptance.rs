//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Output;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use common::{bin, fixture, run_ok, top_k};
use rdexplain::adf::{propagate_affine, propagate_relu};
use rdexplain::discrete::{
    exact_rate_distortion, index_to_bits, min_relevant_input, BooleanClassifier, Fraction,
    DEFAULT_MAX_DIM,
};
use rdexplain::ordering::uniform_rates;
use rdexplain::testing::{
    planted_task, random_diagonal_reference, random_input, random_network, rng,
};
use rdexplain::{
    adf_distortion, evaluate_ordering, input_moments, optimize, ordering_from_scores,
    sample_obfuscation, Activation, AdfMode, AffineLayer, Covariance, EvalConfig, NeuralNetwork,
    OptimizerConfig, RelevanceScores,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

fn random_scores(r: &mut impl Rng, d: usize) -> RelevanceScores {
    RelevanceScores::new((0..d).map(|_| r.random::<f64>()).collect()).unwrap()
}

/// Mean and covariance of a Gaussian pushed through affine maps with a
/// dense covariance.
fn dense_affine(layer: &AffineLayer, mean: &[f64], cov: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (m, n) = (layer.output_dim(), layer.input_dim());
    let w = |i: usize, j: usize| layer.weights()[i * n + j];
    let mean = (0..m)
        .map(|i| (0..n).map(|j| w(i, j) * mean[j]).sum::<f64>() + layer.bias()[i])
        .collect();
    let wc: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..n)
                .map(|k| (0..n).map(|j| w(i, j) * cov[j][k]).sum())
                .collect()
        })
        .collect();
    let cov = (0..m)
        .map(|i| {
            (0..m)
                .map(|l| (0..n).map(|k| wc[i][k] * w(l, k)).sum())
                .collect()
        })
        .collect();
    (mean, cov)
}

fn affine_only(net: &NeuralNetwork) -> NeuralNetwork {
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            AffineLayer::new(
                l.output_dim(),
                l.input_dim(),
                l.weights().to_vec(),
                l.bias().to_vec(),
                Activation::Identity,
            )
            .unwrap()
        })
        .collect();
    NeuralNetwork::new(net.input_dim(), net.output_index(), layers).unwrap()
}

fn affine_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1001);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let d = r.random_range(1..=32);
        let hidden: Vec<usize> = (0..r.random_range(0..=2))
            .map(|_| r.random_range(1..=24))
            .collect();
        let outputs = r.random_range(1..=4);
        let net = affine_only(&random_network(&mut r, d, &hidden, outputs));
        let reference = random_diagonal_reference(&mut r, d);
        let x = random_input(&mut r, d);
        let s = random_scores(&mut r, d);
        let sv = s.as_slice();
        let Covariance::Diagonal(var) = reference.covariance() else {
            unreachable!()
        };
        let mut mean: Vec<f64> = (0..d)
            .map(|i| sv[i] * x[i] + (1.0 - sv[i]) * reference.mean()[i])
            .collect();
        let mut cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i == j {
                            (1.0 - sv[i]).powi(2) * var[i]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for layer in net.layers() {
            (mean, cov) = dense_affine(layer, &mean, &cov);
        }
        let k = net.output_index();
        for mode in [AdfMode::Diagonal, AdfMode::LowRank] {
            let rep = adf_distortion(&net, &reference, &x, &s, mode).unwrap();
            let e = rel_err(rep.output_mean, mean[k]).max(rel_err(rep.output_variance, cov[k][k]));
            ensure!(e < 1e-10, "trial {trial} {mode:?}: relative error {e:e}");
            worst = worst.max(e);
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "20 nets, both modes, max rel err {worst:.1e}, {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h))
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Rectified-Gaussian moments by quadrature on each side of the kink.
fn rectified_by_quadrature(mu: f64, sd: f64) -> (f64, f64) {
    let density = |z: f64| {
        let t = (z - mu) / sd;
        (-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let (lo, hi) = (mu - 16.0 * sd, mu + 16.0 * sd);
    let n = 40_000;
    let mean = simpson(|z| z * density(z), lo.max(0.0), hi.max(0.0), n);
    let below = simpson(density, lo, hi.min(0.0), n);
    let var = mean * mean * below
        + simpson(
            |z| (z - mean).powi(2) * density(z),
            lo.max(0.0),
            hi.max(0.0),
            n,
        );
    (mean, var)
}

fn one_relu_exactness() -> Outcome {
    let unit = rdexplain::MomentState {
        mean: vec![0.0],
        covariance: rdexplain::reference::StateCovariance::Diagonal(vec![1.0]),
    };
    let out = propagate_relu(&unit);
    let want_mean = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let want_var = 0.5 - 1.0 / (2.0 * std::f64::consts::PI);
    ensure!(
        rel_err(out.mean[0], want_mean) < 1e-10 && rel_err(out.variances()[0], want_var) < 1e-10,
        "standard normal: {} / {}",
        out.mean[0],
        out.variances()[0]
    );
    ensure!(
        (out.mean[0] - 0.39894228).abs() < 5e-9,
        "mean {}",
        out.mean[0]
    );

    let mut r = rng(1002);
    let n = 100_000;
    let (mut worst_exact, mut worst_z): (f64, f64) = (0.0, 0.0);
    let (mut units, mut sparse) = (0, 0);
    for trial in 0..5u64 {
        let d = r.random_range(2..=10);
        let h = r.random_range(1..=8);
        let net = random_network(&mut r, d, &[h], 1);
        let reference = random_diagonal_reference(&mut r, d);
        let x = random_input(&mut r, d);
        let s = random_scores(&mut r, d);
        let layer = &net.layers()[0];
        let pre = propagate_affine(&input_moments(&reference, &x, &s).unwrap(), layer).unwrap();
        let pre_var = pre.variances();
        let post = propagate_relu(&pre);
        let post_var = post.variances();
        let ys = sample_obfuscation(&reference, &x, &s, n, 2000 + trial).unwrap();
        let acts: Vec<Vec<f64>> = (0..n).map(|j| layer.apply(ys.row(j))).collect();
        for i in 0..h {
            let (m, v) = rectified_by_quadrature(pre.mean[i], pre_var[i].sqrt());
            let e = rel_err(post.mean[i], m).max(rel_err(post_var[i], v));
            ensure!(
                e < 1e-10,
                "trial {trial} unit {i}: closed form vs quadrature {e:e}"
            );
            worst_exact = worst_exact.max(e);

            let col: Vec<f64> = acts.iter().map(|a| a[i]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let c2 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let c4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
            let se_mean = (c2 / n as f64).sqrt();
            let se_var = ((c4 - c2 * c2) / n as f64).sqrt();
            let active = col.iter().filter(|v| **v > 0.0).count();
            if active < 30 {
                // Too few positive draws for a standard error; the model
                // must then also predict a nearly dead unit.
                let p_active = rdexplain::adf::std_normal_cdf(pre.mean[i] / pre_var[i].sqrt());
                ensure!(
                    p_active * (n as f64) < 60.0,
                    "trial {trial} unit {i}: {active} active draws, model {p_active}"
                );
                sparse += 1;
                continue;
            }
            let z = ((post.mean[i] - mean).abs() / se_mean).max((post_var[i] - c2).abs() / se_var);
            ensure!(
                z <= 4.0,
                "trial {trial} unit {i}: {z:.2} standard errors from the sample moments"
            );
            worst_z = worst_z.max(z);
            units += 1;
        }
    }
    Ok(format!(
        "N(0,1) -> {:.8} / {:.8}; closed forms vs quadrature {worst_exact:.1e}; {units} units within {worst_z:.2} SE of 1e5 samples, {sparse} nearly dead units agree",
        out.mean[0],
        out.variances()[0]
    ))
}

fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn mc_diagnostic() -> Outcome {
    let baseline: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("mc_check_baseline.json")).unwrap())
            .unwrap();
    let mut lines = Vec::new();
    for mode in ["diag", "lowrank"] {
        let out = run_bin(&["mc-check", "--mode", mode]);
        ensure!(
            out.status.success(),
            "mc-check --mode {mode} exited {:?}",
            out.status.code()
        );
        let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let results = v["results"].as_array().ok_or("no results")?;
        ensure!(results.len() == 20, "{} results", results.len());
        ensure!(
            results
                .iter()
                .all(|r| r["rel_err"].as_f64().is_some_and(f64::is_finite)),
            "non-finite relative error"
        );
        let median = v["median_rel_err"].as_f64().ok_or("no median")?;
        let recorded = baseline["median_rel_err"][mode]
            .as_f64()
            .ok_or("no baseline")?;
        ensure!(
            median <= recorded * (1.0 + 1e-6),
            "{mode}: median {median} regressed past recorded {recorded}"
        );
        lines.push(format!(
            "{mode} median {median:.4} (recorded {recorded:.4})"
        ));
    }
    Ok(format!("20 nets each, {}", lines.join(", ")))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let out = run_bin(&[
        "grad-check",
        "--random",
        "10",
        "--step",
        "1e-5",
        "--tol",
        "1e-4",
    ]);
    let elapsed = start.elapsed();
    ensure!(
        out.status.success(),
        "grad-check exited {:?}",
        out.status.code()
    );
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let max = v["max_rel_err"].as_f64().ok_or("no max_rel_err")?;
    ensure!(v["instances"] == 10, "instances {}", v["instances"]);
    ensure!(max < 1e-4, "max rel err {max:e}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{} comparisons on 10 instances, max rel err {max:.1e}, {:.2} s",
        v["checked"],
        elapsed.as_secs_f64()
    ))
}

fn planted_recovery() -> Outcome {
    let (d, k, trials) = (20, 3, 20u64);
    let mut r = rng(1005);
    let mut recovered = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let task = planted_task(&mut r, d, k);
        let config = OptimizerConfig {
            lambda: 0.1,
            ..Default::default()
        };
        let (s, _) = optimize(&task.net, &task.reference, &task.x, &config).unwrap();
        if top_k(s.as_slice(), k) != task.support {
            continue;
        }
        recovered += 1;
        let eval = EvalConfig {
            rates: uniform_rates(d + 1),
            ..EvalConfig::new(d, trial)
        };
        let order = ordering_from_scores(s.as_slice(), trial);
        let curve = evaluate_ordering(&task.net, &task.reference, &task.x, &order, &eval).unwrap();
        let at = curve.points[k].distortion;
        ensure!(at < 1e-8, "trial {trial}: distortion {at:e} at rate 3/20");
        worst = worst.max(at);
    }
    ensure!(
        recovered * 5 >= trials * 4,
        "recovered {recovered}/{trials}"
    );
    Ok(format!(
        "recovered {recovered}/{trials}, max distortion at rate 3/20 {worst:.1e}"
    ))
}

fn oracle_k(table: &str, x: &str, delta: &str) -> Result<u64, String> {
    let v = run_ok(&["oracle", "--table", table, "--x", x, "--delta", delta]);
    v["k_star"].as_u64().ok_or_else(|| "no k_star".into())
}

fn discrete_oracle() -> Outcome {
    let start = Instant::now();
    let and2 = fixture("and2.txt");
    let or3 = fixture("or3.txt");
    ensure!(oracle_k(&and2, "11", "1/2")? == 1, "AND2 at 1/2");
    ensure!(oracle_k(&and2, "11", "3/4")? == 2, "AND2 at 3/4");
    ensure!(oracle_k(&or3, "100", "1")? == 1, "OR3 at 1");
    let constant = BooleanClassifier::from_fn(3, |_| true).unwrap();
    let sol = min_relevant_input(
        &constant,
        &[false, true, false],
        Fraction::new(1, 1),
        DEFAULT_MAX_DIM,
    )
    .unwrap();
    ensure!(sol.min_size == 0, "constant classifier");

    let mut r = rng(1006);
    let deltas = [
        Fraction::new(1, 2),
        Fraction::new(3, 4),
        Fraction::new(9, 10),
        Fraction::new(1, 1),
    ];
    let eps: Vec<Fraction> = (0..=10).map(|k| Fraction::new(k, 20)).collect();
    for instance in 0..50 {
        let d = r.random_range(1..=10);
        let net = random_network(&mut r, d, &[8, 4], 1);
        // Forward passes give the truth table independently of the
        // thresholded path.
        let outs: Vec<f64> = (0..1usize << d)
            .map(|i| {
                let y: Vec<f64> = index_to_bits(i, d)
                    .iter()
                    .map(|&b| f64::from(u8::from(b)))
                    .collect();
                net.forward(&y).unwrap()
            })
            .collect();
        let table =
            BooleanClassifier::truth_table(d, outs.iter().map(|v| *v >= 0.5).collect()).unwrap();
        let thresholded = BooleanClassifier::thresholded(net);
        let x: Vec<bool> = (0..d).map(|_| r.random()).collect();
        for &delta in &deltas {
            let a = min_relevant_input(&table, &x, delta, DEFAULT_MAX_DIM).unwrap();
            let b = min_relevant_input(&thresholded, &x, delta, DEFAULT_MAX_DIM).unwrap();
            ensure!(a == b, "instance {instance}: paths disagree at {delta}");
        }
        let rd_a = exact_rate_distortion(&table, &x, &eps).unwrap();
        let rd_b = exact_rate_distortion(&thresholded, &x, &eps).unwrap();
        ensure!(rd_a == rd_b, "instance {instance}: rate-distortion differs");
        ensure!(
            rd_a.points.windows(2).all(|w| w[1].rate <= w[0].rate),
            "instance {instance}: rate increases with epsilon"
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "4 hand cases, 50 instances agree, monotone, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn ordering_sanity() -> Outcome {
    let d = 20;
    let seeds = 20u64;
    let mut diffs = Vec::new();
    for seed in 0..seeds {
        let task = planted_task(&mut rng(3000 + seed), d, 3);
        let config = OptimizerConfig {
            lambda: 0.1,
            ..Default::default()
        };
        let (s, _) = optimize(&task.net, &task.reference, &task.x, &config).unwrap();
        let eval = EvalConfig::new(d, seed);
        let informed = evaluate_ordering(
            &task.net,
            &task.reference,
            &task.x,
            &ordering_from_scores(s.as_slice(), seed),
            &eval,
        )
        .unwrap();
        let random = evaluate_ordering(
            &task.net,
            &task.reference,
            &task.x,
            &ordering_from_scores(&vec![0.0; d], seed),
            &eval,
        )
        .unwrap();
        for curve in [&informed, &random] {
            let last = curve.points.last().unwrap();
            ensure!(
                last.rate == 1.0 && last.distortion == 0.0,
                "seed {seed}: rate-1 distortion {}",
                last.distortion
            );
        }
        diffs.push(random.auc() - informed.auc());
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    ensure!(mean > 4.0 * se, "AUC gap {mean} with standard error {se}");
    Ok(format!(
        "AUC gap {mean:.4} = {:.1} standard errors over {seeds} seeds; rate-1 distortion 0",
        mean / se
    ))
}

/// Runs one subcommand in a fresh directory and returns its stdout and the
/// bytes of every file it wrote.
fn snapshot(
    args: &[&str],
    threads: &str,
    inputs: &[(&str, &Path)],
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, src) in inputs {
        std::fs::copy(src, dir.path().join(name)).map_err(|e| e.to_string())?;
    }
    let out = bin()
        .current_dir(dir.path())
        .args(["--threads", threads])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let mut files = vec![("<stdout>".to_string(), out.stdout)];
    let mut names: Vec<_> = std::fs::read_dir(dir.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !inputs.iter().any(|(i, _)| i == n))
        .collect();
    names.sort();
    for name in names {
        let bytes = std::fs::read(dir.path().join(&name)).map_err(|e| e.to_string())?;
        files.push((name, bytes));
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let fx = |n: &str| std::path::PathBuf::from(fixture(n));
    let (net, stats, input, data, ramp, and2) = (
        fx("planted_net.json"),
        fx("planted_stats.json"),
        fx("planted_input.csv"),
        fx("reference_data.csv"),
        fx("ramp_map.csv"),
        fx("and2.txt"),
    );
    let problem = [
        ("net.json", net.as_path()),
        ("stats.json", stats.as_path()),
        ("input.csv", input.as_path()),
    ];
    let with_map: Vec<(&str, &Path)> = problem
        .iter()
        .copied()
        .chain([("map.csv", ramp.as_path())])
        .collect();
    let p = [
        "--network",
        "net.json",
        "--stats",
        "stats.json",
        "--input",
        "input.csv",
    ];
    let cat = |a: &[&str], b: &[&'static str]| -> Vec<String> {
        a.iter().chain(b).map(|s| s.to_string()).collect()
    };
    let cases: Vec<(&str, Vec<String>, Vec<(&str, &Path)>)> = vec![
        (
            "estimate diag",
            cat(&["estimate", "data.csv", "-o", "stats.json"], &[]),
            vec![("data.csv", data.as_path())],
        ),
        (
            "estimate lowrank",
            cat(
                &[
                    "estimate",
                    "data.csv",
                    "--mode",
                    "lowrank",
                    "--rank",
                    "5",
                    "-o",
                    "stats.json",
                ],
                &[],
            ),
            vec![("data.csv", data.as_path())],
        ),
        (
            "explain",
            cat(&["explain"], &p)
                .into_iter()
                .chain(cat(
                    &["--lambda", "0.1", "-o", "maps.json", "--trace", "trace.csv"],
                    &[],
                ))
                .collect(),
            problem.to_vec(),
        ),
        (
            "explain single row",
            cat(&["explain"], &p)
                .into_iter()
                .chain(cat(&["--row", "1", "--csv", "map.csv"], &[]))
                .collect(),
            problem.to_vec(),
        ),
        (
            "grad-check",
            cat(&["grad-check", "--random", "6"], &[]),
            vec![],
        ),
        (
            "grad-check on files",
            cat(&["grad-check"], &p),
            problem.to_vec(),
        ),
        (
            "mc-check",
            cat(&["mc-check", "--random", "8", "--samples", "20000"], &[]),
            vec![],
        ),
        (
            "mc-check on files",
            cat(&["mc-check"], &p)
                .into_iter()
                .chain(cat(&["--samples", "20000", "--scores", "map.csv"], &[]))
                .collect(),
            with_map.clone(),
        ),
        (
            "oracle",
            cat(
                &[
                    "oracle",
                    "--table",
                    "and2.txt",
                    "--x",
                    "11",
                    "--delta",
                    "3/4",
                    "--epsilons",
                    "0,1/8,1/4",
                ],
                &[],
            ),
            vec![("and2.txt", and2.as_path())],
        ),
        (
            "oracle network",
            cat(
                &[
                    "oracle",
                    "--network",
                    "net.json",
                    "--x",
                    "10110011100011110000",
                    "--delta",
                    "1/2",
                    "--max-dim",
                    "20",
                ],
                &[],
            ),
            problem.to_vec(),
        ),
        (
            "rd-curve random",
            cat(&["rd-curve"], &p)
                .into_iter()
                .chain(cat(&["--samples", "128", "-o", "curve.csv"], &[]))
                .collect(),
            problem.to_vec(),
        ),
        (
            "rd-curve maps",
            cat(&["rd-curve"], &p)
                .into_iter()
                .chain(cat(
                    &["--maps", "map.csv", "--seed", "3", "-o", "curve.csv"],
                    &[],
                ))
                .collect(),
            with_map.clone(),
        ),
        (
            "render",
            cat(
                &[
                    "render", "--map", "map.csv", "--width", "5", "--height", "4", "-o", "map.pgm",
                ],
                &[],
            ),
            with_map.clone(),
        ),
    ];
    let mut compared = 0;
    for (name, args, inputs) in &cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let first = snapshot(&args, "1", inputs)?;
        let again = snapshot(&args, "1", inputs)?;
        let wide = snapshot(&args, "4", inputs)?;
        ensure!(first == again, "{name}: two runs differ");
        ensure!(first == wide, "{name}: 1 and 4 threads differ");
        compared += first.len();
    }
    Ok(format!(
        "{} invocations, {compared} outputs identical across runs and thread counts",
        cases.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("affine exactness", affine_exactness),
        ("one-ReLU exactness", one_relu_exactness),
        ("deep-net ADF diagnostic", mc_diagnostic),
        ("gradient correctness", gradient_check),
        ("planted-relevance recovery", planted_recovery),
        ("discrete oracle", discrete_oracle),
        ("ordering-test sanity", ordering_sanity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
