use rayon::prelude::*;
use serde_json::{json, Value};

use rdexplain::adf::native_mode;
use rdexplain::discrete::{
    exact_rate_distortion, min_relevant_input, parse_fraction, BooleanClassifier, Fraction,
};
use rdexplain::io::{
    read_relevance_maps, relevance_csv, render_pgm, ExplainOutput, ExplainedInput,
};
use rdexplain::ordering::{default_samples, uniform_rates};
use rdexplain::rde::default_lambda;
use rdexplain::{
    estimate_reference, evaluate_batch, optimize, Covariance, CovarianceMode, EvalConfig,
    OptimizerConfig,
};

use crate::files::{load_network, load_problem, load_vectors, write};
use crate::{
    CliResult, EstimateArgs, ExplainArgs, Failure, ModeArg, OracleArgs, RdCurveArgs, RenderArgs,
    Verdict,
};

fn fraction_string(f: &Fraction) -> String {
    format!("{}/{}", f.numer(), f.denom())
}

fn to_pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn estimate(a: &EstimateArgs) -> CliResult<Verdict> {
    let data = load_vectors(&a.data)?;
    let mode = match a.mode {
        ModeArg::Diag => CovarianceMode::Diagonal,
        ModeArg::Lowrank => CovarianceMode::LowRank(a.rank),
    };
    let est = estimate_reference(&data, mode)?;
    if let Some(r) = est.rank_reduction {
        eprintln!(
            "warning: rank {} exceeds min(d, N - 1); using rank {}",
            r.requested, r.used
        );
    }
    write(&a.out, est.reference.to_json_with(est.rank_reduction))?;
    let (kind, rank) = match est.reference.covariance() {
        Covariance::Diagonal(_) => ("diag", None),
        Covariance::LowRank(q) => ("lowrank", Some(q.cols())),
    };
    Ok(Verdict::ok(json!({
        "samples": data.len(),
        "dim": est.reference.dim(),
        "covariance": kind,
        "rank": rank,
        "requested_rank": est.rank_reduction.map(|r| r.requested),
    })))
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn optimizer_config(a: &ExplainArgs, defaults: OptimizerConfig) -> CliResult<OptimizerConfig> {
    let mut config = defaults;
    if let Some(path) = &a.config {
        let name = path.display();
        let bytes = std::fs::read(path).map_err(|e| Failure::usage(format!("{name}: {e}")))?;
        let patch: Value = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::usage(format!("{name}:{}: {e}", e.line())))?;
        let mut base = serde_json::to_value(config).expect("serializable config");
        merge(&mut base, patch);
        config =
            serde_json::from_value(base).map_err(|e| Failure::usage(format!("{name}: {e}")))?;
    }
    if let Some(l) = a.lambda {
        config.lambda = l;
    }
    if let Some(m) = a.mode {
        config.mode = m.into();
    }
    config.validate()?;
    Ok(config)
}

pub fn explain(a: &ExplainArgs) -> CliResult<Verdict> {
    let p = load_problem(&a.problem)?;
    let d = p.net.input_dim();
    let config = optimizer_config(
        a,
        OptimizerConfig {
            lambda: default_lambda(d),
            mode: native_mode(&p.reference),
            ..Default::default()
        },
    )?;
    if a.csv.is_some() && p.rows.len() != 1 {
        return Err(Failure::usage("--csv needs a single input row (use --row)"));
    }
    let runs = p
        .rows
        .par_iter()
        .map(|(row, x)| {
            optimize(&p.net, &p.reference, x, &config).map(|(s, trace)| (*row, s, trace))
        })
        .collect::<rdexplain::Result<Vec<_>>>()?;

    let mut trace_csv =
        String::from("row,iteration,objective,distortion,l1,step_size,backtracks\n");
    let mut results = Vec::with_capacity(runs.len());
    for (row, s, trace) in runs {
        for line in trace.to_csv().lines().skip(1) {
            trace_csv.push_str(&format!("{row},{line}\n"));
        }
        results.push(ExplainedInput {
            row,
            s: s.into_inner(),
            objective: trace.final_objective(),
            distortion: trace.final_report,
            iterations: trace.records.len() - 1,
            termination: trace.termination,
        });
    }
    if let Some(path) = &a.trace {
        write(path, &trace_csv)?;
    }
    if let Some(path) = &a.csv {
        write(path, relevance_csv(&results[0].s))?;
    }
    let output = ExplainOutput {
        lambda: config.lambda,
        mode: config.mode,
        results,
    };
    match &a.out {
        Some(path) => {
            write(path, to_pretty(&output))?;
            Ok(Verdict::ok(json!({
                "rows": output.results.len(),
                "lambda": output.lambda,
                "mode": output.mode,
                "seed": a.seed,
                "objectives": output.results.iter().map(|r| r.objective).collect::<Vec<_>>(),
            })))
        }
        None => Ok(Verdict::ok(
            serde_json::to_value(&output).expect("serializable"),
        )),
    }
}

fn parse_bits(text: &str) -> CliResult<Vec<bool>> {
    text.chars()
        .filter(|c| *c != ',' && !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Failure::usage(format!("--x: unexpected character {c:?}"))),
        })
        .collect()
}

pub fn oracle(a: &OracleArgs) -> CliResult<Verdict> {
    let phi = match (&a.table, &a.network) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            BooleanClassifier::parse_truth_table(&text).map_err(|e| match e {
                rdexplain::Error::Parse { line, message, .. } => {
                    Failure::usage(format!("{}:{line}: {message}", path.display()))
                }
                other => Failure::from(other),
            })?
        }
        (None, Some(path)) => BooleanClassifier::thresholded(load_network(path)?),
        (None, None) => return Err(Failure::usage("one of --table or --network is required")),
    };
    let x = parse_bits(&a.x)?;
    if x.len() != phi.dim() {
        return Err(Failure::check(format!(
            "--x has {} components, classifier expects {}",
            x.len(),
            phi.dim()
        )));
    }
    let delta = parse_fraction(&a.delta).map_err(|e| Failure::usage(format!("--delta: {e}")))?;
    let solution = min_relevant_input(&phi, &x, delta, a.max_dim)?;
    let mut verdict = json!({
        "dim": phi.dim(),
        "x": x.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>(),
        "delta": fraction_string(&delta),
        "k_star": solution.min_size,
        "witness": solution.witness,
        "achieved_probability": fraction_string(&solution.achieved_probability),
    });
    if !a.epsilons.is_empty() {
        let eps = a
            .epsilons
            .iter()
            .map(|e| parse_fraction(e).map_err(|err| Failure::usage(format!("--epsilons: {err}"))))
            .collect::<CliResult<Vec<_>>>()?;
        let rd = exact_rate_distortion(&phi, &x, &eps)?;
        verdict["min_distortion_by_size"] = rd
            .min_distortion_by_size
            .iter()
            .map(fraction_string)
            .collect();
        verdict["rate_distortion"] = rd
            .points
            .iter()
            .map(|p| json!({"epsilon": fraction_string(&p.epsilon), "rate": p.rate}))
            .collect();
    }
    Ok(Verdict::ok(verdict))
}

pub fn rd_curve(a: &RdCurveArgs) -> CliResult<Verdict> {
    let p = load_problem(&a.problem)?;
    let d = p.net.input_dim();
    let images: Vec<Vec<f64>> = p.rows.iter().map(|(_, x)| x.clone()).collect();
    let maps = match &a.maps {
        None => vec![vec![0.0; d]; images.len()],
        Some(path) => {
            let all = read_relevance_maps(path)?;
            if all.len() == images.len() {
                all
            } else if all.len() == 1 {
                vec![all[0].clone(); images.len()]
            } else if all.len() == p.total_rows {
                p.rows.iter().map(|(r, _)| all[*r].clone()).collect()
            } else {
                return Err(Failure::check(format!(
                    "{}: {} maps for {} input rows",
                    path.display(),
                    all.len(),
                    images.len()
                )));
            }
        }
    };
    let config = EvalConfig {
        rates: uniform_rates(a.rates),
        samples: a.samples.unwrap_or_else(|| default_samples(d)),
        seed: a.seed,
        clamp: a.clamp,
    };
    let curve = evaluate_batch(&p.net, &p.reference, &images, &maps, &config)?;
    if let Some(path) = &a.out {
        write(path, curve.to_csv())?;
    }
    Ok(Verdict::ok(json!({
        "ordering": if a.maps.is_some() { "maps" } else { "random" },
        "images": curve.images_averaged,
        "samples_per_point": curve.samples_per_point,
        "auc": curve.auc(),
        "points": curve.points,
    })))
}

pub fn render(a: &RenderArgs) -> CliResult<Verdict> {
    let maps = read_relevance_maps(&a.map)?;
    let Some(values) = maps.get(a.index) else {
        return Err(Failure::check(format!(
            "{}: map {} requested, file holds {}",
            a.map.display(),
            a.index,
            maps.len()
        )));
    };
    let pgm = render_pgm(values, a.width, a.height)?;
    write(&a.out, pgm)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Verdict::ok(json!({
        "width": a.width,
        "height": a.height,
        "min": min,
        "max": max,
    })))
}
