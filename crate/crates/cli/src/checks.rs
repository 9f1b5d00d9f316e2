//! `grad-check` and `mc-check`.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use rdexplain::io::read_relevance_maps;
use rdexplain::rde::distortion_gradient;
use rdexplain::rng::{derive_seed, row_rng};
use rdexplain::testing::{
    random_diagonal_reference, random_input, random_lowrank_reference, random_network,
};
use rdexplain::{
    adf_distortion, mc_distortion, AdfMode, GaussianReference, NeuralNetwork, RelevanceScores,
};

use crate::files::load_problem;
use crate::{CliResult, Failure, GradCheckArgs, McCheckArgs, Problem, Verdict};

/// Scores closer than this to 0 or 1 are not finite-differenced.
const BOUNDARY_MARGIN: f64 = 1e-3;

/// Floor of the relative-error denominator, so that a gradient entry that
/// is zero up to rounding is compared absolutely.
const REL_ERR_FLOOR: f64 = 1e-8;

struct Instance {
    net: NeuralNetwork,
    reference: GaussianReference,
    x: Vec<f64>,
    s: Vec<f64>,
}

fn interior_scores(r: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| r.random_range(BOUNDARY_MARGIN..1.0 - BOUNDARY_MARGIN))
        .collect()
}

/// One instance per selected input row. Scores come from `scores` or are
/// drawn from the interior of the box.
fn file_instances(problem: &Problem, scores: Option<&Path>, seed: u64) -> CliResult<Vec<Instance>> {
    let p = load_problem(problem)?;
    let d = p.net.input_dim();
    let maps = match scores {
        Some(path) => Some(read_relevance_maps(path)?),
        None => None,
    };
    p.rows
        .iter()
        .enumerate()
        .map(|(k, (row, x))| {
            let s = match &maps {
                None => interior_scores(&mut row_rng(derive_seed(seed, *row as u64), 0), d),
                Some(m) => {
                    let s = match m.len() {
                        1 => &m[0],
                        n if n == p.rows.len() => &m[k],
                        n if n == p.total_rows => &m[*row],
                        n => {
                            return Err(Failure::check(format!(
                                "{} maps for {} input rows",
                                n,
                                p.rows.len()
                            )))
                        }
                    };
                    if s.len() != d {
                        return Err(Failure::check(format!(
                            "map has {} entries, network expects {d}",
                            s.len()
                        )));
                    }
                    s.clone()
                }
            };
            Ok(Instance {
                net: p.net.clone(),
                reference: p.reference.clone(),
                x: x.clone(),
                s,
            })
        })
        .collect()
}

#[derive(Serialize, Clone, Copy)]
struct Comparison {
    instance: usize,
    mode: AdfMode,
    coordinate: usize,
    analytic: f64,
    numeric: f64,
    rel_err: f64,
}

fn check_instance(
    index: usize,
    inst: &Instance,
    modes: &[AdfMode],
    coords: usize,
    step: f64,
    seed: u64,
) -> rdexplain::Result<Vec<Comparison>> {
    let interior: Vec<usize> = (0..inst.s.len())
        .filter(|&i| inst.s[i] >= BOUNDARY_MARGIN && inst.s[i] <= 1.0 - BOUNDARY_MARGIN)
        .collect();
    let mut pick_rng = row_rng(derive_seed(seed, index as u64), 1);
    let mut picked: Vec<usize> = sample(&mut pick_rng, interior.len(), coords.min(interior.len()))
        .into_iter()
        .map(|k| interior[k])
        .collect();
    picked.sort_unstable();

    let mut out = Vec::new();
    for &mode in modes {
        let scores = RelevanceScores::new(inst.s.clone())?;
        let (_, g) = distortion_gradient(&inst.net, &inst.reference, &inst.x, &scores, mode)?;
        for &i in &picked {
            let at = |v: f64| -> rdexplain::Result<f64> {
                let mut t = inst.s.clone();
                t[i] = v;
                let t = RelevanceScores::new(t)?;
                Ok(adf_distortion(&inst.net, &inst.reference, &inst.x, &t, mode)?.total)
            };
            let numeric = (at(inst.s[i] + step)? - at(inst.s[i] - step)?) / (2.0 * step);
            let analytic = g[i];
            let rel_err =
                (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            out.push(Comparison {
                instance: index,
                mode,
                coordinate: i,
                analytic,
                numeric,
                rel_err,
            });
        }
    }
    Ok(out)
}

/// Random gradient-check instance: 30 inputs, two hidden layers, diagonal
/// reference on even indices and a rank-5 reference on odd ones.
fn random_grad_instance(seed: u64, index: usize) -> Instance {
    let mut r = row_rng(derive_seed(seed, index as u64), 0);
    let d = 30;
    let net = random_network(&mut r, d, &[12, 8], 2);
    let reference = if index % 2 == 0 {
        random_diagonal_reference(&mut r, d)
    } else {
        random_lowrank_reference(&mut r, d, 5)
    };
    let x = random_input(&mut r, d);
    let s = interior_scores(&mut r, d);
    Instance {
        net,
        reference,
        x,
        s,
    }
}

pub fn grad_check(a: &GradCheckArgs) -> CliResult<Verdict> {
    if !(a.step > 0.0) || a.step >= BOUNDARY_MARGIN {
        return Err(Failure::usage(format!(
            "--step must be in (0, {BOUNDARY_MARGIN})"
        )));
    }
    let instances = match &a.problem.get() {
        Some(p) => file_instances(p, a.scores.as_deref(), a.seed)?,
        None => (0..a.random)
            .map(|i| random_grad_instance(a.seed, i))
            .collect(),
    };
    let modes: Vec<AdfMode> = match a.mode {
        Some(m) => vec![m.into()],
        None => vec![AdfMode::Diagonal, AdfMode::LowRank],
    };
    let per_instance = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| check_instance(i, inst, &modes, a.coords, a.step, a.seed))
        .collect::<rdexplain::Result<Vec<_>>>()?;
    let all: Vec<Comparison> = per_instance.into_iter().flatten().collect();
    let worst = all
        .iter()
        .copied()
        .reduce(|w, c| if c.rel_err > w.rel_err { c } else { w });
    let max_rel_err = worst.map_or(0.0, |w| w.rel_err);
    let pass = !all.is_empty() && max_rel_err < a.tol;
    Ok(Verdict {
        json: json!({
            "instances": instances.len(),
            "modes": modes,
            "checked": all.len(),
            "step": a.step,
            "tolerance": a.tol,
            "max_rel_err": max_rel_err,
            "worst": worst,
            "pass": pass,
        }),
        pass,
    })
}

/// Random deep instance: up to 10 inputs, three ReLU layers of width at
/// most 16 and a linear read-out, uniform scores.
fn random_mc_instance(seed: u64, index: usize, mode: AdfMode) -> Instance {
    let mut r = row_rng(derive_seed(seed, index as u64), 0);
    let d = r.random_range(2..=10);
    let widths: Vec<usize> = (0..3).map(|_| r.random_range(4..=16)).collect();
    let net = random_network(&mut r, d, &widths, 1);
    let reference = match mode {
        AdfMode::Diagonal => random_diagonal_reference(&mut r, d),
        AdfMode::LowRank => random_lowrank_reference(&mut r, d, d.min(3)),
    };
    let x = random_input(&mut r, d);
    let s = (0..d).map(|_| r.random::<f64>()).collect();
    Instance {
        net,
        reference,
        x,
        s,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mc_check(a: &McCheckArgs) -> CliResult<Verdict> {
    let mode: AdfMode = a.mode.into();
    let instances = match &a.problem.get() {
        Some(p) => file_instances(p, a.scores.as_deref(), a.seed)?,
        None => (0..a.random)
            .map(|i| random_mc_instance(a.seed, i, mode))
            .collect(),
    };
    let mut results = Vec::with_capacity(instances.len());
    let mut rel_errs = Vec::with_capacity(instances.len());
    let mut within = 0;
    for (i, inst) in instances.iter().enumerate() {
        let s = RelevanceScores::new(inst.s.clone())?;
        let adf = adf_distortion(&inst.net, &inst.reference, &inst.x, &s, mode)?;
        let mc = mc_distortion(
            &inst.net,
            &inst.reference,
            &inst.x,
            &s,
            a.samples,
            derive_seed(a.seed, 1 << 32 | i as u64),
        )?;
        let diff = adf.total - mc.estimate;
        let rel_err = if mc.estimate > 0.0 {
            diff.abs() / mc.estimate
        } else {
            diff.abs()
        };
        if diff.abs() <= 4.0 * mc.standard_error {
            within += 1;
        }
        rel_errs.push(rel_err);
        results.push(json!({
            "instance": i,
            "dim": inst.net.input_dim(),
            "adf": adf.total,
            "mc": mc.estimate,
            "stderr": mc.standard_error,
            "rel_err": rel_err,
        }));
    }
    let median_rel_err = median(&rel_errs);
    let pass = match a.max_median {
        Some(limit) => median_rel_err <= limit,
        None => true,
    };
    Ok(Verdict {
        json: json!({
            "instances": instances.len(),
            "samples": a.samples,
            "mode": mode,
            "median_rel_err": median_rel_err,
            "max_rel_err": rel_errs.iter().copied().fold(0.0, f64::max),
            "within_4se": within,
            "max_median": a.max_median,
            "results": results,
            "pass": pass,
        }),
        pass,
    })
}
