//! Relevance scores from the relaxed rate-distortion problem
//!
//! ```text
//! minimize  D(s) + λ ‖s‖₁   subject to  s ∈ [0, 1]^d
//! ```
//!
//! with `D` evaluated by ADF, solved by projected heavy-ball gradient descent
//! with an Armijo backtracking line search.

mod gradient;

pub use gradient::distortion_gradient;

use serde::{Deserialize, Serialize};

use crate::adf::{adf_distortion, AdfMode, DistortionReport};
use crate::error::{Error, Result};
use crate::network::NeuralNetwork;
use crate::reference::{GaussianReference, RelevanceScores};

/// Default penalty weight by input dimension.
pub fn default_lambda(d: usize) -> f64 {
    if d <= 1024 {
        0.5
    } else {
        0.05
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lambda: f64,
    pub momentum: f64,
    pub init_value: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Number of iterations the relative objective change is measured over.
    pub window: usize,
    pub armijo: ArmijoConfig,
    pub mode: AdfMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            momentum: 0.85,
            init_value: 0.2,
            max_iters: 200,
            rel_tol: 1e-6,
            window: 5,
            armijo: ArmijoConfig::default(),
            mode: AdfMode::Diagonal,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        let checks = [
            (
                self.lambda >= 0.0 && self.lambda.is_finite(),
                "lambda must be non-negative",
            ),
            (
                (0.0..1.0).contains(&self.momentum),
                "momentum must be in [0, 1)",
            ),
            (
                (0.0..=1.0).contains(&self.init_value),
                "init_value must be in [0, 1]",
            ),
            (self.max_iters > 0, "max_iters must be positive"),
            (self.rel_tol > 0.0, "rel_tol must be positive"),
            (self.window > 0, "window must be positive"),
            (a.initial_step > 0.0, "armijo.initial_step must be positive"),
            (
                a.shrink > 0.0 && a.shrink < 1.0,
                "armijo.shrink must be in (0, 1)",
            ),
            (
                a.sufficient_decrease > 0.0,
                "armijo.sufficient_decrease must be positive",
            ),
            (
                a.max_backtracks > 0,
                "armijo.max_backtracks must be positive",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Invalid((*msg).to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIters,
    RelTol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub distortion: f64,
    pub l1: f64,
    /// Accepted step scale; zero when the line search failed.
    pub step_size: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_report: DistortionReport,
}

impl OptimizerTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    /// CSV with header `iteration,objective,distortion,l1,step_size,backtracks`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,distortion,l1,step_size,backtracks\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{}\n",
                r.iteration, r.objective, r.distortion, r.l1, r.step_size, r.backtracks
            ));
        }
        out
    }
}

/// `D_ADF(s) + λ Σ s_i`.
pub fn objective(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    lambda: f64,
    mode: AdfMode,
) -> Result<(f64, DistortionReport)> {
    let report = adf_distortion(net, reference, x, s, mode)?;
    Ok((report.total + lambda * l1(s.as_slice()), report))
}

/// Gradient of [`objective`]. On the box the penalty is linear, so it adds
/// exactly `λ` to every component.
pub fn gradient(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    lambda: f64,
    mode: AdfMode,
) -> Result<Vec<f64>> {
    let (_, mut g) = distortion_gradient(net, reference, x, s, mode)?;
    g.iter_mut().for_each(|v| *v += lambda);
    Ok(g)
}

/// Componentwise clamp to `[0, 1]`.
pub fn project_box(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

fn l1(s: &[f64]) -> f64 {
    s.iter().sum()
}

/// Projected heavy-ball descent with Armijo backtracking.
///
/// Each iteration tries `s⁺ = Π(s + β v − t g)` for `t = t₀, t₀ ρ, …` and
/// accepts the first candidate with `f(s⁺) ≤ f(s) + c·min(⟨g, s⁺ − s⟩, 0)`.
/// The carried velocity is the accepted displacement `s⁺ − s`. A failed
/// search takes a zero step and clears the velocity; two failures in a row
/// end the run.
pub fn optimize(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    config: &OptimizerConfig,
) -> Result<(RelevanceScores, OptimizerTrace)> {
    config.validate()?;
    let d = net.input_dim();
    let lambda = config.lambda;
    let mode = config.mode;
    let armijo = &config.armijo;

    let mut s = RelevanceScores::constant(d, config.init_value)?;
    let (mut report, mut g) = distortion_gradient(net, reference, x, &s, mode)?;
    g.iter_mut().for_each(|v| *v += lambda);
    let mut f = report.total + lambda * l1(s.as_slice());
    let mut velocity = vec![0.0; d];
    let mut records = vec![IterationRecord {
        iteration: 0,
        objective: f,
        distortion: report.total,
        l1: l1(s.as_slice()),
        step_size: 0.0,
        backtracks: 0,
    }];
    let mut failures = 0;
    let mut termination = Termination::MaxIters;

    for iteration in 1..=config.max_iters {
        let mut t = armijo.initial_step;
        let mut accepted = None;
        let mut backtracks = 0;
        loop {
            let candidate: Vec<f64> = (0..d)
                .map(|i| {
                    (s.as_slice()[i] + config.momentum * velocity[i] - t * g[i]).clamp(0.0, 1.0)
                })
                .collect();
            let candidate = RelevanceScores::new(candidate)?;
            let (f_new, rep_new) = objective(net, reference, x, &candidate, lambda, mode)?;
            let slope: f64 = (0..d)
                .map(|i| g[i] * (candidate.as_slice()[i] - s.as_slice()[i]))
                .sum();
            if f_new <= f + armijo.sufficient_decrease * slope.min(0.0) {
                accepted = Some((candidate, f_new, rep_new));
                break;
            }
            if backtracks == armijo.max_backtracks {
                break;
            }
            backtracks += 1;
            t *= armijo.shrink;
        }

        match accepted {
            Some((candidate, f_new, rep_new)) => {
                failures = 0;
                for (v, (new, old)) in velocity
                    .iter_mut()
                    .zip(candidate.as_slice().iter().zip(s.as_slice()))
                {
                    *v = new - old;
                }
                s = candidate;
                f = f_new;
                report = rep_new;
                let (_, mut g_new) = distortion_gradient(net, reference, x, &s, mode)?;
                g_new.iter_mut().for_each(|v| *v += lambda);
                g = g_new;
                records.push(IterationRecord {
                    iteration,
                    objective: f,
                    distortion: report.total,
                    l1: l1(s.as_slice()),
                    step_size: t,
                    backtracks,
                });
            }
            None => {
                failures += 1;
                velocity.iter_mut().for_each(|v| *v = 0.0);
                records.push(IterationRecord {
                    iteration,
                    objective: f,
                    distortion: report.total,
                    l1: l1(s.as_slice()),
                    step_size: 0.0,
                    backtracks,
                });
                if failures >= 2 {
                    break;
                }
            }
        }

        if records.len() > config.window {
            let old = records[records.len() - 1 - config.window].objective;
            if (old - f).abs() <= config.rel_tol * old.abs().max(f64::MIN_POSITIVE) {
                termination = Termination::RelTol;
                break;
            }
        }
    }

    Ok((
        s,
        OptimizerTrace {
            records,
            termination,
            final_report: report,
        },
    ))
}
