//! Relevance-ordering test.
//!
//! A relevance map induces an ordering of the input components. Starting
//! from a pure reference sample, the top-ranked components are replaced by
//! the original input in increasing amounts and the resulting distortion is
//! measured. A good map drives the distortion to zero at low rates.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mc::McEstimate;
use crate::network::NeuralNetwork;
use crate::reference::GaussianReference;
use crate::rng::{row_rng, stable_sum};

/// Default number of points on the rate grid.
pub const DEFAULT_RATE_POINTS: usize = 64;

/// Default noise samples per rate point by input dimension.
pub fn default_samples(d: usize) -> usize {
    if d <= 1024 {
        512
    } else {
        64
    }
}

/// `n` evenly spaced rates from 0 to 1 inclusive.
pub fn uniform_rates(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub distortion: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDistortionCurve {
    pub points: Vec<CurvePoint>,
    pub samples_per_point: usize,
    pub images_averaged: usize,
}

impl RateDistortionCurve {
    /// Trapezoidal area under the distortion curve.
    pub fn auc(&self) -> f64 {
        stable_sum(
            self.points
                .windows(2)
                .map(|w| 0.5 * (w[1].rate - w[0].rate) * (w[0].distortion + w[1].distortion)),
        )
    }

    /// CSV with header `rate,distortion,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,distortion,stderr\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:?},{:?},{:?}\n",
                p.rate, p.distortion, p.standard_error
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Strictly increasing rates in `[0, 1]`.
    pub rates: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Clamp reference samples to `[0, 1]` before substitution.
    pub clamp: bool,
}

impl EvalConfig {
    pub fn new(d: usize, seed: u64) -> Self {
        Self {
            rates: uniform_rates(DEFAULT_RATE_POINTS),
            samples: default_samples(d),
            seed,
            clamp: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Invalid("need at least 2 samples per rate".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::Invalid("rate grid is empty".into()));
        }
        if self.rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Invalid("rates must lie in [0, 1]".into()));
        }
        if self.rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("rates must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Number of components fixed at rate `rho`: `⌈ρ d⌉`, tolerant of the
/// rounding in `ρ · d` (for example `0.15 · 20`).
pub fn components_at_rate(rho: f64, d: usize) -> usize {
    let k = (rho * d as f64 - 1e-9).ceil();
    (k.max(0.0) as usize).min(d)
}

/// Descending order of scores. Ties are broken by a seeded uniform shuffle;
/// NaN scores sort last.
pub fn ordering_from_scores(scores: &[f64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(&mut row_rng(seed, u64::MAX));
    order.sort_by(|&a, &b| {
        let (x, y) = (scores[a], scores[b]);
        match (x.is_nan(), y.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            _ => y.partial_cmp(&x).expect("non-NaN"),
        }
    });
    order
}

/// Distortion curve of one ordering. The same reference samples are reused
/// at every rate.
pub fn evaluate_ordering(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    ordering: &[usize],
    config: &EvalConfig,
) -> Result<RateDistortionCurve> {
    config.validate()?;
    let d = net.input_dim();
    check_dim("reference", d, reference.dim())?;
    check_dim("ordering", d, ordering.len())?;
    let mut seen = vec![false; d];
    for &i in ordering {
        if i >= d || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Invalid("ordering is not a permutation".into()));
        }
    }
    let target = net.forward(x)?;
    let counts: Vec<usize> = config
        .rates
        .iter()
        .map(|&r| components_at_rate(r, d))
        .collect();

    let per_sample: Vec<Vec<f64>> = (0..config.samples)
        .into_par_iter()
        .map(|j| {
            let mut y = reference.sample_noise(config.seed, j as u64);
            if config.clamp {
                y.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            }
            let mut fixed = 0;
            counts
                .iter()
                .map(|&k| {
                    while fixed < k {
                        let i = ordering[fixed];
                        y[i] = x[i];
                        fixed += 1;
                    }
                    let diff = target - net.forward_unchecked(&y);
                    0.5 * diff * diff
                })
                .collect()
        })
        .collect();

    let points = config
        .rates
        .iter()
        .enumerate()
        .map(|(r, &rate)| {
            let column: Vec<f64> = per_sample.iter().map(|v| v[r]).collect();
            let e = McEstimate::from_samples(&column);
            CurvePoint {
                rate,
                distortion: e.estimate,
                standard_error: e.standard_error,
            }
        })
        .collect();
    Ok(RateDistortionCurve {
        points,
        samples_per_point: config.samples,
        images_averaged: 1,
    })
}

/// Pointwise mean of the per-image curves. Every image uses the same seed,
/// both for tie-breaking and for the reference samples. The reported
/// standard error is the mean of the per-image standard errors, an upper
/// bound that does not assume independence between images.
pub fn evaluate_batch(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    images: &[Vec<f64>],
    maps: &[Vec<f64>],
    config: &EvalConfig,
) -> Result<RateDistortionCurve> {
    if images.len() != maps.len() {
        return Err(Error::Invalid(format!(
            "{} images but {} relevance maps",
            images.len(),
            maps.len()
        )));
    }
    if images.is_empty() {
        return Err(Error::Invalid("no images to evaluate".into()));
    }
    let curves = images
        .par_iter()
        .zip(maps.par_iter())
        .map(|(x, map)| {
            check_dim("relevance map", net.input_dim(), map.len())?;
            let order = ordering_from_scores(map, config.seed);
            evaluate_ordering(net, reference, x, &order, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(average_curves(&curves))
}

/// Pointwise mean of curves sharing one rate grid.
pub fn average_curves(curves: &[RateDistortionCurve]) -> RateDistortionCurve {
    let n = curves.len() as f64;
    let first = &curves[0];
    let points = (0..first.points.len())
        .map(|r| CurvePoint {
            rate: first.points[r].rate,
            distortion: stable_sum(curves.iter().map(|c| c.points[r].distortion)) / n,
            standard_error: stable_sum(curves.iter().map(|c| c.points[r].standard_error)) / n,
        })
        .collect();
    RateDistortionCurve {
        points,
        samples_per_point: first.samples_per_point,
        images_averaged: curves.iter().map(|c| c.images_averaged).sum(),
    }
}
