//! Monte-Carlo estimate of the expected distortion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::network::NeuralNetwork;
use crate::reference::{obfuscate_into, GaussianReference, RelevanceScores};
use crate::rng::stable_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

impl McEstimate {
    /// Mean and standard error of the given per-sample values.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = stable_sum(values.iter().copied()) / n;
        let ss = stable_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        let sd = if values.len() > 1 {
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            estimate: mean,
            standard_error: sd / n.sqrt(),
        }
    }
}

/// Per-sample halved squared deviations `½(Φ(x) − Φ(y_j))²`.
pub fn distortion_samples(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dim("reference", net.input_dim(), reference.dim())?;
    check_dim("relevance scores", net.input_dim(), s.len())?;
    let target = net.forward(x)?;
    let s = s.as_slice();
    let values = (0..count)
        .into_par_iter()
        .map_init(
            || vec![0.0; x.len()],
            |y, j| {
                let n = reference.sample_noise(seed, j as u64);
                obfuscate_into(x, s, &n, y);
                let diff = target - net.forward_unchecked(y);
                0.5 * diff * diff
            },
        )
        .collect();
    Ok(values)
}

/// Sample-mean estimate of the expected distortion with its standard error.
/// Sample `j` depends only on `(seed, j)`, and the reduction runs in index
/// order, so results do not depend on the thread count.
pub fn mc_distortion(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    if count < 2 {
        return Err(Error::Invalid(
            "Monte-Carlo needs at least 2 samples".into(),
        ));
    }
    let values = distortion_samples(net, reference, x, s, count, seed)?;
    Ok(McEstimate::from_samples(&values))
}
