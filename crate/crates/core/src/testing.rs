//! Random instances and planted-relevance fixtures shared by the CLI checks
//! and the test suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::adf::{adf_distortion, AdfMode};
use crate::matrix::Matrix;
use crate::network::{Activation, AffineLayer, NeuralNetwork};
use crate::reference::{Covariance, GaussianReference, RelevanceScores};

pub fn rng(seed: u64) -> ChaCha8Rng {
    crate::rng::row_rng(seed, 0)
}

/// Random dense network with He-scaled Gaussian weights and small biases.
/// `hidden` lists the ReLU layer widths; the output layer has `outputs`
/// units and index 0 is selected.
pub fn random_network(
    rng: &mut impl Rng,
    input_dim: usize,
    hidden: &[usize],
    outputs: usize,
) -> NeuralNetwork {
    random_masked_network(rng, input_dim, hidden, outputs, &|_| true)
}

/// Like [`random_network`] but the first layer only reads components for
/// which `keep` returns true; all other input weights are exactly zero.
pub fn random_masked_network(
    rng: &mut impl Rng,
    input_dim: usize,
    hidden: &[usize],
    outputs: usize,
    keep: &dyn Fn(usize) -> bool,
) -> NeuralNetwork {
    let mut layers = Vec::new();
    let mut width = input_dim;
    let widths: Vec<(usize, Activation)> = hidden
        .iter()
        .map(|&w| (w, Activation::Relu))
        .chain(std::iter::once((outputs, Activation::Identity)))
        .collect();
    for (li, &(out, act)) in widths.iter().enumerate() {
        let fan_in = if li == 0 {
            (0..width).filter(|&j| keep(j)).count().max(1)
        } else {
            width
        };
        let w = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        let mut weights = Vec::with_capacity(out * width);
        for _ in 0..out {
            for j in 0..width {
                let v: f64 = w.sample(rng);
                weights.push(if li == 0 && !keep(j) { 0.0 } else { v });
            }
        }
        let bias = (0..out)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        layers.push(AffineLayer::new(out, width, weights, bias, act).unwrap());
        width = out;
    }
    NeuralNetwork::new(input_dim, 0, layers).unwrap()
}

/// Random diagonal reference with means in `[0, 1)` and variances in
/// `[0.05, 0.3)`.
pub fn random_diagonal_reference(rng: &mut impl Rng, d: usize) -> GaussianReference {
    let mean = (0..d).map(|_| rng.random::<f64>()).collect();
    let var = (0..d).map(|_| 0.05 + 0.25 * rng.random::<f64>()).collect();
    GaussianReference::new(mean, Covariance::Diagonal(var)).unwrap()
}

/// Random low-rank reference `Q Qᵀ` with `Q` of shape `d × rank`.
pub fn random_lowrank_reference(rng: &mut impl Rng, d: usize, rank: usize) -> GaussianReference {
    let mean = (0..d).map(|_| rng.random::<f64>()).collect();
    let scale = 0.4 / (rank as f64).sqrt();
    let q = (0..d * rank)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    GaussianReference::new(mean, Covariance::LowRank(Matrix::from_vec(d, rank, q))).unwrap()
}

/// Random input with entries in `[0, 1)`.
pub fn random_input(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn scale_output(net: &NeuralNetwork, factor: f64) -> NeuralNetwork {
    let mut layers = net.layers().to_vec();
    let last = layers.pop().unwrap();
    let scaled = |v: &[f64]| v.iter().map(|w| w * factor).collect::<Vec<_>>();
    layers.push(
        AffineLayer::new(
            last.output_dim(),
            last.input_dim(),
            scaled(last.weights()),
            scaled(last.bias()),
            last.activation(),
        )
        .unwrap(),
    );
    NeuralNetwork::new(net.input_dim(), net.output_index(), layers).unwrap()
}

/// A planted-relevance task: a network that reads only the components in
/// `support`, a reference, and an input.
pub struct PlantedTask {
    pub net: NeuralNetwork,
    pub reference: GaussianReference,
    pub x: Vec<f64>,
    pub support: Vec<usize>,
}

/// Expected distortion of a planted task with every component obfuscated.
pub const PLANTED_DISTORTION: f64 = 4.0;

/// Draws a planted task with `support_size` relevant components out of `d`.
/// The support is a uniformly random subset, the network has two hidden
/// ReLU layers of width 16 and 8, the reference has unit-scale variances
/// and the input is drawn away from the reference mean. The read-out layer
/// is rescaled so the fully obfuscated distortion equals
/// [`PLANTED_DISTORTION`].
pub fn planted_task(rng: &mut impl Rng, d: usize, support_size: usize) -> PlantedTask {
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..support_size {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
    }
    let mut support = idx[..support_size].to_vec();
    support.sort_unstable();
    let keep = |j: usize| support.binary_search(&j).is_ok();
    let net = random_masked_network(rng, d, &[16, 8], 1, &keep);
    let mean = vec![0.0; d];
    let var = (0..d).map(|_| 0.5 + rng.random::<f64>()).collect();
    let reference = GaussianReference::new(mean, Covariance::Diagonal(var)).unwrap();
    let x: Vec<f64> = (0..d)
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * (1.0 + rng.random::<f64>())
        })
        .collect();
    let zero = RelevanceScores::constant(d, 0.0).unwrap();
    let d0 = adf_distortion(&net, &reference, &x, &zero, AdfMode::Diagonal)
        .unwrap()
        .total;
    let net = if d0 > 0.0 {
        scale_output(&net, (PLANTED_DISTORTION / d0).sqrt())
    } else {
        net
    };
    PlantedTask {
        net,
        reference,
        x,
        support,
    }
}
