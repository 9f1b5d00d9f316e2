#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rdexplain::{Activation, AffineLayer, Covariance, GaussianReference, NeuralNetwork};

/// Dense `d × d` covariance of the obfuscation `x ⊙ s + n ⊙ (1 − s)`.
pub fn dense_input_covariance(reference: &GaussianReference, s: &[f64]) -> Vec<Vec<f64>> {
    let d = reference.dim();
    let mut cov = vec![vec![0.0; d]; d];
    match reference.covariance() {
        Covariance::Diagonal(v) => {
            for i in 0..d {
                cov[i][i] = v[i];
            }
        }
        Covariance::LowRank(q) => {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] = (0..q.cols()).map(|k| q.get(i, k) * q.get(j, k)).sum();
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            cov[i][j] *= (1.0 - s[i]) * (1.0 - s[j]);
        }
    }
    cov
}

/// Pushes a Gaussian with full covariance through one affine map.
pub fn dense_affine(
    layer: &AffineLayer,
    mean: &[f64],
    cov: &[Vec<f64>],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (m, n) = (layer.output_dim(), layer.input_dim());
    let w = |i: usize, j: usize| layer.weights()[i * n + j];
    let new_mean = (0..m)
        .map(|i| (0..n).map(|j| w(i, j) * mean[j]).sum::<f64>() + layer.bias()[i])
        .collect();
    let mut wc = vec![vec![0.0; n]; m];
    for i in 0..m {
        for k in 0..n {
            wc[i][k] = (0..n).map(|j| w(i, j) * cov[j][k]).sum();
        }
    }
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for l in 0..m {
            out[i][l] = (0..n).map(|k| wc[i][k] * w(l, k)).sum();
        }
    }
    (new_mean, out)
}

/// Network made only of affine layers (identity activations everywhere).
pub fn random_affine_network(rng: &mut impl Rng, d: usize, widths: &[usize]) -> NeuralNetwork {
    let mut layers = Vec::new();
    let mut n = d;
    for &m in widths {
        let scale = 1.0 / (n as f64).sqrt();
        let weights = (0..m * n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = (0..m)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        layers.push(AffineLayer::new(m, n, weights, bias, Activation::Identity).unwrap());
        n = m;
    }
    let out = rng.random_range(0..n);
    NeuralNetwork::new(d, out, layers).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Mean and variance of `max(z, 0)` for `z ~ N(mu, sd²)` by quadrature,
/// integrating each side of the kink separately.
pub fn rectified_moments_by_quadrature(mu: f64, sd: f64) -> (f64, f64) {
    let density = |z: f64| {
        let t = (z - mu) / sd;
        (-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let lo = mu - 16.0 * sd;
    let hi = mu + 16.0 * sd;
    let n = 40_000;
    let pos_lo = lo.max(0.0);
    let mean = simpson(|z| z * density(z), pos_lo, hi.max(0.0), n);
    let mass_below = simpson(density, lo, hi.min(0.0), n);
    let var = mean * mean * mass_below
        + simpson(
            |z| (z - mean) * (z - mean) * density(z),
            pos_lo,
            hi.max(0.0),
            n,
        );
    (mean, var)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
