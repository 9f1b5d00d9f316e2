//! Assumed density filtering through ReLU networks.
//!
//! Each layer's activations are treated as Gaussian. Affine layers map the
//! moments exactly; the ReLU matches the first two moments of the rectified
//! Gaussian. Covariances are carried either as a diagonal or as a factor `Q`
//! with `Σ ≈ Q Qᵀ`. The factor form uses the update `Σ ← N Σ N` with
//! `N = diag(F(μ/σ))`, so only `Q ← N Q` is needed.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::matrix::Matrix;
use crate::network::{dot, Activation, AffineLayer, NeuralNetwork};
use crate::reference::{
    input_moments, Covariance, GaussianReference, MomentState, RelevanceScores, StateCovariance,
};

/// Below this standard deviation a unit is treated as deterministic.
pub const SIGMA_FLOOR: f64 = 1e-12;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Covariance representation used during propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdfMode {
    #[serde(alias = "diag")]
    Diagonal,
    #[serde(alias = "low_rank")]
    LowRank,
}

pub fn std_normal_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal CDF through `erfc`, so the lower tail keeps full relative
/// precision. Below `t = −37` it switches to the asymptotic series of the
/// log-CDF; results under `1e-300` are flushed to zero.
pub fn std_normal_cdf(t: f64) -> f64 {
    if t < -37.0 {
        let p = log_cdf_lower_tail(t).exp();
        return if p < 1e-300 { 0.0 } else { p };
    }
    let p = 0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2);
    if p < 1e-300 {
        0.0
    } else {
        p
    }
}

/// `ln F(t)` for large negative `t` via the Mills-ratio expansion.
fn log_cdf_lower_tail(t: f64) -> f64 {
    let z = 1.0 / (t * t);
    let series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - 105.0 * z)));
    -0.5 * t * t - LN_SQRT_2PI - (-t).ln() + series.ln()
}

/// Maps mean and covariance through `W z + b`.
pub fn propagate_affine(state: &MomentState, layer: &AffineLayer) -> Result<MomentState> {
    check_dim("affine propagation", layer.input_dim(), state.dim())?;
    let mean = layer.affine(&state.mean);
    let covariance = match &state.covariance {
        StateCovariance::Diagonal(var) => StateCovariance::Diagonal(
            (0..layer.output_dim())
                .map(|i| layer.row(i).iter().zip(var).map(|(w, v)| w * w * v).sum())
                .collect(),
        ),
        StateCovariance::Factor(q) => StateCovariance::Factor(matmul(layer, q)),
    };
    Ok(MomentState { mean, covariance })
}

/// `W Q` for a layer's weight matrix.
pub(crate) fn matmul(layer: &AffineLayer, q: &Matrix) -> Matrix {
    let r = q.cols();
    let mut out = Matrix::zeros(layer.output_dim(), r);
    for i in 0..layer.output_dim() {
        let dst = out.row_mut(i);
        for (k, &w) in layer.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, v) in dst.iter_mut().zip(q.row(k)) {
                *o += w * v;
            }
        }
    }
    out
}

/// Per-unit quantities of the rectified Gaussian moment match.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReluUnit {
    pub sd: f64,
    pub eta: f64,
    pub pdf: f64,
    pub cdf: f64,
    /// `F(−η)`, kept separately to avoid `1 − F` cancellation.
    pub upper: f64,
    pub mean: f64,
    /// Diagonal variance before clamping at zero.
    pub var: f64,
}

impl ReluUnit {
    /// `None` marks the deterministic bypass (`sd < SIGMA_FLOOR`).
    pub fn new(mu: f64, sd: f64) -> Option<Self> {
        if !(sd >= SIGMA_FLOOR) {
            return None;
        }
        let eta = mu / sd;
        let pdf = std_normal_pdf(eta);
        let cdf = std_normal_cdf(eta);
        let upper = std_normal_cdf(-eta);
        let (mean, var) = if eta >= 0.0 {
            // a = f(η) − η F(−η) ≥ 0 is small in the upper tail; the
            // variance below is algebraically equal to
            // μσf + (σ² + μ²)F − mean² but free of cancellation.
            let a = pdf - eta * upper;
            (sd * (eta + a), sd * sd * (cdf - eta * a - a * a))
        } else {
            let mean = sd * pdf + mu * cdf;
            (
                mean,
                mu * sd * pdf + (sd * sd + mu * mu) * cdf - mean * mean,
            )
        };
        Some(Self {
            sd,
            eta,
            pdf,
            cdf,
            upper,
            mean,
            var,
        })
    }
}

/// Moment-matched ReLU. Diagonal states use the exact rectified-Gaussian
/// variance; factor states are scaled row-wise by `F(μ/σ)`.
pub fn propagate_relu(state: &MomentState) -> MomentState {
    let sds: Vec<f64> = state
        .variances()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    let mut mean = Vec::with_capacity(state.dim());
    match &state.covariance {
        StateCovariance::Diagonal(var) => {
            let mut out = Vec::with_capacity(state.dim());
            for i in 0..state.dim() {
                match ReluUnit::new(state.mean[i], sds[i]) {
                    Some(u) => {
                        mean.push(u.mean);
                        out.push(u.var.max(0.0));
                    }
                    None => {
                        let mu = state.mean[i];
                        mean.push(mu.max(0.0));
                        out.push(if mu >= 0.0 { var[i].max(0.0) } else { 0.0 });
                    }
                }
            }
            MomentState {
                mean,
                covariance: StateCovariance::Diagonal(out),
            }
        }
        StateCovariance::Factor(q) => {
            let mut out = q.clone();
            for i in 0..state.dim() {
                let mu = state.mean[i];
                let scale = match ReluUnit::new(mu, sds[i]) {
                    Some(u) => {
                        mean.push(u.mean);
                        u.cdf
                    }
                    None => {
                        mean.push(mu.max(0.0));
                        if mu >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                if scale != 1.0 {
                    out.row_mut(i).iter_mut().for_each(|v| *v *= scale);
                }
            }
            MomentState {
                mean,
                covariance: StateCovariance::Factor(out),
            }
        }
    }
}

/// Bias-variance split of the expected distortion
/// `E[½(Φ(x) − Φ(y))²] = ½(Φ(x) − E Φ(y))² + ½ V Φ(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub bias_term: f64,
    pub variance_term: f64,
    pub total: f64,
    pub output_mean: f64,
    pub output_variance: f64,
}

impl DistortionReport {
    pub(crate) fn new(target: f64, output_mean: f64, output_variance: f64) -> Self {
        let diff = target - output_mean;
        let bias_term = 0.5 * diff * diff;
        let variance_term = 0.5 * output_variance;
        Self {
            bias_term,
            variance_term,
            total: bias_term + variance_term,
            output_mean,
            output_variance,
        }
    }
}

/// Input moments converted to the representation requested by `mode`.
///
/// A low-rank reference can run in diagonal mode (using the diagonal of
/// `Q Qᵀ`); a diagonal reference can run in factor mode with the exact
/// factor `diag(√σ)`.
pub fn initial_state(
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    mode: AdfMode,
) -> Result<MomentState> {
    let state = input_moments(reference, x, s)?;
    Ok(match (mode, state.covariance) {
        (AdfMode::Diagonal, StateCovariance::Factor(q)) => MomentState {
            mean: state.mean,
            covariance: StateCovariance::Diagonal(q.row_norms_sq()),
        },
        (AdfMode::LowRank, StateCovariance::Diagonal(v)) => {
            let d = v.len();
            let mut q = Matrix::zeros(d, d);
            for (i, vi) in v.iter().enumerate() {
                q.row_mut(i)[i] = vi.sqrt();
            }
            MomentState {
                mean: state.mean,
                covariance: StateCovariance::Factor(q),
            }
        }
        (_, covariance) => MomentState {
            mean: state.mean,
            covariance,
        },
    })
}

/// Propagates through every layer and returns the state of the full output
/// layer.
pub fn propagate_network(net: &NeuralNetwork, input: MomentState) -> Result<MomentState> {
    let mut state = input;
    for layer in net.moment_layers() {
        state = propagate_affine(&state, layer)?;
        if layer.activation() == Activation::Relu {
            state = propagate_relu(&state);
        }
    }
    Ok(state)
}

/// ADF estimate of the expected distortion of obfuscating `x` with scores
/// `s`.
pub fn adf_distortion(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    mode: AdfMode,
) -> Result<DistortionReport> {
    check_dim("reference", net.input_dim(), reference.dim())?;
    let target = net.forward(x)?;
    let out = propagate_network(net, initial_state(reference, x, s, mode)?)?;
    let k = net.output_index();
    let variance = match &out.covariance {
        StateCovariance::Diagonal(v) => v[k].max(0.0),
        StateCovariance::Factor(q) => dot(q.row(k), q.row(k)),
    };
    Ok(DistortionReport::new(target, out.mean[k], variance))
}

/// True when the reference stores a low-rank factor.
pub fn native_mode(reference: &GaussianReference) -> AdfMode {
    match reference.covariance() {
        Covariance::Diagonal(_) => AdfMode::Diagonal,
        Covariance::LowRank(_) => AdfMode::LowRank,
    }
}
