//! Reverse-mode derivative of the ADF distortion with respect to the
//! relevance scores.
//!
//! The forward sweep records the pre-activation state of every ReLU layer;
//! the backward sweep applies the adjoint of each step in reverse order.
//! Closed-form partials of the rectified Gaussian used below:
//!
//! ```text
//! ∂mean/∂μ = F(η)            ∂mean/∂σ = f(η)
//! ∂var/∂μ  = 2 mean F(−η)    ∂var/∂σ  = 2 (σ F(η) − mean f(η))
//! ```

use crate::adf::{initial_state, AdfMode, DistortionReport, ReluUnit};
use crate::error::{check_dim, Result};
use crate::matrix::Matrix;
use crate::network::{dot, Activation, NeuralNetwork};
use crate::reference::{
    Covariance, GaussianReference, MomentState, RelevanceScores, StateCovariance,
};

/// Adjoint of a moment state.
enum Adjoint {
    Diagonal { mean: Vec<f64>, var: Vec<f64> },
    Factor { mean: Vec<f64>, factor: Matrix },
}

/// Distortion report and `∂D/∂s` in one forward/backward sweep.
pub fn distortion_gradient(
    net: &NeuralNetwork,
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    mode: AdfMode,
) -> Result<(DistortionReport, Vec<f64>)> {
    check_dim("reference", net.input_dim(), reference.dim())?;
    let target = net.forward(x)?;
    let input = initial_state(reference, x, s, mode)?;

    // Forward sweep: keep the input of every ReLU.
    let mut relu_inputs: Vec<MomentState> = Vec::new();
    let mut state = input;
    for layer in net.moment_layers() {
        state = crate::adf::propagate_affine(&state, layer)?;
        if layer.activation() == Activation::Relu {
            let next = crate::adf::propagate_relu(&state);
            relu_inputs.push(std::mem::replace(&mut state, next));
        }
    }

    let k = net.output_index();
    let out_dim = state.dim();
    let mut g_mean = vec![0.0; out_dim];
    let (report, mut adj) = match &state.covariance {
        StateCovariance::Diagonal(v) => {
            let raw = v[k];
            let report = DistortionReport::new(target, state.mean[k], raw.max(0.0));
            g_mean[k] = report.output_mean - target;
            let mut g_var = vec![0.0; out_dim];
            if raw >= 0.0 {
                g_var[k] = 0.5;
            }
            (
                report,
                Adjoint::Diagonal {
                    mean: g_mean,
                    var: g_var,
                },
            )
        }
        StateCovariance::Factor(q) => {
            let variance = dot(q.row(k), q.row(k));
            let report = DistortionReport::new(target, state.mean[k], variance);
            g_mean[k] = report.output_mean - target;
            let mut g_q = Matrix::zeros(out_dim, q.cols());
            // ∂(½ ‖q_k‖²)/∂q_k = q_k
            g_q.row_mut(k).copy_from_slice(q.row(k));
            (
                report,
                Adjoint::Factor {
                    mean: g_mean,
                    factor: g_q,
                },
            )
        }
    };

    // Backward sweep.
    for layer in net.moment_layers().iter().rev() {
        if layer.activation() == Activation::Relu {
            let pre = relu_inputs.pop().expect("one recorded state per ReLU");
            adj = relu_backward(&pre, adj);
        }
        adj = match adj {
            Adjoint::Diagonal { mean, var } => {
                let g_mean = layer.affine_transpose(&mean);
                let mut g_var = vec![0.0; layer.input_dim()];
                for (i, gv) in var.iter().enumerate() {
                    if *gv == 0.0 {
                        continue;
                    }
                    for (o, w) in g_var.iter_mut().zip(layer.row(i)) {
                        *o += w * w * gv;
                    }
                }
                Adjoint::Diagonal {
                    mean: g_mean,
                    var: g_var,
                }
            }
            Adjoint::Factor { mean, factor } => Adjoint::Factor {
                mean: layer.affine_transpose(&mean),
                factor: transpose_matmul(layer, &factor),
            },
        };
    }

    // Input moments: mean_i = x_i s_i + m_i (1 − s_i).
    let s = s.as_slice();
    let n_mean = reference.mean();
    let grad = match adj {
        Adjoint::Diagonal { mean, var } => {
            // var_i = (1 − s_i)² σ_i, with σ the diagonal of the reference.
            let sigma = reference.variances();
            (0..s.len())
                .map(|i| mean[i] * (x[i] - n_mean[i]) - 2.0 * (1.0 - s[i]) * sigma[i] * var[i])
                .collect()
        }
        Adjoint::Factor { mean, factor } => {
            // factor row i = (1 − s_i) q_i
            let q = reference_factor(reference);
            (0..s.len())
                .map(|i| {
                    let gq = match &q {
                        RefFactor::Dense(q) => dot(factor.row(i), q.row(i)),
                        RefFactor::Diagonal(sd) => factor.get(i, i) * sd[i],
                    };
                    mean[i] * (x[i] - n_mean[i]) - gq
                })
                .collect()
        }
    };
    Ok((report, grad))
}

enum RefFactor<'a> {
    Dense(&'a Matrix),
    Diagonal(Vec<f64>),
}

fn reference_factor(reference: &GaussianReference) -> RefFactor<'_> {
    match reference.covariance() {
        Covariance::LowRank(q) => RefFactor::Dense(q),
        Covariance::Diagonal(v) => RefFactor::Diagonal(v.iter().map(|x| x.sqrt()).collect()),
    }
}

/// `Wᵀ G` for a factor adjoint `G`.
fn transpose_matmul(layer: &crate::network::AffineLayer, g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(layer.input_dim(), g.cols());
    for i in 0..layer.output_dim() {
        let gi = g.row(i);
        if gi.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (j, &w) in layer.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.row_mut(j).iter_mut().zip(gi) {
                *o += w * v;
            }
        }
    }
    out
}

fn relu_backward(pre: &MomentState, adj: Adjoint) -> Adjoint {
    match (adj, &pre.covariance) {
        (Adjoint::Diagonal { mean: gm, var: gv }, StateCovariance::Diagonal(var)) => {
            let n = pre.dim();
            let mut g_mean = vec![0.0; n];
            let mut g_var = vec![0.0; n];
            for i in 0..n {
                let mu = pre.mean[i];
                let sd = var[i].max(0.0).sqrt();
                match ReluUnit::new(mu, sd) {
                    Some(u) => {
                        // Clamped variances carry no gradient.
                        let gvi = if u.var >= 0.0 { gv[i] } else { 0.0 };
                        g_mean[i] = gm[i] * u.cdf + gvi * 2.0 * u.mean * u.upper;
                        let g_sd = gm[i] * u.pdf + gvi * 2.0 * (u.sd * u.cdf - u.mean * u.pdf);
                        g_var[i] = g_sd / (2.0 * u.sd);
                    }
                    None => {
                        if mu > 0.0 {
                            g_mean[i] = gm[i];
                        }
                        if mu >= 0.0 && var[i] >= 0.0 {
                            g_var[i] = gv[i];
                        }
                    }
                }
            }
            Adjoint::Diagonal {
                mean: g_mean,
                var: g_var,
            }
        }
        (
            Adjoint::Factor {
                mean: gm,
                factor: gq,
            },
            StateCovariance::Factor(q),
        ) => {
            let n = pre.dim();
            let mut g_mean = vec![0.0; n];
            let mut g_q = Matrix::zeros(n, q.cols());
            for i in 0..n {
                let mu = pre.mean[i];
                let row = q.row(i);
                let sd = dot(row, row).sqrt();
                match ReluUnit::new(mu, sd) {
                    Some(u) => {
                        // Output row = F(η) q_i; a = ∂L/∂F(η).
                        let a = dot(gq.row(i), row);
                        g_mean[i] = gm[i] * u.cdf + a * u.pdf / u.sd;
                        let g_sd = gm[i] * u.pdf - a * u.pdf * u.eta / u.sd;
                        let dst = g_q.row_mut(i);
                        for ((o, g), qv) in dst.iter_mut().zip(gq.row(i)).zip(row) {
                            *o = u.cdf * g + g_sd * qv / u.sd;
                        }
                    }
                    None => {
                        if mu > 0.0 {
                            g_mean[i] = gm[i];
                        }
                        if mu >= 0.0 {
                            g_q.row_mut(i).copy_from_slice(gq.row(i));
                        }
                    }
                }
            }
            Adjoint::Factor {
                mean: g_mean,
                factor: g_q,
            }
        }
        _ => unreachable!("adjoint and state share a representation"),
    }
}
