//! Rate-distortion relevance maps for feed-forward ReLU classifiers.
//!
//! A component set is relevant for a prediction `Φ(x)` when fixing those
//! components and drawing the rest from a reference distribution leaves the
//! score nearly unchanged. The crate provides:
//!
//! - [`network`]: dense ReLU networks and their JSON format;
//! - [`reference`]: Gaussian reference estimation and obfuscation sampling;
//! - [`adf`]: moment propagation giving a closed-form distortion estimate;
//! - [`mc`]: the Monte-Carlo estimate of the same quantity;
//! - [`rde`]: projected gradient descent on `D(s) + λ‖s‖₁` over `[0, 1]^d`;
//! - [`discrete`]: exact brute-force answers for Boolean classifiers;
//! - [`ordering`]: the relevance-ordering rate-distortion test;
//! - [`io`]: data, relevance-map and heatmap files.

pub mod adf;
pub mod discrete;
pub mod error;
pub mod io;
pub mod matrix;
pub mod mc;
pub mod network;
pub mod ordering;
pub mod rde;
pub mod reference;
pub mod rng;
pub mod testing;

pub use adf::{adf_distortion, AdfMode, DistortionReport};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use mc::{mc_distortion, McEstimate};
pub use network::{Activation, AffineLayer, NeuralNetwork};
pub use ordering::{
    evaluate_batch, evaluate_ordering, ordering_from_scores, EvalConfig, RateDistortionCurve,
};
pub use rde::{optimize, OptimizerConfig, OptimizerTrace};
pub use reference::{
    estimate_reference, input_moments, sample_obfuscation, Covariance, CovarianceMode,
    GaussianReference, MomentState, RelevanceScores,
};
