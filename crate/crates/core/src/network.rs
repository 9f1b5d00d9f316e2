//! Dense feed-forward ReLU networks and their JSON file format.
//!
//! A network computes `W_L relu(... relu(W_1 x + b_1) ...) + b_L` and the
//! scalar of interest is the component `output_index` of the last layer.
//! Convolutions and average pooling are affine, so they are expected to be
//! flattened into dense layers before a model reaches this crate.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine map followed by an activation. Weights are stored row-major,
/// row `i` holding the incoming weights of output neuron `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl AffineLayer {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        check_dim("layer weights", rows * cols, weights.len())?;
        check_dim("layer bias", rows, bias.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("layer with zero width".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
            activation,
        })
    }

    /// Builds a layer from nested rows.
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut weights = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Invalid(format!(
                    "weight row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            weights.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, weights, bias, activation)
    }

    pub fn output_dim(&self) -> usize {
        self.rows
    }

    pub fn input_dim(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// `W x + b`, without the activation.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), x) + self.bias[i])
            .collect()
    }

    /// `Wᵀ g` for a gradient `g` on the layer output.
    pub fn affine_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &gi) in g.iter().enumerate() {
            if gi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * gi;
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.affine(x);
        if self.activation == Activation::Relu {
            for v in &mut z {
                *v = v.max(0.0);
            }
        }
        z
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A scalar-valued ReLU network.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNetwork {
    input_dim: usize,
    output_index: usize,
    layers: Vec<AffineLayer>,
    /// Layers with runs of identity-activated layers composed into one
    /// affine map; `None` when there is nothing to compose.
    folded: Option<Vec<AffineLayer>>,
}

impl NeuralNetwork {
    pub fn new(input_dim: usize, output_index: usize, layers: Vec<AffineLayer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Invalid("input_dim must be positive".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::Invalid("network has no layers".into()));
        };
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_dim() != width {
                return Err(Error::Layer {
                    layer: i,
                    message: format!(
                        "dimension chain broken: layer takes {} inputs but previous width is {width}",
                        layer.input_dim()
                    ),
                });
            }
            if !layer.is_finite() {
                return Err(Error::NonFinite { layer: i });
            }
            width = layer.output_dim();
        }
        if last.activation() != Activation::Identity {
            return Err(Error::Layer {
                layer: layers.len() - 1,
                message: "final layer must use the identity activation".into(),
            });
        }
        if output_index >= last.output_dim() {
            return Err(Error::Layer {
                layer: layers.len() - 1,
                message: format!(
                    "output_index {output_index} out of range for width {}",
                    last.output_dim()
                ),
            });
        }
        let folded = fold_affine_runs(&layers);
        Ok(Self {
            input_dim,
            output_index,
            layers,
            folded,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_index(&self) -> usize {
        self.output_index
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    /// The layers with consecutive affine maps composed: an identity layer
    /// followed by any layer becomes one layer. Computes the same function
    /// as [`layers`](Self::layers) with fewer moment-propagation steps.
    pub fn moment_layers(&self) -> &[AffineLayer] {
        self.folded.as_deref().unwrap_or(&self.layers)
    }

    /// Evaluates the selected output component at `x`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_dim("network input", self.input_dim, x.len())?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("input component {i} is not finite")));
        }
        Ok(self.forward_unchecked(x))
    }

    /// Same as [`forward`](Self::forward) without validating `x`.
    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let (hidden, last) = self.layers.split_at(self.layers.len() - 1);
        let mut h = x.to_vec();
        for layer in hidden {
            h = layer.apply(&h);
        }
        let out = &last[0];
        dot(out.row(self.output_index), &h) + out.bias()[self.output_index]
    }

    pub fn to_json(&self) -> Vec<u8> {
        let file = NetworkFile {
            input_dim: self.input_dim,
            output_index: self.output_index,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    activation: l.activation,
                    bias: l.bias.iter().map(|&v| Some(v)).collect(),
                    weights: l
                        .weights
                        .chunks(l.cols)
                        .map(|r| r.iter().map(|&v| Some(v)).collect())
                        .collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_vec(&file).expect("network serialization");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let text =
            std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("not UTF-8: {e}")))?;
        let text = null_out_non_finite_tokens(text);
        let file: NetworkFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.into_iter().enumerate() {
            let finite = |v: &[Option<f64>]| -> Result<Vec<f64>> {
                v.iter()
                    .map(|e| match e {
                        Some(x) if x.is_finite() => Ok(*x),
                        _ => Err(Error::NonFinite { layer: i }),
                    })
                    .collect()
            };
            let bias = finite(&l.bias)?;
            let rows = l
                .weights
                .iter()
                .map(|r| finite(r))
                .collect::<Result<Vec<_>>>()?;
            if rows.len() != bias.len() {
                return Err(Error::Layer {
                    layer: i,
                    message: format!("{} weight rows but {} bias entries", rows.len(), bias.len()),
                });
            }
            let layer =
                AffineLayer::from_rows(&rows, bias, l.activation).map_err(|e| Error::Layer {
                    layer: i,
                    message: e.to_string(),
                })?;
            layers.push(layer);
        }
        Self::new(file.input_dim, file.output_index, layers)
    }
}

fn fold_affine_runs(layers: &[AffineLayer]) -> Option<Vec<AffineLayer>> {
    let hidden = &layers[..layers.len() - 1];
    if !hidden.iter().any(|l| l.activation == Activation::Identity) {
        return None;
    }
    let mut out: Vec<AffineLayer> = Vec::with_capacity(layers.len());
    for layer in layers {
        match out.last_mut() {
            Some(prev) if prev.activation == Activation::Identity => {
                *prev = compose(prev, layer);
            }
            _ => out.push(layer.clone()),
        }
    }
    Some(out)
}

/// `outer ∘ inner` where `inner` has the identity activation.
fn compose(inner: &AffineLayer, outer: &AffineLayer) -> AffineLayer {
    let (rows, mid, cols) = (outer.rows, inner.rows, inner.cols);
    let mut weights = vec![0.0; rows * cols];
    for i in 0..rows {
        let dst = &mut weights[i * cols..(i + 1) * cols];
        for k in 0..mid {
            let w = outer.weight(i, k);
            if w == 0.0 {
                continue;
            }
            for (o, v) in dst.iter_mut().zip(inner.row(k)) {
                *o += w * v;
            }
        }
    }
    let bias = outer.affine(&inner.bias);
    AffineLayer {
        rows,
        cols,
        weights,
        bias,
        activation: outer.activation,
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    output_index: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    activation: Activation,
    bias: Vec<Option<f64>>,
    weights: Vec<Vec<Option<f64>>>,
}

/// Replaces bare `NaN`, `Infinity` and `-Infinity` tokens (as written by
/// Python's `json` module) with `null` so they surface as non-finite entries
/// instead of syntax errors.
fn null_out_non_finite_tokens(text: &str) -> std::borrow::Cow<'_, str> {
    if !text.contains("NaN") && !text.contains("Infinity") {
        return text.into();
    }
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push_str("null");
                rest = &rest[t.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out.into()
}
