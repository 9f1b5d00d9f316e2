//! Gaussian reference distributions, obfuscation moments and obfuscation
//! sampling.
//!
//! The obfuscation of `x` under relevance scores `s` is
//! `y = x ⊙ s + n ⊙ (1 − s)` with `n` drawn from the reference.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::rng::row_rng;

/// Default rank of the low-rank covariance factor.
pub const DEFAULT_RANK: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Per-component variances.
    Diagonal(Vec<f64>),
    /// Factor `Q` (d × r) with covariance `Q Qᵀ`.
    LowRank(Matrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Diagonal,
    LowRank(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReference {
    mean: Vec<f64>,
    covariance: Covariance,
}

/// Set when the requested rank exceeded `min(d, N − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReduction {
    pub requested: usize,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEstimate {
    pub reference: GaussianReference,
    pub rank_reduction: Option<RankReduction>,
}

impl GaussianReference {
    pub fn new(mean: Vec<f64>, covariance: Covariance) -> Result<Self> {
        match &covariance {
            Covariance::Diagonal(var) => {
                check_dim("reference variances", mean.len(), var.len())?;
                if var.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Invalid(
                        "variances must be finite and non-negative".into(),
                    ));
                }
            }
            Covariance::LowRank(q) => {
                check_dim("reference factor rows", mean.len(), q.rows())?;
                if q.cols() == 0 || q.cols() > q.rows() {
                    return Err(Error::Invalid(format!(
                        "factor rank {} must be in 1..={}",
                        q.cols(),
                        q.rows()
                    )));
                }
                if q.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("factor entries must be finite".into()));
                }
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("mean entries must be finite".into()));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    /// Diagonal of the covariance matrix.
    pub fn variances(&self) -> Vec<f64> {
        match &self.covariance {
            Covariance::Diagonal(v) => v.clone(),
            Covariance::LowRank(q) => q.row_norms_sq(),
        }
    }

    /// Draws reference sample number `row` of the stream keyed by `seed`.
    pub fn sample_noise(&self, seed: u64, row: u64) -> Vec<f64> {
        let mut rng = row_rng(seed, row);
        match &self.covariance {
            Covariance::Diagonal(var) => self
                .mean
                .iter()
                .zip(var)
                .map(|(m, v)| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    m + v.sqrt() * g
                })
                .collect(),
            Covariance::LowRank(q) => {
                let g: Vec<f64> = (0..q.cols())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                self.mean
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m + crate::network::dot(q.row(i), &g))
                    .collect()
            }
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        self.to_json_with(None)
    }

    /// Serializes to the stats file format, recording a rank reduction if any.
    pub fn to_json_with(&self, reduction: Option<RankReduction>) -> Vec<u8> {
        let cov = match &self.covariance {
            Covariance::Diagonal(v) => CovFile::Diag { var: v.clone() },
            Covariance::LowRank(q) => CovFile::Lowrank {
                factor: q.to_rows(),
                requested_rank: reduction.map(|r| r.requested),
            },
        };
        let file = StatsFile {
            mean: self.mean.clone(),
            cov,
        };
        let mut out = serde_json::to_vec(&file).expect("stats serialization");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: StatsFile = serde_json::from_slice(bytes)?;
        let cov = match file.cov {
            CovFile::Diag { var } => Covariance::Diagonal(var),
            CovFile::Lowrank { factor, .. } => Covariance::LowRank(
                Matrix::from_rows(&factor)
                    .ok_or_else(|| Error::Invalid("ragged covariance factor".into()))?,
            ),
        };
        Self::new(file.mean, cov)
    }
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    mean: Vec<f64>,
    cov: CovFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CovFile {
    Diag {
        var: Vec<f64>,
    },
    Lowrank {
        factor: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        requested_rank: Option<usize>,
    },
}

/// Estimates a Gaussian reference from data vectors.
///
/// Diagonal mode makes one pass with Welford updates. Low-rank mode keeps
/// the top `r` right singular vectors of the centered data matrix scaled by
/// `σ / √(N − 1)`, so `Q Qᵀ` is the best rank-`r` approximation of the
/// unbiased sample covariance.
pub fn estimate_reference<I, V>(data: I, mode: CovarianceMode) -> Result<ReferenceEstimate>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    match mode {
        CovarianceMode::Diagonal => {
            let mut w: Option<Welford> = None;
            for (k, v) in data.into_iter().enumerate() {
                let v = v.as_ref();
                let acc = w.get_or_insert_with(|| Welford::new(v.len()));
                check_dim(&format!("data vector {k}"), acc.mean.len(), v.len())?;
                acc.push(v);
            }
            let w = w.unwrap_or_else(|| Welford::new(0));
            if w.count < 2 {
                return Err(Error::Invalid(format!(
                    "need at least 2 samples, got {}",
                    w.count
                )));
            }
            let var = w.variance();
            Ok(ReferenceEstimate {
                reference: GaussianReference::new(w.mean, Covariance::Diagonal(var))?,
                rank_reduction: None,
            })
        }
        CovarianceMode::LowRank(rank) => {
            if rank == 0 {
                return Err(Error::Invalid("rank must be positive".into()));
            }
            let rows: Vec<Vec<f64>> = data.into_iter().map(|v| v.as_ref().to_vec()).collect();
            let n = rows.len();
            if n < 2 {
                return Err(Error::Invalid(format!("need at least 2 samples, got {n}")));
            }
            let d = rows[0].len();
            for (k, r) in rows.iter().enumerate() {
                check_dim(&format!("data vector {k}"), d, r.len())?;
            }
            let mut w = Welford::new(d);
            for r in &rows {
                w.push(r);
            }
            let max_rank = d.min(n - 1);
            let used = rank.min(max_rank);
            let reduction = (used < rank).then_some(RankReduction {
                requested: rank,
                used,
            });
            let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - w.mean[j]);
            let svd = centered.svd(false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let scale = 1.0 / ((n - 1) as f64).sqrt();
            let mut q = Matrix::zeros(d, used);
            for (col, &k) in order.iter().take(used).enumerate() {
                let sv = svd.singular_values[k] * scale;
                // Fix the sign so the largest-magnitude entry is positive.
                let pivot = (0..d)
                    .max_by(|&a, &b| {
                        v_t[(k, a)]
                            .abs()
                            .total_cmp(&v_t[(k, b)].abs())
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                let sign = if v_t[(k, pivot)] < 0.0 { -1.0 } else { 1.0 };
                for i in 0..d {
                    q.row_mut(i)[col] = sign * sv * v_t[(k, i)];
                }
            }
            Ok(ReferenceEstimate {
                reference: GaussianReference::new(w.mean, Covariance::LowRank(q))?,
                rank_reduction: reduction,
            })
        }
    }
}

struct Welford {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        let denom = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / denom).max(0.0)).collect()
    }
}

/// Relevance scores, one per input component, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceScores(Vec<f64>);

impl RelevanceScores {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(i) = s.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid(format!(
                "relevance score {i} = {} outside [0, 1]",
                s[i]
            )));
        }
        Ok(Self(s))
    }

    pub fn constant(d: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Covariance representation carried through moment propagation.
#[derive(Debug, Clone, PartialEq)]
pub enum StateCovariance {
    Diagonal(Vec<f64>),
    /// Factor with the same column count at every layer.
    Factor(Matrix),
}

/// Mean and covariance representation of a layer's (approximately) Gaussian
/// activations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub mean: Vec<f64>,
    pub covariance: StateCovariance,
}

impl MomentState {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Per-component variances.
    pub fn variances(&self) -> Vec<f64> {
        match &self.covariance {
            StateCovariance::Diagonal(v) => v.clone(),
            StateCovariance::Factor(q) => q.row_norms_sq(),
        }
    }
}

/// Mean and covariance of the obfuscation `y = x ⊙ s + n ⊙ (1 − s)`.
pub fn input_moments(
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
) -> Result<MomentState> {
    let d = reference.dim();
    check_dim("input vector", d, x.len())?;
    check_dim("relevance scores", d, s.len())?;
    let s = s.as_slice();
    let mean = (0..d)
        .map(|i| x[i] * s[i] + reference.mean[i] * (1.0 - s[i]))
        .collect();
    let covariance = match &reference.covariance {
        Covariance::Diagonal(var) => StateCovariance::Diagonal(
            var.iter()
                .zip(s)
                .map(|(v, si)| (1.0 - si) * (1.0 - si) * v)
                .collect(),
        ),
        Covariance::LowRank(q) => {
            let mut f = q.clone();
            for (i, si) in s.iter().enumerate() {
                let scale = 1.0 - si;
                f.row_mut(i).iter_mut().for_each(|v| *v *= scale);
            }
            StateCovariance::Factor(f)
        }
    };
    Ok(MomentState { mean, covariance })
}

/// Draws `count` obfuscations of `x`, one per row. Row `j` uses reference
/// sample `j` of the stream keyed by `seed`.
pub fn sample_obfuscation(
    reference: &GaussianReference,
    x: &[f64],
    s: &RelevanceScores,
    count: usize,
    seed: u64,
) -> Result<Matrix> {
    let d = reference.dim();
    check_dim("input vector", d, x.len())?;
    check_dim("relevance scores", d, s.len())?;
    if count == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let mut out = Matrix::zeros(count, d);
    for j in 0..count {
        let n = reference.sample_noise(seed, j as u64);
        obfuscate_into(x, s.as_slice(), &n, out.row_mut(j));
    }
    Ok(out)
}

#[inline]
pub(crate) fn obfuscate_into(x: &[f64], s: &[f64], n: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = if s[i] == 1.0 {
            x[i]
        } else {
            x[i] * s[i] + n[i] * (1.0 - s[i])
        };
    }
}
