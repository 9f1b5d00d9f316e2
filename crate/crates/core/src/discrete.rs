//! Exact solver for the binary relevance problem.
//!
//! Inputs are bit vectors, completions are uniform over `{0,1}^d`, and all
//! probabilities are exact fractions. Bit `i` of an input index is component
//! `i` (0-based), so index 0 is the all-zeros input.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::NeuralNetwork;

pub type Fraction = Ratio<u64>;

/// Largest dimension accepted for a materialized truth table.
pub const MAX_TABLE_DIM: usize = 20;
/// Largest number of free components enumerated by
/// [`conditional_probability`].
pub const MAX_FREE_COMPONENTS: usize = 24;
/// Default dimension guard of the subset searches.
pub const DEFAULT_MAX_DIM: usize = 16;

#[derive(Debug, Clone)]
pub enum BooleanClassifier {
    TruthTable {
        dim: usize,
        table: Vec<bool>,
    },
    /// `Φ(y) = 1` iff the network output at `y` is at least `threshold`.
    Thresholded {
        net: NeuralNetwork,
        threshold: f64,
    },
}

impl BooleanClassifier {
    pub fn truth_table(dim: usize, table: Vec<bool>) -> Result<Self> {
        if dim == 0 || dim > MAX_TABLE_DIM {
            return Err(Error::Invalid(format!(
                "truth table dimension must be in 1..={MAX_TABLE_DIM}, got {dim}"
            )));
        }
        if table.len() != 1 << dim {
            return Err(Error::Invalid(format!(
                "truth table for d = {dim} needs {} entries, got {}",
                1usize << dim,
                table.len()
            )));
        }
        Ok(Self::TruthTable { dim, table })
    }

    pub fn from_fn(dim: usize, f: impl Fn(&[bool]) -> bool) -> Result<Self> {
        if dim == 0 || dim > MAX_TABLE_DIM {
            return Err(Error::Invalid(format!("dimension {dim} out of range")));
        }
        let table = (0..1usize << dim)
            .map(|idx| f(&index_to_bits(idx, dim)))
            .collect();
        Self::truth_table(dim, table)
    }

    /// Network thresholded at 0.5.
    pub fn thresholded(net: NeuralNetwork) -> Self {
        Self::Thresholded {
            net,
            threshold: 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::TruthTable { dim, .. } => *dim,
            Self::Thresholded { net, .. } => net.input_dim(),
        }
    }

    /// Evaluates `Φ` on the input encoded by `index`.
    pub fn eval(&self, index: usize) -> bool {
        match self {
            Self::TruthTable { table, .. } => table[index],
            Self::Thresholded { net, threshold } => {
                let y: Vec<f64> = (0..net.input_dim())
                    .map(|i| if index >> i & 1 == 1 { 1.0 } else { 0.0 })
                    .collect();
                net.forward_unchecked(&y) >= *threshold
            }
        }
    }

    /// Truth table of this classifier.
    pub fn materialize(&self) -> Result<Vec<bool>> {
        match self {
            Self::TruthTable { table, .. } => Ok(table.clone()),
            Self::Thresholded { .. } => {
                let d = self.dim();
                if d > MAX_TABLE_DIM {
                    return Err(Error::TooLarge(format!(
                        "cannot materialize a truth table for d = {d}"
                    )));
                }
                Ok((0..1usize << d).map(|i| self.eval(i)).collect())
            }
        }
    }

    /// Parses the text format: line 1 is `d`, line 2 the `2^d` bits.
    pub fn parse_truth_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "<truth table>".into(),
            line,
            message,
        };
        let dim: usize = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing dimension line".into()))?
            .parse()
            .map_err(|e| parse_err(1, format!("bad dimension: {e}")))?;
        let bits = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing bit line".into()))?;
        let table = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(parse_err(2, format!("unexpected character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::truth_table(dim, table)
    }

    pub fn format_truth_table(&self) -> Result<String> {
        let table = self.materialize()?;
        let bits: String = table.iter().map(|&b| if b { '1' } else { '0' }).collect();
        Ok(format!("{}\n{}\n", self.dim(), bits))
    }
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
}

pub fn index_to_bits(index: usize, dim: usize) -> Vec<bool> {
    (0..dim).map(|i| index >> i & 1 == 1).collect()
}

fn check_input(phi: &BooleanClassifier, x: &[bool]) -> Result<usize> {
    crate::error::check_dim("binary input", phi.dim(), x.len())?;
    Ok(bits_to_index(x))
}

fn check_set(d: usize, set: &[usize]) -> Result<usize> {
    let mut mask = 0usize;
    for &i in set {
        if i >= d {
            return Err(Error::Invalid(format!(
                "index {i} out of range for d = {d}"
            )));
        }
        mask |= 1 << i;
    }
    Ok(mask)
}

/// `P(Φ(y) = Φ(x) | y_S = x_S)` by enumerating the free components.
pub fn conditional_probability(
    phi: &BooleanClassifier,
    x: &[bool],
    set: &[usize],
) -> Result<Fraction> {
    let d = phi.dim();
    if d > usize::BITS as usize - 1 {
        return Err(Error::TooLarge(format!("d = {d}")));
    }
    let xi = check_input(phi, x)?;
    let fixed = check_set(d, set)?;
    let free: Vec<usize> = (0..d).filter(|i| fixed >> i & 1 == 0).collect();
    if free.len() > MAX_FREE_COMPONENTS {
        return Err(Error::TooLarge(format!(
            "{} free components exceed the enumeration limit of {MAX_FREE_COMPONENTS}",
            free.len()
        )));
    }
    let target = phi.eval(xi);
    let base = xi & fixed;
    let total = 1u64 << free.len();
    let mut hits = 0u64;
    for m in 0..total {
        let mut y = base;
        for (b, &i) in free.iter().enumerate() {
            if m >> b & 1 == 1 {
                y |= 1 << i;
            }
        }
        if phi.eval(y) == target {
            hits += 1;
        }
    }
    Ok(Fraction::new(hits, total))
}

/// Exact rational test `P(…) ≥ δ`.
pub fn is_delta_relevant(
    phi: &BooleanClassifier,
    x: &[bool],
    set: &[usize],
    delta: Fraction,
) -> Result<bool> {
    Ok(conditional_probability(phi, x, set)? >= delta)
}

/// Counts of agreeing completions for every fixed set, indexed by the mask
/// of the fixed set. Computed with a subset-sum transform over the flip
/// pattern `z = y ⊕ x`: the completions of `S` are exactly the `z ⊆ Sᶜ`.
struct AgreementTable {
    dim: usize,
    counts: Vec<u32>,
}

impl AgreementTable {
    fn new(phi: &BooleanClassifier, x: &[bool], max_d: usize) -> Result<Self> {
        let d = phi.dim();
        if d > max_d {
            return Err(Error::TooLarge(format!(
                "d = {d} exceeds the exhaustive-search limit of {max_d}"
            )));
        }
        let xi = check_input(phi, x)?;
        let table = phi.materialize()?;
        let target = table[xi];
        let full = (1usize << d) - 1;
        let mut h: Vec<u32> = (0..=full)
            .map(|z| u32::from(table[xi ^ z] == target))
            .collect();
        for bit in 0..d {
            for mask in 0..=full {
                if mask >> bit & 1 == 1 {
                    h[mask] += h[mask ^ (1 << bit)];
                }
            }
        }
        // Reindex by fixed set: count(S) = h(Sᶜ).
        let counts = (0..=full).map(|s| h[full ^ s]).collect();
        Ok(Self { dim: d, counts })
    }

    fn probability(&self, mask: usize) -> Fraction {
        let free = self.dim - mask.count_ones() as usize;
        Fraction::new(u64::from(self.counts[mask]), 1u64 << free)
    }
}

/// Lexicographic combinations of `0..n` of size `k`.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return;
        }
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscreteSolution {
    pub min_size: usize,
    /// Sorted 0-based component indices.
    pub witness: Vec<usize>,
    #[serde(serialize_with = "serialize_fraction")]
    pub achieved_probability: Fraction,
}

fn serialize_fraction<S: serde::Serializer>(
    f: &Fraction,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", f.numer(), f.denom()))
}

/// Smallest δ-relevant set, taking the lexicographically first witness
/// among sets of minimal size.
pub fn min_relevant_input(
    phi: &BooleanClassifier,
    x: &[bool],
    delta: Fraction,
    max_d: usize,
) -> Result<DiscreteSolution> {
    let table = AgreementTable::new(phi, x, max_d)?;
    let d = table.dim;
    for k in 0..=d {
        let mut found = None;
        for_each_combination(d, k, |set| {
            let mask = set.iter().fold(0usize, |m, &i| m | 1 << i);
            let p = table.probability(mask);
            if p >= delta {
                found = Some((set.to_vec(), p));
                true
            } else {
                false
            }
        });
        if let Some((witness, p)) = found {
            return Ok(DiscreteSolution {
                min_size: k,
                witness,
                achieved_probability: p,
            });
        }
    }
    // The full set has probability one, so only δ > 1 lands here.
    Err(Error::Invalid(format!("no set reaches δ = {delta}")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteRatePoint {
    pub epsilon: Fraction,
    pub rate: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteRateDistortion {
    /// Smallest exact distortion `(1 − p_S)/2` over sets of each size.
    pub min_distortion_by_size: Vec<Fraction>,
    pub points: Vec<DiscreteRatePoint>,
}

/// `R(ε) = min{|S| : D(S) ≤ ε}` with `D(S) = (1 − p_S)/2`.
pub fn exact_rate_distortion(
    phi: &BooleanClassifier,
    x: &[bool],
    epsilons: &[Fraction],
) -> Result<DiscreteRateDistortion> {
    let table = AgreementTable::new(phi, x, DEFAULT_MAX_DIM)?;
    let d = table.dim;
    let mut best = vec![Fraction::from_integer(0); d + 1];
    for mask in 0..1usize << d {
        let k = mask.count_ones() as usize;
        let p = table.probability(mask);
        if p > best[k] {
            best[k] = p;
        }
    }
    let one = Fraction::from_integer(1);
    let min_distortion_by_size: Vec<Fraction> = best
        .iter()
        .map(|p| (one - p) / Fraction::from_integer(2))
        .collect();
    let points = epsilons
        .iter()
        .map(|&epsilon| DiscreteRatePoint {
            epsilon,
            rate: min_distortion_by_size
                .iter()
                .position(|&dk| dk <= epsilon)
                .unwrap_or(d),
        })
        .collect();
    Ok(DiscreteRateDistortion {
        min_distortion_by_size,
        points,
    })
}

/// Parses `a/b`, a decimal such as `0.75`, or an integer into an exact
/// fraction.
pub fn parse_fraction(text: &str) -> Result<Fraction> {
    let t = text.trim();
    let bad = || Error::Invalid(format!("not a non-negative fraction: {text:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Fraction::new(n, d));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        || frac.len() > 18
    {
        return Err(bad());
    }
    let scale = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac_v: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    let numer = int
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_v))
        .ok_or_else(bad)?;
    Ok(Fraction::new(numer, scale))
}
