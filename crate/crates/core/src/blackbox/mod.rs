//! Black-box classifiers and the label-access wrappers an attacker sees.

mod zoo;

pub use zoo::{
    make_victim, AdditiveVictim, GroupSymmetric, LinearSoftmax, QuadrantBright, Victim, VictimKind,
    VictimSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::tensor::{Shape, Tensor};

/// Tolerance on `sum(p) = 1` for a vector to count as a distribution.
pub const PROB_TOL: f64 = 1e-9;

/// A deterministic classifier returning a probability vector per input.
///
/// Implementations are pure functions over immutable parameters, so
/// concurrent `evaluate` calls are safe.
pub trait Model: Send + Sync {
    fn num_classes(&self) -> usize;
    fn input_shape(&self) -> &Shape;
    /// `x` must match [`Model::input_shape`].
    fn evaluate(&self, x: &Tensor) -> Vec<f64>;

    fn evaluate_batch(&self, xs: &[Tensor]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_shape(&self) -> &Shape {
        (**self).input_shape()
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        (**self).evaluate(x)
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_shape(&self) -> &Shape {
        (**self).input_shape()
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        (**self).evaluate(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Soft,
    Hard,
    /// Full probability vector.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopKConfig {
    pub k: usize,
    pub mode: LabelMode,
}

impl TopKConfig {
    pub fn all(num_classes: usize) -> Self {
        Self {
            k: num_classes,
            mode: LabelMode::All,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.k == 0 || self.k > num_classes {
            return Err(Error::TopK {
                k: self.k,
                classes: num_classes,
            });
        }
        Ok(())
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            LabelMode::All => {
                check_distribution(raw)?;
                Ok(raw.to_vec())
            }
            LabelMode::Soft => wrap_topk_soft(raw, self.k),
            LabelMode::Hard => wrap_topk_hard(raw, self.k),
        }
    }
}

pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Probability("empty vector".into()));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Probability(format!(
            "entry {i} = {} is not a probability",
            p[i]
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::Probability(format!("entries sum to {s}")));
    }
    Ok(())
}

/// Indices of the `k` largest entries, largest first; equal values are
/// ordered by lower class index.
pub fn topk_indices(p: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Keeps the top-k probabilities and spreads the leftover mass uniformly
/// over the other classes.
pub fn wrap_topk_soft(raw: &[f64], k: usize) -> Result<Vec<f64>> {
    check_distribution(raw)?;
    let c = raw.len();
    if k == 0 || k > c {
        return Err(Error::TopK { k, classes: c });
    }
    if k == c {
        return Ok(raw.to_vec());
    }
    let top = topk_indices(raw, k);
    let kept: f64 = top.iter().map(|&i| raw[i]).sum();
    let fill = ((1.0 - kept) / (c - k) as f64).max(0.0);
    let mut out = vec![fill; c];
    for &i in &top {
        out[i] = raw[i];
    }
    Ok(out)
}

/// `1/k` on each of the top-k classes, zero elsewhere.
pub fn wrap_topk_hard(raw: &[f64], k: usize) -> Result<Vec<f64>> {
    check_distribution(raw)?;
    let c = raw.len();
    if k == 0 || k > c {
        return Err(Error::TopK { k, classes: c });
    }
    let mut out = vec![0.0; c];
    let w = 1.0 / k as f64;
    for i in topk_indices(raw, k) {
        out[i] = w;
    }
    Ok(out)
}

pub fn argmax(p: &[f64]) -> usize {
    topk_indices(p, 1)[0]
}

/// A model as seen through a top-k label wrapper.
pub struct Wrapped<M> {
    inner: M,
    topk: TopKConfig,
}

impl<M: Model> Wrapped<M> {
    pub fn new(inner: M, topk: TopKConfig) -> Result<Self> {
        topk.validate(inner.num_classes())?;
        Ok(Self { inner, topk })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn topk(&self) -> TopKConfig {
        self.topk
    }
}

impl<M: Model> Model for Wrapped<M> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn input_shape(&self) -> &Shape {
        self.inner.input_shape()
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let raw = self.inner.evaluate(x);
        self.topk
            .apply(&raw)
            .expect("wrapped model produced an invalid distribution")
    }
}

/// Evaluates a batch through the wrapper, charging the ledger once per input.
pub fn query(
    model: &dyn Model,
    batch: &[Tensor],
    topk: TopKConfig,
    ledger: &QueryLedger,
    tag: &str,
) -> Result<Vec<Vec<f64>>> {
    topk.validate(model.num_classes())?;
    for x in batch {
        if x.shape() != model.input_shape() {
            return Err(Error::Shape(format!(
                "input {} does not match model {}",
                x.shape(),
                model.input_shape()
            )));
        }
    }
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    ledger.charge(batch.len() as u64, tag)?;
    model
        .evaluate_batch(batch)
        .into_iter()
        .map(|raw| topk.apply(&raw))
        .collect()
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}
