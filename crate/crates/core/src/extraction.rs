//! Desk-scale extraction simulator.
//!
//! A linear-softmax substitute is trained on every `(input, wrapped output)`
//! pair the victim returned. The guided arm spends its budget on class
//! targeted synthesis (round-robin over classes); the random arm spends the
//! same per-round counts on uniform noise.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::{
    argmax, make_victim, softmax_in_place, LabelMode, LinearSoftmax, Model, TopKConfig, VictimSpec,
    Wrapped,
};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::objectives::{ce_clone_loss, kl_clone_loss};
use crate::rng::{purpose, sub_seed, SplitMix64};
use crate::synthesis::{synthesize, SynthConfig};
use crate::tensor::{Shape, Tensor};

pub const LABEL_TAG: &str = "label";

/// `softmax((W x + b) / T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstituteModel {
    shape: Shape,
    classes: usize,
    /// Row-major `classes x cells`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub temperature: f64,
}

impl SubstituteModel {
    /// Small Gaussian weights (`std = scale / sqrt(D)`), zero bias.
    pub fn random(classes: usize, shape: Shape, temperature: f64, scale: f64, seed: u64) -> Self {
        let d = shape.len();
        let mut rng = SplitMix64::new(seed);
        let s = scale / (d as f64).sqrt();
        let weights = (0..classes * d).map(|_| s * rng.normal()).collect();
        Self {
            shape,
            classes,
            weights,
            bias: vec![0.0; classes],
            temperature,
        }
    }

    /// Copy of a linear victim's parameters.
    pub fn from_linear_victim(v: &LinearSoftmax) -> Self {
        let shape = v.input_shape().clone();
        let d = shape.len();
        let mut weights = v.weights.clone();
        if let Some(dead) = v.dead_cell {
            for k in 0..v.bias.len() {
                weights[k * d + dead] = 0.0;
            }
        }
        Self {
            shape,
            classes: v.bias.len(),
            weights,
            bias: v.bias.clone(),
            temperature: v.temperature,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..self.classes)
            .map(|k| {
                let row = &self.weights[k * d..(k + 1) * d];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[k])
                    / self.temperature
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

impl Model for SubstituteModel {
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn input_shape(&self) -> &Shape {
        &self.shape
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        self.predict(x.data())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs_per_round: usize,
    pub minibatch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs_per_round: 3,
            minibatch: 32,
        }
    }
}

/// One labelled query.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Tensor,
    pub target: Vec<f64>,
}

/// Clone loss of one example: KL over all classes for soft labels, cross
/// entropy for hard ones. Both have gradient `S - V` in the logits.
pub fn example_loss(sub: &SubstituteModel, e: &Example, mode: LabelMode) -> f64 {
    let s = sub.predict(e.x.data());
    let all: Vec<usize> = (0..s.len()).collect();
    match mode {
        LabelMode::Hard => ce_clone_loss(&e.target, &s, &all),
        LabelMode::Soft | LabelMode::All => kl_clone_loss(&e.target, &s, &all),
    }
}

pub fn mean_loss(sub: &SubstituteModel, batch: &[Example], mode: LabelMode) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch
        .iter()
        .map(|e| example_loss(sub, e, mode))
        .sum::<f64>()
        / batch.len() as f64
}

/// Minibatch gradient descent on the clone loss. Returns the trained model
/// and its mean loss on `batch`.
///
/// The step is `lr / (1 + mean |x|^2)` per example (normalized LMS), so one
/// `lr` works across input sizes and offsets.
pub fn train_substitute(
    sub: &SubstituteModel,
    batch: &[Example],
    mode: LabelMode,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(SubstituteModel, f64)> {
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) || cfg.minibatch == 0 {
        return Err(Error::Config(
            "training needs lr > 0 and minibatch >= 1".into(),
        ));
    }
    let d = sub.shape.len();
    for e in batch {
        if e.x.shape() != &sub.shape || e.target.len() != sub.classes {
            return Err(Error::Shape(
                "training example does not match the substitute".into(),
            ));
        }
    }
    let energy = batch
        .iter()
        .map(|e| e.x.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / batch.len().max(1) as f64;
    let lr = cfg.lr / (1.0 + energy);
    let mut m = sub.clone();
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut grad_w = vec![0.0; m.weights.len()];
    let mut grad_b = vec![0.0; m.classes];
    for epoch in 0..cfg.epochs_per_round {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.minibatch) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let e = &batch[i];
                let s = m.predict(e.x.data());
                for k in 0..m.classes {
                    let delta = (s[k] - e.target[k]) / m.temperature;
                    grad_b[k] += delta;
                    let row = &mut grad_w[k * d..(k + 1) * d];
                    for (g, v) in row.iter_mut().zip(e.x.data()) {
                        *g += delta * v;
                    }
                }
            }
            let step = lr / chunk.len() as f64;
            for (w, g) in m.weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            for (b, g) in m.bias.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
            if !m.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite substitute parameters in epoch {epoch} (lr {}, minibatch {})",
                    cfg.lr, cfg.minibatch
                )));
            }
        }
    }
    let loss = mean_loss(&m, batch, mode);
    Ok((m, loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Guided,
    Random,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Guided => "guided",
            Arm::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub n_probe: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    pub victim: VictimSpec,
    pub topk: TopKConfig,
    pub query_budget: u64,
    pub rounds: usize,
    pub samples_per_class: usize,
    /// Template for the guided arm; target class and seed are set per job.
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    pub substitute_temperature: f64,
    pub seed: u64,
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_budget == 0 {
            return Err(Error::Config("query_budget must be positive".into()));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be positive".into()));
        }
        if !(self.substitute_temperature.is_finite() && self.substitute_temperature > 0.0) {
            return Err(Error::Config(
                "substitute temperature must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: usize,
    pub queries_cum: u64,
    pub agreement: f64,
    pub min_class_count: u64,
    pub max_class_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub arm: Arm,
    pub rows: Vec<RoundRow>,
    /// Victim argmax over every charged training query.
    pub class_histogram: Vec<u64>,
    pub queries_used: u64,
    pub query_budget: u64,
    pub truncated: bool,
    /// Probe evaluations are not charged to the budget.
    pub probe_charged: bool,
    pub n_probe: usize,
    pub final_loss: f64,
}

impl ExtractionReport {
    pub fn final_agreement(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.agreement)
    }

    /// `max / min` class count; infinite when some class never appears.
    pub fn balance_ratio(&self) -> f64 {
        let max = self.class_histogram.iter().copied().max().unwrap_or(0);
        let min = self.class_histogram.iter().copied().min().unwrap_or(0);
        if min == 0 {
            f64::INFINITY
        } else {
            max as f64 / min as f64
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("round,queries_cum,agreement,min_class_count,max_class_count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{},{}\n",
                r.round, r.queries_cum, r.agreement, r.min_class_count, r.max_class_count
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let ratio = self.balance_ratio();
        serde_json::json!({
            "arm": self.arm.name(),
            "rounds": self.rows.len().saturating_sub(1),
            "final_agreement": self.final_agreement(),
            "class_histogram": self.class_histogram,
            "balance_ratio": if ratio.is_finite() { serde_json::json!(ratio) } else { serde_json::Value::Null },
            "queries_used": self.queries_used,
            "query_budget": self.query_budget,
            "truncated": self.truncated,
            "probe_charged": self.probe_charged,
            "n_probe": self.n_probe,
            "final_loss": self.final_loss,
        })
    }
}

/// Probe inputs: weak background noise plus one Gaussian bump of random
/// position, width and height, clamped to `[lo, hi]`.
pub fn probe_set(shape: &Shape, n: usize, seed: u64, clamp: (f64, f64)) -> Vec<Tensor> {
    let (lo, hi) = clamp;
    let dims = shape.dims();
    let strides = shape.strides();
    (0..n)
        .map(|i| {
            let mut rng = SplitMix64::derive(seed, &[i as u64]);
            let center: Vec<f64> = dims.iter().map(|&d| rng.uniform(0.0, d as f64)).collect();
            let width = rng.uniform(
                1.0,
                (dims.iter().copied().max().unwrap_or(1) as f64 / 3.0).max(1.5),
            );
            let height = rng.uniform(0.4, 1.0);
            let data = (0..shape.len())
                .map(|cell| {
                    let r2: f64 = dims
                        .iter()
                        .enumerate()
                        .map(|(ax, &d)| {
                            let pos = (cell / strides[ax] % d) as f64 + 0.5;
                            (pos - center[ax]).powi(2)
                        })
                        .sum();
                    let v = 0.3 * rng.next_f64() + height * (-r2 / (2.0 * width * width)).exp();
                    lo + (hi - lo) * v.clamp(0.0, 1.0)
                })
                .collect();
            Tensor::new(shape.clone(), data).expect("finite probe")
        })
        .collect()
}

/// Fraction of probes where both models agree on the argmax.
pub fn agreement(victim: &dyn Model, sub: &SubstituteModel, probes: &[Tensor]) -> f64 {
    if probes.is_empty() {
        return 0.0;
    }
    let hits = probes
        .par_iter()
        .filter(|x| argmax(&victim.evaluate(x)) == argmax(&sub.evaluate(x)))
        .count();
    hits as f64 / probes.len() as f64
}

/// Records every evaluation passing through it.
struct Recorder<'a> {
    inner: &'a dyn Model,
    seen: Mutex<Vec<Example>>,
}

impl Model for Recorder<'_> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn input_shape(&self) -> &Shape {
        self.inner.input_shape()
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let out = self.inner.evaluate(x);
        self.seen
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(Example {
                x: x.clone(),
                target: out.clone(),
            });
        out
    }
}

impl Recorder<'_> {
    /// Recorded examples in a canonical order, independent of the order
    /// concurrent evaluations happened in.
    fn into_sorted(self) -> Vec<Example> {
        let mut v = self.seen.into_inner().unwrap_or_else(|e| e.into_inner());
        let key = |e: &Example| e.x.data().iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        v.sort_by_cached_key(key);
        v
    }
}

/// Per-round query counts for the random arm.
#[derive(Debug, Clone)]
pub enum RoundPlan {
    /// `query_budget / rounds` each round.
    Even,
    /// Exactly these counts (from a guided run).
    Match(Vec<u64>),
}

struct Arena<'a> {
    cfg: &'a ExtractionConfig,
    victim: Wrapped<crate::blackbox::Victim>,
    probes: Vec<Tensor>,
    ledger: QueryLedger,
    data: Vec<Example>,
    histogram: Vec<u64>,
    sub: SubstituteModel,
    rows: Vec<RoundRow>,
    loss: f64,
}

impl<'a> Arena<'a> {
    fn new(cfg: &'a ExtractionConfig) -> Result<Self> {
        cfg.validate()?;
        let raw = make_victim(&cfg.victim)?;
        let shape = raw.input_shape().clone();
        let classes = raw.num_classes();
        let victim = Wrapped::new(raw, cfg.topk)?;
        let probes = probe_set(&shape, cfg.probe.n_probe, cfg.probe.seed, cfg.synth.clamp);
        let sub = SubstituteModel::random(
            classes,
            shape,
            cfg.substitute_temperature,
            1.0,
            sub_seed(cfg.seed, purpose::SUBSTITUTE),
        );
        let mut arena = Self {
            cfg,
            victim,
            probes,
            ledger: QueryLedger::new(cfg.query_budget),
            data: Vec::new(),
            histogram: vec![0; classes],
            sub,
            rows: Vec::new(),
            loss: 0.0,
        };
        arena.record_row(0);
        Ok(arena)
    }

    fn record_row(&mut self, round: usize) {
        let agreement = agreement(self.victim.inner(), &self.sub, &self.probes);
        self.rows.push(RoundRow {
            round,
            queries_cum: self.ledger.used(),
            agreement,
            min_class_count: self.histogram.iter().copied().min().unwrap_or(0),
            max_class_count: self.histogram.iter().copied().max().unwrap_or(0),
        });
    }

    fn absorb_examples(&mut self, examples: Vec<Example>) {
        for e in &examples {
            self.histogram[argmax(&e.target)] += 1;
        }
        self.data.extend(examples);
    }

    fn train(&mut self, round: usize) -> Result<()> {
        if self.data.is_empty() {
            return Ok(());
        }
        let seed =
            SplitMix64::derive(sub_seed(self.cfg.seed, purpose::TRAIN), &[round as u64]).next_u64();
        let (sub, loss) = train_substitute(
            &self.sub,
            &self.data,
            self.cfg.topk.mode,
            &self.cfg.train,
            seed,
        )?;
        self.sub = sub;
        self.loss = loss;
        Ok(())
    }

    /// Synthesis jobs for one round, each with an equal slice of `allot`.
    fn guided_round(&mut self, round: usize, allot: u64) -> Result<u64> {
        let classes = self.victim.num_classes();
        let jobs: Vec<(usize, usize)> = (0..self.cfg.samples_per_class)
            .flat_map(|j| (0..classes).map(move |c| (c, j)))
            .collect();
        let per_job = allot / jobs.len() as u64;
        let sub = &self.sub;
        let victim = &self.victim;
        let cfg = self.cfg;
        let results: Vec<Result<(Vec<Example>, QueryLedger)>> = jobs
            .par_iter()
            .map(|&(c, j)| {
                let ledger = QueryLedger::sub(Some(per_job));
                let rec = Recorder {
                    inner: victim,
                    seen: Mutex::new(Vec::new()),
                };
                let mut synth = cfg.synth.clone();
                synth.target_class = c;
                synth.seed = SplitMix64::derive(
                    sub_seed(cfg.seed, purpose::SYNTH),
                    &[round as u64, c as u64, j as u64],
                )
                .next_u64();
                match synthesize(&rec, Some(sub as &dyn Model), &synth, &ledger) {
                    Ok(_) | Err(Error::Exhausted) | Err(Error::BudgetTooSmall(_)) => {}
                    Err(e) => return Err(e),
                }
                Ok((rec.into_sorted(), ledger))
            })
            .collect();
        let mut used = 0;
        for r in results {
            let (examples, ledger) = r?;
            self.ledger.absorb(&ledger)?;
            used += ledger.used();
            self.absorb_examples(examples);
        }
        Ok(used)
    }

    fn random_round(&mut self, round: usize, count: u64) -> Result<u64> {
        let count = count.min(self.ledger.remaining().unwrap_or(count));
        if count == 0 {
            return Ok(0);
        }
        let (lo, hi) = self.cfg.synth.clamp;
        let shape = self.victim.input_shape().clone();
        let mut rng = SplitMix64::derive(
            sub_seed(self.cfg.seed, purpose::RANDOM_ARM),
            &[round as u64],
        );
        let batch: Vec<Tensor> = (0..count)
            .map(|_| {
                Tensor::new(
                    shape.clone(),
                    (0..shape.len()).map(|_| rng.uniform(lo, hi)).collect(),
                )
                .expect("finite")
            })
            .collect();
        let outputs = crate::blackbox::query(
            self.victim.inner(),
            &batch,
            self.cfg.topk,
            &self.ledger,
            LABEL_TAG,
        )?;
        let examples = batch
            .into_iter()
            .zip(outputs)
            .map(|(x, target)| Example { x, target })
            .collect();
        self.absorb_examples(examples);
        Ok(count)
    }

    fn finish(self, arm: Arm, truncated: bool) -> ExtractionReport {
        ExtractionReport {
            arm,
            rows: self.rows,
            class_histogram: self.histogram,
            queries_used: self.ledger.used(),
            query_budget: self.cfg.query_budget,
            truncated,
            probe_charged: false,
            n_probe: self.cfg.probe.n_probe,
            final_loss: self.loss,
        }
    }
}

/// Runs one arm. The random arm follows `plan`; the guided arm splits the
/// budget evenly across rounds.
pub fn run_extraction(
    cfg: &ExtractionConfig,
    arm: Arm,
    plan: &RoundPlan,
) -> Result<ExtractionReport> {
    let mut arena = Arena::new(cfg)?;
    let mut truncated = false;
    for round in 1..=cfg.rounds {
        let remaining = arena.ledger.remaining().unwrap_or(0);
        let rounds_left = (cfg.rounds - round + 1) as u64;
        let even = remaining / rounds_left;
        let used = match arm {
            Arm::Guided => arena.guided_round(round, even)?,
            Arm::Random => {
                let want = match plan {
                    RoundPlan::Even => even,
                    RoundPlan::Match(counts) => counts.get(round - 1).copied().unwrap_or(0),
                };
                let got = arena.random_round(round, want)?;
                if got < want {
                    truncated = true;
                }
                got
            }
        };
        if used == 0 {
            log::warn!(
                "round {round} could not afford a single query ({} remaining); \
                 the budget is too small for the synthesis schedule",
                arena.ledger.remaining().unwrap_or(0)
            );
            truncated = true;
            break;
        }
        arena.train(round)?;
        arena.record_row(round);
    }
    Ok(arena.finish(arm, truncated))
}

/// Guided arm first, then the random arm replaying its per-round query
/// counts, so both consume identical budgets.
pub fn compare(cfg: &ExtractionConfig) -> Result<(ExtractionReport, ExtractionReport)> {
    let guided = run_extraction(cfg, Arm::Guided, &RoundPlan::Even)?;
    let counts: Vec<u64> = guided
        .rows
        .windows(2)
        .map(|w| w[1].queries_cum - w[0].queries_cum)
        .collect();
    let random = run_extraction(cfg, Arm::Random, &RoundPlan::Match(counts))?;
    Ok((guided, random))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{Victim, VictimKind};

    fn batch_from(v: &dyn Model, n: usize, seed: u64) -> Vec<Example> {
        let mut r = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                let x = Tensor::new(
                    v.input_shape().clone(),
                    (0..v.input_shape().len()).map(|_| r.next_f64()).collect(),
                )
                .unwrap();
                let target = v.evaluate(&x);
                Example { x, target }
            })
            .collect()
    }

    #[test]
    fn white_box_substitute_is_a_fixed_point() {
        let Victim::Linear(v) = make_victim(&VictimSpec::new(
            VictimKind::LinearSoftmax,
            4,
            3,
            vec![4, 4],
        ))
        .unwrap() else {
            unreachable!()
        };
        let sub = SubstituteModel::from_linear_victim(&v);
        let batch = batch_from(&v, 50, 1);
        assert!(mean_loss(&sub, &batch, LabelMode::Soft) < 1e-12);
        let (after, loss) =
            train_substitute(&sub, &batch, LabelMode::Soft, &TrainConfig::default(), 0).unwrap();
        assert!(loss < 1e-12);
        for (a, b) in after.weights.iter().zip(&sub.weights) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn training_reduces_loss_on_fixed_batch() {
        let mut better = 0;
        for seed in 0..20 {
            let v = make_victim(&VictimSpec::new(
                VictimKind::LinearSoftmax,
                seed,
                4,
                vec![5, 5],
            ))
            .unwrap();
            let batch = batch_from(&v, 64, seed + 100);
            let sub = SubstituteModel::random(4, v.input_shape().clone(), 1.0, 1.0, seed);
            let before = mean_loss(&sub, &batch, LabelMode::Soft);
            let cfg = TrainConfig {
                lr: 0.1,
                epochs_per_round: 200,
                minibatch: 16,
            };
            let (_, after) = train_substitute(&sub, &batch, LabelMode::Soft, &cfg, seed).unwrap();
            better += usize::from(after < before);
        }
        assert!(better >= 19, "{better}/20");
    }

    #[test]
    fn hard_k1_is_one_hot_cross_entropy() {
        let v = make_victim(&VictimSpec::new(VictimKind::LinearSoftmax, 1, 3, vec![6])).unwrap();
        let hard = Wrapped::new(
            &v,
            TopKConfig {
                k: 1,
                mode: LabelMode::Hard,
            },
        )
        .unwrap();
        let batch = batch_from(&hard, 10, 2);
        let sub = SubstituteModel::random(3, v.input_shape().clone(), 1.0, 1.0, 3);
        for e in &batch {
            let c = argmax(&e.target);
            assert_eq!(e.target.iter().filter(|&&t| t == 1.0).count(), 1);
            let s = sub.predict(e.x.data());
            assert!((example_loss(&sub, e, LabelMode::Hard) + s[c].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let v = make_victim(&VictimSpec::new(VictimKind::LinearSoftmax, 1, 3, vec![6])).unwrap();
        let batch = batch_from(&v, 10, 2);
        let sub = SubstituteModel::random(3, v.input_shape().clone(), 1e-3, 1.0, 3);
        let cfg = TrainConfig {
            lr: f64::MAX,
            epochs_per_round: 5,
            minibatch: 2,
        };
        assert!(matches!(
            train_substitute(&sub, &batch, LabelMode::Soft, &cfg, 0),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn probes_are_seeded_and_in_range() {
        let shape = Shape::new(vec![12, 12]).unwrap();
        let a = probe_set(&shape, 20, 9, (0.0, 1.0));
        assert_eq!(a, probe_set(&shape, 20, 9, (0.0, 1.0)));
        assert_ne!(a, probe_set(&shape, 20, 10, (0.0, 1.0)));
        assert!(a
            .iter()
            .flat_map(|t| t.data())
            .all(|v| (0.0..=1.0).contains(v)));
    }
}
