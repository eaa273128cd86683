//! Gradient-free class-targeted sample synthesis.
//!
//! A seeded (1+λ) elitist evolution strategy maximizes
//! `alpha * ClassObj(explain(x)) + beta * KL(victim(x) || substitute(x))`,
//! with the explainer budget following a [`DecaySchedule`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::Model;
use crate::error::{Error, Result};
use crate::explainer::{refine, RefinementOrder, LEDGER_TAG};
use crate::game::ModelGame;
use crate::ledger::QueryLedger;
use crate::masking::MaskerSpec;
use crate::objectives::{disagreement, saturate, ObjectiveWeights};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;
use crate::tree::PartitionTree;

pub const DISAGREEMENT_TAG: &str = "disagreement";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfterEnd {
    /// Drop the class-objective term.
    FreezeShap,
    /// Keep using the last stage's budget.
    HoldLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub start: u64,
    pub end: u64,
    pub max_evals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    MaxEvals(u64),
    ShapOff,
}

/// Explainer budget per synthesis step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct DecaySchedule {
    stages: Vec<Stage>,
    after_end: AfterEnd,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    stages: String,
    after_end: AfterEnd,
}

impl TryFrom<ScheduleRepr> for DecaySchedule {
    type Error = Error;
    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let mut s: DecaySchedule = r.stages.parse()?;
        s.after_end = r.after_end;
        Ok(s)
    }
}

impl From<DecaySchedule> for ScheduleRepr {
    fn from(s: DecaySchedule) -> Self {
        Self {
            stages: s.to_string(),
            after_end: s.after_end,
        }
    }
}

impl DecaySchedule {
    pub fn new(stages: Vec<Stage>, after_end: AfterEnd) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("schedule needs at least one stage".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if s.end <= s.start || s.max_evals == 0 {
                return Err(Error::Config(format!(
                    "bad schedule stage {}:{}:{}",
                    s.start, s.end, s.max_evals
                )));
            }
            let expected = if i == 0 { 0 } else { stages[i - 1].end };
            if s.start != expected {
                return Err(Error::Config(format!(
                    "schedule stages must be contiguous from 0; stage {i} starts at {} (expected {expected})",
                    s.start
                )));
            }
        }
        Ok(Self { stages, after_end })
    }

    /// Stages of `stage_len` steps, halving from `start_evals` while the
    /// result stays at or above `min_evals`.
    pub fn halving(
        start_evals: u64,
        stage_len: u64,
        min_evals: u64,
        after_end: AfterEnd,
    ) -> Result<Self> {
        if start_evals < min_evals || min_evals == 0 || stage_len == 0 {
            return Err(Error::Config(
                "halving schedule needs start >= min > 0 and a positive stage length".into(),
            ));
        }
        let mut stages = Vec::new();
        let mut evals = start_evals;
        let mut start = 0;
        while evals >= min_evals {
            stages.push(Stage {
                start,
                end: start + stage_len,
                max_evals: evals,
            });
            start += stage_len;
            evals /= 2;
        }
        Self::new(stages, after_end)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn after_end(&self) -> AfterEnd {
        self.after_end
    }

    pub fn with_after_end(mut self, after_end: AfterEnd) -> Self {
        self.after_end = after_end;
        self
    }

    pub fn lookup(&self, step: u64) -> Lookup {
        match self.stages.iter().find(|s| s.start <= step && step < s.end) {
            Some(s) => Lookup::MaxEvals(s.max_evals),
            None => match self.after_end {
                AfterEnd::FreezeShap => Lookup::ShapOff,
                AfterEnd::HoldLast => {
                    Lookup::MaxEvals(self.stages.last().expect("non-empty").max_evals)
                }
            },
        }
    }

    /// Index of the stage in force at `step` (`stages.len()` past the end).
    pub fn stage_index(&self, step: u64) -> usize {
        self.stages
            .iter()
            .position(|s| s.start <= step && step < s.end)
            .unwrap_or(self.stages.len())
    }
}

impl Default for DecaySchedule {
    /// 128, 64, 32 over 500-step stages, then the class term is frozen.
    fn default() -> Self {
        Self::halving(128, 500, 32, AfterEnd::FreezeShap).expect("valid default")
    }
}

impl fmt::Display for DecaySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}:{}", s.start, s.end, s.max_evals)?;
        }
        Ok(())
    }
}

impl FromStr for DecaySchedule {
    type Err = Error;

    /// `start:end:max_evals` stages separated by commas; `after_end`
    /// defaults to freezing the class term.
    fn from_str(s: &str) -> Result<Self> {
        let stages = s
            .split(',')
            .map(|part| {
                let fields: Vec<&str> = part.trim().split(':').collect();
                let [a, b, c] = fields[..] else {
                    return Err(Error::Config(format!(
                        "schedule stage {part:?} is not start:end:max_evals"
                    )));
                };
                let num = |t: &str| {
                    t.trim().parse::<u64>().map_err(|_| {
                        Error::Config(format!(
                            "schedule field {t:?} is not a non-negative integer"
                        ))
                    })
                };
                Ok(Stage {
                    start: num(a)?,
                    end: num(b)?,
                    max_evals: num(c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(stages, AfterEnd::FreezeShap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    /// λ: mutants per step.
    pub population: usize,
    /// Fraction of cells perturbed per mutant.
    pub mutation_rate: f64,
    /// Perturbation std-dev as a fraction of the clamp range.
    pub mutation_scale: f64,
    pub steps: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            population: 4,
            mutation_rate: 0.1,
            mutation_scale: 0.25,
            steps: 1500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub target_class: usize,
    pub weights: ObjectiveWeights,
    pub schedule: DecaySchedule,
    pub search: SearchParams,
    pub seed: u64,
    pub clamp: (f64, f64),
    pub masker: MaskerSpec,
    pub order: RefinementOrder,
}

impl SynthConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        self.weights.validate()?;
        let s = &self.search;
        if s.steps == 0 || s.population == 0 {
            return Err(Error::Config(
                "synthesis needs steps >= 1 and population >= 1".into(),
            ));
        }
        if !(s.mutation_rate > 0.0 && s.mutation_rate <= 1.0) {
            return Err(Error::Config(format!(
                "mutation_rate {} outside (0, 1]",
                s.mutation_rate
            )));
        }
        if !(s.mutation_scale.is_finite() && s.mutation_scale > 0.0) {
            return Err(Error::Config("mutation_scale must be positive".into()));
        }
        let (lo, hi) = self.clamp;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("clamp range [{lo}, {hi}] is empty")));
        }
        if self.target_class >= num_classes {
            return Err(Error::Config(format!(
                "target class {} out of range for {num_classes} classes",
                self.target_class
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    /// Kept-best objective after this step.
    pub objective: f64,
    pub class_obj_term: f64,
    pub disagreement_term: f64,
    pub evals_used_cum: u64,
    /// Explainer budget in force (`None` once the class term is off).
    pub max_evals: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub best: Tensor,
    pub trace: Vec<TraceRow>,
    /// Budget ran out before `steps` completed.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    objective: f64,
    class_term: f64,
    disagreement_term: f64,
}

struct Evaluator<'a> {
    victim: &'a dyn Model,
    substitute: Option<&'a dyn Model>,
    cfg: &'a SynthConfig,
    tree: PartitionTree,
}

impl Evaluator<'_> {
    /// Worst-case ledger charge of one evaluation.
    fn cost(&self, lookup: Lookup) -> u64 {
        let class = match lookup {
            Lookup::MaxEvals(m) if self.cfg.weights.alpha > 0.0 => m,
            _ => 0,
        };
        class + u64::from(self.cfg.weights.beta > 0.0)
    }

    fn score(&self, x: &Tensor, lookup: Lookup, ledger: &QueryLedger) -> Result<Score> {
        let w = self.cfg.weights;
        let mut class_term = 0.0;
        if let (Lookup::MaxEvals(m), true) = (lookup, w.alpha > 0.0) {
            let game = ModelGame::new(x, self.victim, &self.cfg.masker, ledger, LEDGER_TAG)?;
            let c = self.cfg.target_class;
            let r = refine(
                &game,
                &self.tree,
                Some(m),
                self.cfg.order,
                &|s: &[f64]| s[c].abs(),
            )?;
            class_term = r.atom_shares.iter().map(|s| s[c]).sum();
        }
        let mut disagreement_term = 0.0;
        if w.beta > 0.0 {
            ledger.charge(1, DISAGREEMENT_TAG)?;
            let v = self.victim.evaluate(x);
            let s = match self.substitute {
                Some(sub) => sub.evaluate(x),
                None => vec![1.0 / v.len() as f64; v.len()],
            };
            disagreement_term = saturate(disagreement(&v, &s));
        }
        Ok(Score {
            objective: w.alpha * class_term + w.beta * disagreement_term,
            class_term,
            disagreement_term,
        })
    }
}

fn mutate(parent: &Tensor, cfg: &SynthConfig, rng: &mut SplitMix64) -> Tensor {
    let (lo, hi) = cfg.clamp;
    let n = parent.len();
    let m = ((cfg.search.mutation_rate * n as f64).ceil() as usize).clamp(1, n);
    let sigma = cfg.search.mutation_scale * (hi - lo);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates: the first m slots are a uniform m-subset
    for i in 0..m {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut data = parent.data().to_vec();
    for &i in &idx[..m] {
        data[i] = (data[i] + sigma * rng.normal()).clamp(lo, hi);
    }
    Tensor::new(parent.shape().clone(), data).expect("finite mutation")
}

/// Seeded uniform starting sample in the clamp range.
pub fn initial_sample(cfg: &SynthConfig, shape: &crate::tensor::Shape) -> Tensor {
    let (lo, hi) = cfg.clamp;
    let mut rng = SplitMix64::derive(cfg.seed, &[0]);
    Tensor::new(
        shape.clone(),
        (0..shape.len()).map(|_| rng.uniform(lo, hi)).collect(),
    )
    .expect("finite")
}

/// Runs the search. Candidates of a step are scored in parallel against
/// private sub-ledgers whose allotments are fixed in candidate order, so the
/// result does not depend on the worker count.
pub fn synthesize(
    victim: &dyn Model,
    substitute: Option<&dyn Model>,
    cfg: &SynthConfig,
    ledger: &QueryLedger,
) -> Result<SynthOutcome> {
    cfg.validate(victim.num_classes())?;
    if let Some(s) = substitute {
        if s.num_classes() != victim.num_classes() || s.input_shape() != victim.input_shape() {
            return Err(Error::Shape("substitute does not match victim".into()));
        }
    }
    if cfg.masker.grid.input_shape() != victim.input_shape() {
        return Err(Error::Shape(format!(
            "masker grid {} does not match victim input {}",
            cfg.masker.grid.input_shape(),
            victim.input_shape()
        )));
    }
    let eval = Evaluator {
        victim,
        substitute,
        cfg,
        tree: PartitionTree::bisect(&cfg.masker.grid),
    };
    if let Lookup::MaxEvals(m) = cfg.schedule.lookup(0) {
        if cfg.weights.alpha > 0.0 && m < 2 {
            return Err(Error::BudgetTooSmall(m));
        }
    }

    let mut lookup = cfg.schedule.lookup(0);
    if !ledger.can_afford(eval.cost(lookup)) {
        return Err(Error::Exhausted);
    }
    let mut parent = initial_sample(cfg, victim.input_shape());
    let mut best = eval.score(&parent, lookup, ledger)?;
    let mut stage = cfg.schedule.stage_index(0);
    let mut trace = Vec::with_capacity(cfg.search.steps as usize);
    let mut truncated = false;

    for step in 0..cfg.search.steps {
        let now = cfg.schedule.stage_index(step);
        if now != stage {
            // a new stage changes the objective, so the parent is re-scored
            stage = now;
            lookup = cfg.schedule.lookup(step);
            if !ledger.can_afford(eval.cost(lookup)) {
                truncated = true;
                break;
            }
            best = eval.score(&parent, lookup, ledger)?;
        }
        let cost = eval.cost(lookup);
        let affordable = match ledger.remaining() {
            None => cfg.search.population,
            Some(r) => cfg.search.population.min((r / cost.max(1)) as usize),
        };
        if affordable == 0 {
            truncated = true;
            break;
        }
        let candidates: Vec<Tensor> = (0..affordable)
            .map(|i| {
                let mut rng = SplitMix64::derive(cfg.seed, &[1, step, i as u64]);
                mutate(&parent, cfg, &mut rng)
            })
            .collect();
        let scored: Vec<(Result<Score>, QueryLedger)> = candidates
            .par_iter()
            .map(|x| {
                let sub = QueryLedger::sub(Some(cost));
                (eval.score(x, lookup, &sub), sub)
            })
            .collect();
        let mut winner: Option<(usize, Score)> = None;
        for (i, (score, sub)) in scored.into_iter().enumerate() {
            ledger.absorb(&sub)?;
            let score = score?;
            if winner.is_none_or(|(_, w)| score.objective > w.objective) {
                winner = Some((i, score));
            }
        }
        if let Some((i, score)) = winner {
            if score.objective >= best.objective {
                parent = candidates[i].clone();
                best = score;
            }
        }
        trace.push(TraceRow {
            step,
            objective: best.objective,
            class_obj_term: best.class_term,
            disagreement_term: best.disagreement_term,
            evals_used_cum: ledger.used(),
            max_evals: match lookup {
                Lookup::MaxEvals(m) if cfg.weights.alpha > 0.0 => Some(m),
                _ => None,
            },
        });
        if affordable < cfg.search.population {
            truncated = true;
            break;
        }
    }
    Ok(SynthOutcome {
        best: parent,
        trace,
        truncated,
    })
}

/// CSV with header `step,objective,class_obj_term,disagreement_term,evals_used_cum`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,objective,class_obj_term,disagreement_term,evals_used_cum\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{}\n",
            r.step, r.objective, r.class_obj_term, r.disagreement_term, r.evals_used_cum
        ));
    }
    out
}
