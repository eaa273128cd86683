//! Run configuration: one strict JSON document covering every command.
//!
//! Every field has a default, unknown keys are rejected, and a single master
//! seed feeds every random stream through [`crate::rng::sub_seed`].

use serde::{Deserialize, Serialize};

use crate::blackbox::{LabelMode, TopKConfig, VictimKind, VictimSpec};
use crate::error::{Error, Result};
use crate::explainer::{ExplainConfig, RefinementOrder, Target};
use crate::extraction::{ExtractionConfig, ProbeConfig, TrainConfig};
use crate::grid::AtomGrid;
use crate::masking::{Fill, MaskerSpec};
use crate::objectives::ObjectiveWeights;
use crate::rng::{purpose, sub_seed};
use crate::synthesis::{AfterEnd, DecaySchedule, SearchParams, SynthConfig};
use crate::tensor::{Shape, Tensor};
use crate::tree::PartitionTree;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub seed: u64,
    pub victim: VictimSection,
    pub topk: TopKSection,
    pub masker: MaskerSection,
    pub explainer: ExplainerSection,
    pub synthesis: SynthesisSection,
    pub extraction: ExtractionSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            seed: 0,
            victim: VictimSection::default(),
            topk: TopKSection::default(),
            masker: MaskerSection::default(),
            explainer: ExplainerSection::default(),
            synthesis: SynthesisSection::default(),
            extraction: ExtractionSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VictimSection {
    pub kind: VictimKind,
    pub num_classes: usize,
    pub input_shape: Vec<usize>,
    pub weight_scale: f64,
    pub temperature: Option<f64>,
    pub dead_cell: Option<usize>,
    pub groups: Option<Vec<usize>>,
    pub class_bias: Option<Vec<f64>>,
}

impl Default for VictimSection {
    fn default() -> Self {
        Self {
            kind: VictimKind::LinearSoftmax,
            num_classes: 4,
            input_shape: vec![8, 8],
            weight_scale: 1.0,
            temperature: None,
            dead_cell: None,
            groups: None,
            class_bias: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopKSection {
    /// `None` means every class.
    pub k: Option<usize>,
    pub mode: LabelMode,
}

impl Default for TopKSection {
    fn default() -> Self {
        Self {
            k: None,
            mode: LabelMode::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillKind {
    Blur,
    Mean,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskerSection {
    /// One extent for every axis, or one per axis.
    pub block: Vec<usize>,
    pub fill: FillKind,
    /// Blur sigma; defaults to the largest block extent.
    pub sigma: Option<f64>,
    /// Tensor file for `fill = baseline`; all zeros when absent.
    pub baseline: Option<String>,
}

impl Default for MaskerSection {
    fn default() -> Self {
        Self {
            block: vec![2],
            fill: FillKind::Blur,
            sigma: None,
            baseline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerSection {
    /// `None` is unlimited.
    pub max_evals: Option<u64>,
    /// `None` explains every class.
    pub class: Option<usize>,
    pub order: RefinementOrder,
    /// Tensor file to explain; a seeded uniform input when absent.
    pub input: Option<String>,
}

impl Default for ExplainerSection {
    fn default() -> Self {
        Self {
            max_evals: Some(128),
            class: None,
            order: RefinementOrder::PriorityAbs,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub target_class: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `start:end:max_evals,...`
    pub schedule: String,
    pub after_end: AfterEnd,
    /// Smallest explainer budget a stage may use.
    pub min_max_evals: u64,
    pub population: usize,
    pub mutation_rate: f64,
    pub mutation_scale: f64,
    pub steps: u64,
    pub clamp: [f64; 2],
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let search = SearchParams::default();
        Self {
            target_class: 0,
            alpha: 1.0,
            beta: 0.0,
            schedule: DecaySchedule::default().to_string(),
            after_end: AfterEnd::FreezeShap,
            min_max_evals: 32,
            population: search.population,
            mutation_rate: search.mutation_rate,
            mutation_scale: search.mutation_scale,
            steps: search.steps,
            clamp: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    Guided,
    Random,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub mode: ExtractMode,
    pub query_budget: u64,
    pub rounds: usize,
    pub samples_per_class: usize,
    pub lr: f64,
    pub epochs_per_round: usize,
    pub minibatch: usize,
    pub n_probe: usize,
    /// Derived from the master seed when absent.
    pub probe_seed: Option<u64>,
    pub substitute_temperature: f64,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        Self {
            mode: ExtractMode::Both,
            query_budget: 20_000,
            rounds: 5,
            samples_per_class: 2,
            lr: 1.0,
            epochs_per_round: 3,
            minibatch: 32,
            n_probe: 1000,
            probe_seed: None,
            substitute_temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorFormat {
    Binary,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<String>,
    /// Synthesis trace CSV; `<out>.trace.csv` when absent.
    pub trace: Option<String>,
    pub tensor_format: TensorFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            out: None,
            trace: None,
            tensor_format: TensorFormat::Binary,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {:?} is not supported (expected {SCHEMA_VERSION:?})",
                self.schema_version
            )));
        }
        let spec = self.victim_spec();
        crate::blackbox::make_victim(&spec)?;
        self.topk_config()?;
        self.block()?;
        if let Some(s) = self.masker.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Config(format!("masker sigma {s} must be positive")));
            }
        }
        if let Some(c) = self.explainer.class {
            if c >= self.victim.num_classes {
                return Err(Error::Config(format!("explainer class {c} out of range")));
            }
        }
        let schedule = self.schedule()?;
        if let Some(s) = schedule
            .stages()
            .iter()
            .find(|s| s.max_evals < self.synthesis.min_max_evals)
        {
            return Err(Error::Config(format!(
                "schedule stage {}:{} uses {} evals, below min_max_evals {}",
                s.start, s.end, s.max_evals, self.synthesis.min_max_evals
            )));
        }
        ObjectiveWeights::new(self.synthesis.alpha, self.synthesis.beta)?;
        let e = &self.extraction;
        if e.query_budget == 0 || e.samples_per_class == 0 || e.minibatch == 0 {
            return Err(Error::Config(
                "extraction needs positive query_budget, samples_per_class and minibatch".into(),
            ));
        }
        if !(e.lr.is_finite() && e.lr > 0.0)
            || !(e.substitute_temperature.is_finite() && e.substitute_temperature > 0.0)
        {
            return Err(Error::Config(
                "extraction lr and substitute_temperature must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn victim_spec(&self) -> VictimSpec {
        let v = &self.victim;
        VictimSpec {
            kind: v.kind,
            seed: sub_seed(self.seed, purpose::VICTIM),
            num_classes: v.num_classes,
            input_shape: v.input_shape.clone(),
            weight_scale: v.weight_scale,
            temperature: v.temperature,
            dead_cell: v.dead_cell,
            groups: v.groups.clone(),
            class_bias: v.class_bias.clone(),
        }
    }

    pub fn input_shape(&self) -> Result<Shape> {
        Shape::new(self.victim.input_shape.clone())
    }

    pub fn topk_config(&self) -> Result<TopKConfig> {
        let c = self.victim.num_classes;
        let t = TopKConfig {
            k: self.topk.k.unwrap_or(c),
            mode: self.topk.mode,
        };
        t.validate(c)?;
        Ok(t)
    }

    pub fn block(&self) -> Result<Vec<usize>> {
        let rank = self.victim.input_shape.len();
        match self.masker.block.len() {
            1 => Ok(vec![self.masker.block[0]; rank]),
            n if n == rank => Ok(self.masker.block.clone()),
            n => Err(Error::Config(format!(
                "masker block has {n} extents for a rank-{rank} input"
            ))),
        }
    }

    /// `baseline` is the loaded baseline tensor for `fill = baseline`.
    pub fn masker_spec(&self, baseline: Option<Tensor>) -> Result<MaskerSpec> {
        let grid = AtomGrid::new(self.input_shape()?, &self.block()?)?;
        let fill = match self.masker.fill {
            FillKind::Blur => Fill::Blur {
                sigma: self.masker.sigma.unwrap_or(grid.max_block_extent() as f64),
            },
            FillKind::Mean => Fill::Mean,
            FillKind::Baseline => Fill::Baseline(
                baseline.unwrap_or_else(|| Tensor::filled(grid.input_shape().clone(), 0.0)),
            ),
        };
        MaskerSpec::new(fill, grid)
    }

    pub fn explain_config(&self, masker: MaskerSpec) -> ExplainConfig {
        let tree = PartitionTree::bisect(&masker.grid);
        ExplainConfig {
            max_evals: self.explainer.max_evals,
            masker,
            tree,
            target: self
                .explainer
                .class
                .map_or(Target::AllClasses, Target::Class),
            order: self.explainer.order,
        }
    }

    pub fn schedule(&self) -> Result<DecaySchedule> {
        Ok(self
            .synthesis
            .schedule
            .parse::<DecaySchedule>()?
            .with_after_end(self.synthesis.after_end))
    }

    pub fn synth_config(&self, masker: MaskerSpec) -> Result<SynthConfig> {
        let s = &self.synthesis;
        Ok(SynthConfig {
            target_class: s.target_class,
            weights: ObjectiveWeights::new(s.alpha, s.beta)?,
            schedule: self.schedule()?,
            search: SearchParams {
                population: s.population,
                mutation_rate: s.mutation_rate,
                mutation_scale: s.mutation_scale,
                steps: s.steps,
            },
            seed: sub_seed(self.seed, purpose::SYNTH),
            clamp: (s.clamp[0], s.clamp[1]),
            masker,
            order: self.explainer.order,
        })
    }

    pub fn extraction_config(&self, masker: MaskerSpec) -> Result<ExtractionConfig> {
        let e = &self.extraction;
        Ok(ExtractionConfig {
            victim: self.victim_spec(),
            topk: self.topk_config()?,
            query_budget: e.query_budget,
            rounds: e.rounds,
            samples_per_class: e.samples_per_class,
            synth: self.synth_config(masker)?,
            train: TrainConfig {
                lr: e.lr,
                epochs_per_round: e.epochs_per_round,
                minibatch: e.minibatch,
            },
            probe: ProbeConfig {
                n_probe: e.n_probe,
                seed: e
                    .probe_seed
                    .unwrap_or_else(|| sub_seed(self.seed, purpose::PROBE)),
            },
            substitute_temperature: e.substitute_temperature,
            seed: self.seed,
        })
    }
}
