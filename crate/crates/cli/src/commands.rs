use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::CommandFactory;
use serde_json::json;

use owen_core::blackbox::{make_victim, LabelMode, Model, Victim, VictimKind, Wrapped};
use owen_core::config::{ExtractMode, FillKind, RunConfig, TensorFormat};
use owen_core::explainer::{explain_classes, RefinementOrder};
use owen_core::extraction::{compare, run_extraction, Arm, ExtractionReport, RoundPlan};
use owen_core::format::{decode_any, encode_jsonl, encode_tensor, parse_block};
use owen_core::game::ModelGame;
use owen_core::objectives::normalize_shap;
use owen_core::oracle::{
    exact_owen, exact_shapley, group_uniform_shapley, parse_groups, MAX_SHAPLEY_PLAYERS,
};
use owen_core::rng::{purpose, sub_seed, SplitMix64};
use owen_core::synthesis::{synthesize, trace_csv, AfterEnd};
use owen_core::{Attribution, Error, QueryLedger, Tensor};

use crate::{
    AfterEndArg, CommonArgs, ExplainArgs, ExtractArgs, FillArg, InputArgs, LabelsArg, ModeArg,
    OracleArgs, OracleMethod, OrderArg, SynthArgs, TensorFormatArg,
};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget(String),
    Io(String),
    Usage { message: String, usage: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage { .. } => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Budget(m) | CliError::Io(m) => f.write_str(m),
            CliError::Usage { message, usage } => write!(f, "{message}\n\n{usage}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetTooSmall(_) => CliError::Budget(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_tensor(path: &str) -> CliResult<Tensor> {
    decode_any(&read_bytes(Path::new(path))?).map_err(|e| CliError::Io(format!("{path}: {e}")))
}

fn parse_usize_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("{what} entry {p:?} is not an integer")))
        })
        .collect()
}

/// Defaults, then the config file, then flags.
fn load_config(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(v) = &common.victim {
        cfg.victim.kind = v.parse::<VictimKind>()?;
    }
    if let Some(c) = common.num_classes {
        cfg.victim.num_classes = c;
    }
    if let Some(s) = &common.shape {
        cfg.victim.input_shape = parse_usize_list(s, "shape")?;
    }
    if let Some(b) = &common.block {
        cfg.masker.block = parse_block(b, cfg.victim.input_shape.len())?;
    }
    if let Some(f) = common.fill {
        cfg.masker.fill = match f {
            FillArg::Blur => FillKind::Blur,
            FillArg::Mean => FillKind::Mean,
            FillArg::Baseline => FillKind::Baseline,
        };
    }
    if let Some(s) = common.sigma {
        cfg.masker.sigma = Some(s);
    }
    if let Some(b) = &common.baseline {
        cfg.masker.baseline = Some(b.clone());
    }
    if let Some(k) = &common.topk {
        cfg.topk.k =
            match k.as_str() {
                "all" => None,
                n => Some(n.parse().map_err(|_| {
                    CliError::Config(format!("--topk {n:?} is not `all` or a count"))
                })?),
            };
    }
    if let Some(l) = common.labels {
        cfg.topk.mode = match l {
            LabelsArg::Soft => LabelMode::Soft,
            LabelsArg::Hard => LabelMode::Hard,
            LabelsArg::All => LabelMode::All,
        };
    }
    if let Some(o) = &common.out {
        cfg.output.out = Some(o.clone());
    }
    if let Some(f) = common.tensor_format {
        cfg.output.tensor_format = match f {
            TensorFormatArg::Binary => TensorFormat::Binary,
            TensorFormatArg::Jsonl => TensorFormat::Jsonl,
        };
    }
    Ok(cfg)
}

fn apply_input(cfg: &mut RunConfig, input: &InputArgs) -> CliResult<()> {
    if let Some(p) = &input.input {
        cfg.explainer.input = Some(p.clone());
    }
    if input.random {
        cfg.explainer.input = None;
    }
    if let Some(c) = &input.classes {
        cfg.explainer.class = match c.as_str() {
            "all" => None,
            n => Some(n.parse().map_err(|_| {
                CliError::Config(format!("--classes {n:?} is not `all` or an index"))
            })?),
        };
    }
    Ok(())
}

fn order_of(o: OrderArg) -> RefinementOrder {
    match o {
        OrderArg::Priority => RefinementOrder::PriorityAbs,
        OrderArg::Bfs => RefinementOrder::BreadthFirst,
    }
}

/// Validates, writes `--emit-config` if asked, and returns the output path.
fn finish_config(cfg: &RunConfig, common: &CommonArgs, subcommand: &str) -> CliResult<PathBuf> {
    cfg.validate()?;
    if let Some(path) = &common.emit_config {
        write_bytes(path, cfg.to_json().as_bytes())?;
    }
    match &cfg.output.out {
        Some(o) => Ok(PathBuf::from(o)),
        None => {
            let mut cmd = crate::Cli::command();
            cmd.build();
            let usage = cmd
                .find_subcommand_mut(subcommand)
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            Err(CliError::Usage {
                message: "missing --out".into(),
                usage,
            })
        }
    }
}

fn masker_for(cfg: &RunConfig) -> CliResult<owen_core::masking::MaskerSpec> {
    let baseline = match (&cfg.masker.fill, &cfg.masker.baseline) {
        (FillKind::Baseline, Some(p)) => Some(read_tensor(p)?),
        _ => None,
    };
    Ok(cfg.masker_spec(baseline)?)
}

fn input_for(cfg: &RunConfig, victim: &Victim) -> CliResult<Tensor> {
    let shape = victim.input_shape().clone();
    match &cfg.explainer.input {
        Some(p) => {
            let t = read_tensor(p)?;
            if t.shape() != &shape {
                return Err(CliError::Config(format!(
                    "input {} does not match victim shape {shape}",
                    t.shape()
                )));
            }
            Ok(t)
        }
        None => {
            let [lo, hi] = cfg.synthesis.clamp;
            let mut rng = SplitMix64::new(sub_seed(cfg.seed, purpose::INPUT));
            Ok(Tensor::new(
                shape.clone(),
                (0..shape.len()).map(|_| rng.uniform(lo, hi)).collect(),
            )?)
        }
    }
}

fn attribution_json(a: &Attribution) -> serde_json::Value {
    json!({
        "class": a.class,
        "base_value": a.base_value,
        "full_value": a.full_value,
        "values": a.phi(),
        "normalized": normalize_shap(a).phi(),
        "evals_used": a.evals_used,
    })
}

fn to_pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s.into_bytes()
}

fn document(
    cfg: &RunConfig,
    method: &str,
    grid: &owen_core::AtomGrid,
    evals_used: u64,
    attrs: &[Attribution],
) -> serde_json::Value {
    json!({
        "method": method,
        "seed": cfg.seed,
        "victim": cfg.victim.kind.name(),
        "input_shape": grid.input_shape().dims(),
        "block": grid.block(),
        "shape": grid.atom_dims().dims(),
        "max_evals": cfg.explainer.max_evals,
        "evals_used": evals_used,
        "attributions": attrs.iter().map(attribution_json).collect::<Vec<_>>(),
    })
}

fn classes_of(cfg: &RunConfig) -> Vec<usize> {
    match cfg.explainer.class {
        Some(c) => vec![c],
        None => (0..cfg.victim.num_classes).collect(),
    }
}

pub fn explain(args: ExplainArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.common)?;
    apply_input(&mut cfg, &args.input)?;
    if let Some(m) = &args.max_evals {
        cfg.explainer.max_evals = match m.as_str() {
            "unlimited" => None,
            n => Some(
                n.parse()
                    .map_err(|_| CliError::Config(format!("--max-evals {n:?} is not a count")))?,
            ),
        };
    }
    if let Some(o) = args.order {
        cfg.explainer.order = order_of(o);
    }
    let out = finish_config(&cfg, &args.common, "explain")?;
    if let Some(m) = cfg.explainer.max_evals.filter(|&m| m < 2) {
        return Err(CliError::Budget(Error::BudgetTooSmall(m).to_string()));
    }
    let victim = Wrapped::new(make_victim(&cfg.victim_spec())?, cfg.topk_config()?)?;
    let masker = masker_for(&cfg)?;
    let x = input_for(&cfg, victim.inner())?;
    let ecfg = cfg.explain_config(masker.clone());
    let ledger = QueryLedger::unlimited();
    let attrs = explain_classes(&x, &victim, &ecfg, &ledger, &classes_of(&cfg))?;
    let doc = document(&cfg, "partition", &masker.grid, ledger.used(), &attrs);
    write_bytes(&out, &to_pretty(&doc))
}

pub fn oracle(args: OracleArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.common)?;
    apply_input(&mut cfg, &args.input)?;
    let out = finish_config(&cfg, &args.common, "oracle")?;
    let victim = Wrapped::new(make_victim(&cfg.victim_spec())?, cfg.topk_config()?)?;
    let masker = masker_for(&cfg)?;
    let x = input_for(&cfg, victim.inner())?;
    let n = masker.grid.atom_count();
    let groups = match (args.method, &args.groups) {
        (OracleMethod::Shapley, _) => None,
        (_, Some(g)) => Some(parse_groups(g)?),
        (_, None) => {
            return Err(CliError::Config(
                "--groups is required for owen and group-uniform".into(),
            ))
        }
    };
    let ledger = QueryLedger::unlimited();
    let game = ModelGame::new(&x, &victim, &masker, &ledger, "oracle")?;
    let mut attrs = Vec::new();
    let mut divergence = Vec::new();
    for c in classes_of(&cfg) {
        let g = game.class_game(c);
        let mut a = match (args.method, &groups) {
            (OracleMethod::Shapley, _) => exact_shapley(&g)?,
            (OracleMethod::Owen, Some(gs)) => exact_owen(&g, gs)?,
            (OracleMethod::GroupUniform, Some(gs)) => group_uniform_shapley(&g, gs)?,
            _ => unreachable!("groups checked above"),
        };
        a.class = Some(c);
        if groups.is_some() && n <= MAX_SHAPLEY_PLAYERS {
            let s = exact_shapley(&g)?;
            let d = a
                .phi()
                .iter()
                .zip(s.phi())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            divergence.push(d);
        }
        attrs.push(a);
    }
    for a in &mut attrs {
        a.evals_used = ledger.used();
    }
    let method = match args.method {
        OracleMethod::Shapley => "exact_shapley",
        OracleMethod::Owen => "exact_owen",
        OracleMethod::GroupUniform => "group_uniform",
    };
    let mut doc = document(&cfg, method, &masker.grid, ledger.used(), &attrs);
    doc["max_evals"] = serde_json::Value::Null;
    if let Some(g) = &args.groups {
        doc["groups"] = json!(g);
        if !divergence.is_empty() {
            doc["max_abs_divergence_from_shapley"] = json!(divergence);
        }
    }
    write_bytes(&out, &to_pretty(&doc))
}

fn apply_synth_flags(
    cfg: &mut RunConfig,
    schedule: &Option<String>,
    min_max_evals: Option<u64>,
    steps: Option<u64>,
    population: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
) {
    if let Some(s) = schedule {
        cfg.synthesis.schedule = s.clone();
    }
    if let Some(m) = min_max_evals {
        cfg.synthesis.min_max_evals = m;
    }
    if let Some(s) = steps {
        cfg.synthesis.steps = s;
    }
    if let Some(p) = population {
        cfg.synthesis.population = p;
    }
    if let Some(a) = alpha {
        cfg.synthesis.alpha = a;
    }
    if let Some(b) = beta {
        cfg.synthesis.beta = b;
    }
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.common)?;
    apply_synth_flags(
        &mut cfg,
        &args.schedule,
        args.min_max_evals,
        args.steps,
        args.population,
        args.alpha,
        args.beta,
    );
    if let Some(a) = args.after_end {
        cfg.synthesis.after_end = match a {
            AfterEndArg::FreezeShap => AfterEnd::FreezeShap,
            AfterEndArg::HoldLast => AfterEnd::HoldLast,
        };
    }
    if let Some(t) = args.target_class {
        cfg.synthesis.target_class = t;
    }
    if let Some(r) = args.mutation_rate {
        cfg.synthesis.mutation_rate = r;
    }
    if let Some(s) = args.mutation_scale {
        cfg.synthesis.mutation_scale = s;
    }
    if let Some(o) = args.order {
        cfg.explainer.order = order_of(o);
    }
    if let Some(t) = &args.trace {
        cfg.output.trace = Some(t.clone());
    }
    let out = finish_config(&cfg, &args.common, "synth")?;
    let victim = Wrapped::new(make_victim(&cfg.victim_spec())?, cfg.topk_config()?)?;
    let scfg = cfg.synth_config(masker_for(&cfg)?)?;
    let ledger = QueryLedger::with_budget(args.budget);
    let outcome = synthesize(&victim, None, &scfg, &ledger)?;
    if outcome.truncated {
        log::warn!(
            "synthesis stopped early: query budget exhausted after {} evaluations",
            ledger.used()
        );
    }
    let bytes = match cfg.output.tensor_format {
        TensorFormat::Binary => encode_tensor(&outcome.best),
        TensorFormat::Jsonl => encode_jsonl(&outcome.best).into_bytes(),
    };
    write_bytes(&out, &bytes)?;
    let trace = cfg
        .output
        .trace
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("{}.trace.csv", out.display())));
    write_bytes(&trace, trace_csv(&outcome.trace).as_bytes())
}

fn write_report(dir: &Path, r: &ExtractionReport) -> CliResult<()> {
    write_bytes(
        &dir.join(format!("{}.csv", r.arm.name())),
        r.csv().as_bytes(),
    )?;
    write_bytes(
        &dir.join(format!("{}.json", r.arm.name())),
        &to_pretty(&r.summary_json()),
    )
}

pub fn extract(args: ExtractArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.common)?;
    apply_synth_flags(
        &mut cfg,
        &args.schedule,
        args.min_max_evals,
        args.steps,
        args.population,
        args.alpha,
        args.beta,
    );
    if let Some(m) = args.mode {
        cfg.extraction.mode = match m {
            ModeArg::Guided => ExtractMode::Guided,
            ModeArg::Random => ExtractMode::Random,
            ModeArg::Both => ExtractMode::Both,
        };
    }
    if let Some(b) = args.budget {
        cfg.extraction.query_budget = b;
    }
    if let Some(r) = args.rounds {
        cfg.extraction.rounds = r;
    }
    if let Some(s) = args.samples_per_class {
        cfg.extraction.samples_per_class = s;
    }
    if let Some(l) = args.lr {
        cfg.extraction.lr = l;
    }
    if let Some(e) = args.epochs {
        cfg.extraction.epochs_per_round = e;
    }
    if let Some(n) = args.n_probe {
        cfg.extraction.n_probe = n;
    }
    let out = finish_config(&cfg, &args.common, "extract")?;
    let ecfg = cfg.extraction_config(masker_for(&cfg)?)?;
    let reports = match cfg.extraction.mode {
        ExtractMode::Both => {
            let (g, r) = compare(&ecfg)?;
            vec![g, r]
        }
        ExtractMode::Guided => vec![run_extraction(&ecfg, Arm::Guided, &RoundPlan::Even)?],
        ExtractMode::Random => vec![run_extraction(&ecfg, Arm::Random, &RoundPlan::Even)?],
    };
    for r in &reports {
        write_report(&out, r)?;
    }
    Ok(())
}
