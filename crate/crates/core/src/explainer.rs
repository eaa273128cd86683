//! Budget-constrained hierarchical (partition) explainer.
//!
//! Starting from the root of a [`PartitionTree`], nodes are expanded one at a
//! time. Expanding node `P` with children `L`, `R` under context `c` costs the
//! two evaluations `v(c u L)` and `v(c u R)` and splits `P`'s share with the
//! two-player Shapley rule
//!
//! ```text
//! a_L = ((v(c u L) - v(c)) + (v(c u P) - v(c u R))) / 2
//! a_R = ((v(c u R) - v(c)) + (v(c u P) - v(c u L))) / 2
//! ```
//!
//! Children keep the parent's context (sibling masked off). A node's share
//! can differ from its own `v(c u P) - v(c)` by the interaction term it
//! inherited from its parent split; that residual is handed to the children
//! in proportion to `|a_L|`, `|a_R|` (by atom count when both are zero), so
//! the shares on the frontier always sum to `v(full) - v(empty)`.
//!
//! When the budget runs out, every frontier node spreads its share evenly
//! over its atoms.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method};
use crate::blackbox::Model;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::ModelGame;
use crate::ledger::QueryLedger;
use crate::masking::MaskerSpec;
use crate::tensor::Tensor;
use crate::tree::PartitionTree;

/// Shares at or below this magnitude are never refined.
pub const ZERO_DELTA: f64 = 1e-12;

pub const LEDGER_TAG: &str = "explain";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementOrder {
    /// Largest `|share|` first, ties to the smaller preorder id.
    PriorityAbs,
    /// Whole levels, as deep as [`choose_depth`] allows.
    BreadthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Class(usize),
    AllClasses,
}

#[derive(Debug, Clone)]
pub struct ExplainConfig {
    /// `None` is unlimited.
    pub max_evals: Option<u64>,
    pub masker: MaskerSpec,
    pub tree: PartitionTree,
    pub target: Target,
    pub order: RefinementOrder,
}

impl ExplainConfig {
    /// Bisection tree over the masker grid, priority refinement.
    pub fn new(masker: MaskerSpec, max_evals: Option<u64>, target: Target) -> Self {
        let tree = PartitionTree::bisect(&masker.grid);
        Self {
            max_evals,
            masker,
            tree,
            target,
            order: RefinementOrder::PriorityAbs,
        }
    }
}

/// Largest depth whose full expansion fits `max_evals`: the root costs 2 and
/// every internal node expanded above that depth costs 2 more.
pub fn choose_depth(max_evals: u64, tree: &PartitionTree) -> usize {
    let per_depth = tree.internal_per_depth();
    let mut cost = 2u64;
    let mut depth = 0;
    for &internal in &per_depth {
        let next = cost + 2 * internal as u64;
        if internal == 0 || next > max_evals {
            break;
        }
        cost = next;
        depth += 1;
    }
    depth
}

#[derive(Debug, Clone)]
struct FrontierEntry {
    node: usize,
    context: Coalition,
    share: Vec<f64>,
}

/// What a refinement pass produced, before it is cut into per-class
/// attributions.
#[derive(Debug, Clone)]
pub struct Refinement {
    /// `atoms x classes`.
    pub atom_shares: Vec<Vec<f64>>,
    pub base: Vec<f64>,
    pub full: Vec<f64>,
    pub evals_used: u64,
    pub expansions: usize,
    /// Sum of frontier shares (per class) after each expansion, starting
    /// with the root.
    pub frontier_sums: Vec<Vec<f64>>,
    /// Frontier node ids at the end of refinement.
    pub frontier: Vec<usize>,
}

#[derive(PartialEq)]
struct Keyed(f64, usize);

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Runs the refinement on a prepared game. `priority` maps a share vector
/// to the scalar used for ordering and zero-delta pruning.
pub fn refine(
    game: &ModelGame<'_>,
    tree: &PartitionTree,
    max_evals: Option<u64>,
    order: RefinementOrder,
    priority: &dyn Fn(&[f64]) -> f64,
) -> Result<Refinement> {
    if let Some(m) = max_evals {
        if m < 2 {
            return Err(Error::BudgetTooSmall(m));
        }
    }
    if tree.width() != game.players() {
        return Err(Error::Width {
            expected: game.players(),
            got: tree.width(),
        });
    }
    let n = game.players();
    let classes = game.num_classes();
    let empty = Coalition::empty(n);
    let base = game.outputs(&empty)?.to_vec();
    let full = game.outputs(&Coalition::full(n))?.to_vec();

    let max_depth = match (order, max_evals) {
        (RefinementOrder::BreadthFirst, Some(m)) => choose_depth(m, tree),
        _ => usize::MAX,
    };
    let expandable = |e: &FrontierEntry| {
        let node = tree.node(e.node);
        !node.is_leaf() && node.depth < max_depth && priority(&e.share) > ZERO_DELTA
    };

    let mut done: Vec<FrontierEntry> = Vec::new();
    let mut heap: BinaryHeap<(Keyed, usize)> = BinaryHeap::new();
    let mut fifo: VecDeque<usize> = VecDeque::new();
    let mut slots: Vec<Option<FrontierEntry>> = Vec::new();
    let push = |e: FrontierEntry,
                slots: &mut Vec<Option<FrontierEntry>>,
                done: &mut Vec<FrontierEntry>,
                heap: &mut BinaryHeap<(Keyed, usize)>,
                fifo: &mut VecDeque<usize>| {
        if expandable(&e) {
            let key = Keyed(priority(&e.share), e.node);
            slots.push(Some(e));
            let slot = slots.len() - 1;
            match order {
                RefinementOrder::PriorityAbs => heap.push((key, slot)),
                RefinementOrder::BreadthFirst => fifo.push_back(slot),
            }
        } else {
            done.push(e);
        }
    };

    let root = FrontierEntry {
        node: 0,
        context: empty.clone(),
        share: sub(&full, &base),
    };
    let mut frontier_sums = vec![root.share.clone()];
    let mut running = root.share.clone();
    push(root, &mut slots, &mut done, &mut heap, &mut fifo);
    let mut expansions = 0;

    loop {
        let slot = match order {
            RefinementOrder::PriorityAbs => heap.peek().map(|(_, s)| *s),
            RefinementOrder::BreadthFirst => fifo.front().copied(),
        };
        let Some(slot) = slot else { break };
        let entry = slots[slot].as_ref().expect("live slot");
        let (l, r) = tree
            .node(entry.node)
            .children
            .expect("expandable nodes are internal");
        let with_l = entry.context.union(&tree.node(l).atoms);
        let with_r = entry.context.union(&tree.node(r).atoms);
        let needed = [&with_l, &with_r]
            .iter()
            .filter(|c| !game.is_cached(c))
            .count() as u64;
        let used = game.evals();
        if max_evals.is_some_and(|m| used + needed > m) || !game.ledger().can_afford(needed) {
            break;
        }
        match order {
            RefinementOrder::PriorityAbs => {
                heap.pop();
            }
            RefinementOrder::BreadthFirst => {
                fifo.pop_front();
            }
        }
        let entry = slots[slot].take().expect("live slot");
        let v_c = game.outputs(&entry.context)?;
        let v_p = game.outputs(&entry.context.union(&tree.node(entry.node).atoms))?;
        let v_l = game.outputs(&with_l)?;
        let v_r = game.outputs(&with_r)?;
        let (size_l, size_r) = (tree.node(l).size() as f64, tree.node(r).size() as f64);
        let mut share_l = vec![0.0; classes];
        let mut share_r = vec![0.0; classes];
        for k in 0..classes {
            let a_l = 0.5 * ((v_l[k] - v_c[k]) + (v_p[k] - v_r[k]));
            let a_r = 0.5 * ((v_r[k] - v_c[k]) + (v_p[k] - v_l[k]));
            let residual = entry.share[k] - (a_l + a_r);
            let (wl, wr) = (a_l.abs(), a_r.abs());
            let frac_l = if wl + wr > 0.0 {
                wl / (wl + wr)
            } else {
                size_l / (size_l + size_r)
            };
            share_l[k] = a_l + residual * frac_l;
            share_r[k] = entry.share[k] - share_l[k];
        }
        for k in 0..classes {
            running[k] += share_l[k] + share_r[k] - entry.share[k];
        }
        frontier_sums.push(running.clone());
        expansions += 1;
        for (child, share) in [(l, share_l), (r, share_r)] {
            let e = FrontierEntry {
                node: child,
                context: entry.context.clone(),
                share,
            };
            push(e, &mut slots, &mut done, &mut heap, &mut fifo);
        }
    }

    done.extend(slots.into_iter().flatten());
    done.sort_by_key(|e| e.node);
    let mut atom_shares = vec![vec![0.0; classes]; n];
    for e in &done {
        let atoms = &tree.node(e.node).atoms;
        let size = atoms.len() as f64;
        for a in atoms.iter() {
            for (slot, share) in atom_shares[a].iter_mut().zip(&e.share) {
                *slot = share / size;
            }
        }
    }
    Ok(Refinement {
        atom_shares,
        base,
        full,
        evals_used: game.evals(),
        expansions,
        frontier_sums,
        frontier: done.iter().map(|e| e.node).collect(),
    })
}

fn attribution_for(refinement: &Refinement, game: &ModelGame<'_>, class: usize) -> Attribution {
    let values = refinement.atom_shares.iter().map(|s| s[class]).collect();
    let mut a = Attribution::new(
        values,
        game.masker().grid().atom_dims().clone(),
        refinement.base[class],
        refinement.full[class],
        Method::Partition,
    );
    a.class = Some(class);
    a.evals_used = refinement.evals_used;
    a
}

fn check_target(cfg: &ExplainConfig, model: &dyn Model) -> Result<()> {
    if let Target::Class(c) = cfg.target {
        if c >= model.num_classes() {
            return Err(Error::Config(format!(
                "class {c} out of range for {} classes",
                model.num_classes()
            )));
        }
    }
    Ok(())
}

/// Explains `cfg.target` for input `x`. With [`Target::AllClasses`] the
/// returned attribution is for the class the model predicts on `x`.
pub fn explain(
    x: &Tensor,
    model: &dyn Model,
    cfg: &ExplainConfig,
    ledger: &QueryLedger,
) -> Result<Attribution> {
    explain_traced(x, model, cfg, ledger).map(|(a, _)| a)
}

/// Like [`explain`], also returning the refinement record.
pub fn explain_traced(
    x: &Tensor,
    model: &dyn Model,
    cfg: &ExplainConfig,
    ledger: &QueryLedger,
) -> Result<(Attribution, Refinement)> {
    check_target(cfg, model)?;
    let game = ModelGame::new(x, model, &cfg.masker, ledger, LEDGER_TAG)?;
    let class = match cfg.target {
        Target::Class(c) => c,
        Target::AllClasses => {
            let out = game.outputs(&Coalition::full(game.players()))?;
            crate::blackbox::argmax(&out)
        }
    };
    let refinement = refine(
        &game,
        &cfg.tree,
        cfg.max_evals,
        cfg.order,
        &|s: &[f64]| s[class].abs(),
    )?;
    let a = attribution_for(&refinement, &game, class);
    Ok((a, refinement))
}

/// One refinement pass shared by the requested classes, ordered by the L1
/// norm of the share vector. The evaluations, and therefore the ledger
/// charges, do not depend on which classes are requested.
pub fn explain_classes(
    x: &Tensor,
    model: &dyn Model,
    cfg: &ExplainConfig,
    ledger: &QueryLedger,
    classes: &[usize],
) -> Result<Vec<Attribution>> {
    if let Some(&c) = classes.iter().find(|&&c| c >= model.num_classes()) {
        return Err(Error::Config(format!("class {c} out of range")));
    }
    let game = ModelGame::new(x, model, &cfg.masker, ledger, LEDGER_TAG)?;
    let l1 = |s: &[f64]| s.iter().map(|v| v.abs()).sum::<f64>();
    let refinement = refine(&game, &cfg.tree, cfg.max_evals, cfg.order, &l1)?;
    Ok(classes
        .iter()
        .map(|&c| attribution_for(&refinement, &game, c))
        .collect())
}

pub fn explain_all_classes(
    x: &Tensor,
    model: &dyn Model,
    cfg: &ExplainConfig,
    ledger: &QueryLedger,
) -> Result<Vec<Attribution>> {
    let all: Vec<usize> = (0..model.num_classes()).collect();
    explain_classes(x, model, cfg, ledger, &all)
}

/// Mean `|phi_i - phi_j|` over pairs inside each group: a measured stand-in
/// for the within-group homogeneity bound.
pub fn within_group_spread(attr: &Attribution, groups: &[Vec<usize>]) -> Vec<f64> {
    let phi = attr.phi();
    groups
        .iter()
        .map(|g| {
            let mut total = 0.0;
            let mut pairs = 0usize;
            for (k, &i) in g.iter().enumerate() {
                for &j in &g[k + 1..] {
                    total += (phi[i] - phi[j]).abs();
                    pairs += 1;
                }
            }
            if pairs == 0 {
                0.0
            } else {
                total / pairs as f64
            }
        })
        .collect()
}
