//! Exhaustive ground-truth engines: exact Shapley by subset enumeration,
//! exact Owen under a coalition structure, and the uniform group split.
//!
//! All engines read the game through [`Game`], so the same code serves
//! synthetic games in tests and memoized model games in the CLI.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::attribution::{Attribution, Method};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::Game;

/// Hard cap on players for full subset enumeration (`2^20` evaluations).
pub const MAX_SHAPLEY_PLAYERS: usize = 20;
/// Caps on the number of groups and the size of any group.
pub const MAX_GROUPS: usize = 12;
pub const MAX_GROUP_SIZE: usize = 12;

/// `ln k!` for `k = 0..=n`.
pub fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// Shapley weights `s! (n - s - 1)! / n!` for `s = 0..n`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let lf = log_factorials(n);
    (0..n)
        .map(|s| (lf[s] + lf[n - s - 1] - lf[n]).exp())
        .collect()
}

/// Shapley values from a full value table (bit `i` of the index = player `i`).
fn shapley_from_table(n: usize, table: &[f64]) -> Vec<f64> {
    let w = shapley_weights(n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for s in 0..table.len() {
                if s & bit == 0 {
                    acc += w[s.count_ones() as usize] * (table[s | bit] - table[s]);
                }
            }
            acc
        })
        .collect()
}

fn finish(game: &dyn Game, phi: Vec<f64>, base: f64, full: f64, method: Method) -> Attribution {
    let mut a = Attribution::new(phi, game.atom_shape(), base, full, method);
    a.class = game.class();
    a.evals_used = game.evals_used();
    a
}

pub fn exact_shapley(game: &dyn Game) -> Result<Attribution> {
    let n = game.players();
    if n > MAX_SHAPLEY_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: n,
            limit: MAX_SHAPLEY_PLAYERS,
        });
    }
    let table = game.table()?;
    let phi = shapley_from_table(n, &table);
    Ok(finish(
        game,
        phi,
        table[0],
        table[table.len() - 1],
        Method::ExactShapley,
    ))
}

/// Checks that `groups` is a partition of `0..players` within the oracle caps.
pub fn validate_partition(groups: &[Vec<usize>], players: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Partition("no groups".into()));
    }
    if groups.len() > MAX_GROUPS {
        return Err(Error::Partition(format!(
            "{} groups exceeds {MAX_GROUPS}",
            groups.len()
        )));
    }
    let mut owner = vec![None; players];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Partition(format!("group {g} is empty")));
        }
        if members.len() > MAX_GROUP_SIZE {
            return Err(Error::Partition(format!(
                "group {g} has more than {MAX_GROUP_SIZE} members"
            )));
        }
        for &i in members {
            if i >= players {
                return Err(Error::Partition(format!(
                    "atom {i} out of range 0..{players}"
                )));
            }
            if let Some(prev) = owner[i].replace(g) {
                return Err(Error::Partition(format!(
                    "atom {i} in groups {prev} and {g}"
                )));
            }
        }
    }
    if let Some(i) = owner.iter().position(|o| o.is_none()) {
        return Err(Error::Partition(format!("atom {i} is in no group")));
    }
    Ok(())
}

/// Parses `"0,1|2,3"` into groups of atom indices.
pub fn parse_groups(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split('|')
        .map(|g| {
            g.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Partition(format!("bad atom index `{t}` in `{s}`")))
                })
                .collect()
        })
        .collect()
}

fn union_of(groups: &[Vec<usize>], mask: u64, width: usize) -> Coalition {
    let mut c = Coalition::empty(width);
    for (g, members) in groups.iter().enumerate() {
        if mask >> g & 1 == 1 {
            members.iter().for_each(|&i| c.insert(i));
        }
    }
    c
}

/// Two-stage (Owen) value: groups bargain as units, members within a group.
///
/// `phi_i = sum_{Q within other groups} sum_{S within G(i) \ i}
///   w_m(|Q|) w_|G|(|S|) [v(Q u S u i) - v(Q u S)]`.
pub fn exact_owen(game: &dyn Game, groups: &[Vec<usize>]) -> Result<Attribution> {
    let n = game.players();
    validate_partition(groups, n)?;
    let m = groups.len();

    // every coalition the formula touches, evaluated once
    let mut needed: Vec<Coalition> = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        for q in 0..1u64 << m {
            if q >> g & 1 == 1 {
                continue;
            }
            let base = union_of(groups, q, n);
            for s in 0..1u64 << members.len() {
                let mut c = base.clone();
                for (k, &a) in members.iter().enumerate() {
                    if s >> k & 1 == 1 {
                        c.insert(a);
                    }
                }
                needed.push(c);
            }
        }
    }
    needed.sort();
    needed.dedup();
    game.prefetch(&needed)?;
    let values: HashMap<Coalition, f64> = needed
        .into_par_iter()
        .map(|c| game.value(&c).map(|v| (c, v)))
        .collect::<Result<_>>()?;

    let wg = shapley_weights(m);
    let mut phi = vec![0.0; n];
    for (g, members) in groups.iter().enumerate() {
        let wi = shapley_weights(members.len());
        let others: Vec<usize> = (0..m).filter(|&h| h != g).collect();
        for &i in members {
            let rest: Vec<usize> = members.iter().copied().filter(|&a| a != i).collect();
            let mut acc = 0.0;
            for qm in 0..1u64 << others.len() {
                let q: u64 = others
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| qm >> b & 1 == 1)
                    .fold(0, |acc, (_, &h)| acc | 1 << h);
                let base = union_of(groups, q, n);
                let w_q = wg[qm.count_ones() as usize];
                for sm in 0..1u64 << rest.len() {
                    let mut c = base.clone();
                    for (b, &a) in rest.iter().enumerate() {
                        if sm >> b & 1 == 1 {
                            c.insert(a);
                        }
                    }
                    let with = c.with(i);
                    acc += w_q * wi[sm.count_ones() as usize] * (values[&with] - values[&c]);
                }
            }
            phi[i] = acc;
        }
    }
    let base = values[&Coalition::empty(n)];
    let full = values[&Coalition::full(n)];
    Ok(finish(game, phi, base, full, Method::ExactOwen))
}

/// Shapley value of the quotient game over groups, split evenly among
/// each group's members.
pub fn group_uniform_shapley(game: &dyn Game, groups: &[Vec<usize>]) -> Result<Attribution> {
    let n = game.players();
    validate_partition(groups, n)?;
    let m = groups.len();
    let coalitions: Vec<Coalition> = (0..1u64 << m).map(|q| union_of(groups, q, n)).collect();
    game.prefetch(&coalitions)?;
    let table: Vec<f64> = coalitions
        .par_iter()
        .map(|c| game.value(c))
        .collect::<Result<_>>()?;
    let group_phi = shapley_from_table(m, &table);
    let mut phi = vec![0.0; n];
    for (members, gv) in groups.iter().zip(&group_phi) {
        let share = gv / members.len() as f64;
        members.iter().for_each(|&i| phi[i] = share);
    }
    Ok(finish(
        game,
        phi,
        table[0],
        table[table.len() - 1],
        Method::GroupUniform,
    ))
}
