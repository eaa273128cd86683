//! Cooperative games over masker atoms.
//!
//! [`ModelGame`] turns `(x, model, masker)` into a vector-valued game whose
//! value at a coalition is the model's probability vector on the masked
//! input. Evaluations are memoized by coalition; a miss charges the ledger
//! exactly once, a hit is free.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::blackbox::Model;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::masking::{Masker, MaskerSpec};
use crate::tensor::{Shape, Tensor};

/// Scalar cooperative game.
pub trait Game: Sync {
    fn players(&self) -> usize;
    fn value(&self, coalition: &Coalition) -> Result<f64>;

    /// Lattice shape used for the resulting attribution.
    fn atom_shape(&self) -> Shape {
        Shape::new(vec![self.players().max(1)]).expect("non-empty")
    }

    fn class(&self) -> Option<usize> {
        None
    }

    /// Evaluations charged so far.
    fn evals_used(&self) -> u64 {
        0
    }

    /// Hint that all of `coalitions` are about to be read.
    fn prefetch(&self, _coalitions: &[Coalition]) -> Result<()> {
        Ok(())
    }

    /// All `2^n` values indexed by bitmask (bit `i` = player `i`).
    fn table(&self) -> Result<Vec<f64>> {
        let n = self.players();
        assert!(n <= 30, "table() is for small games");
        (0..1u64 << n)
            .into_par_iter()
            .map(|m| self.value(&Coalition::from_mask(n, m)))
            .collect()
    }
}

/// Game given by a function of the player bitmask (`n <= 64`).
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(u64) -> f64 + Sync> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        assert!(n <= 64);
        Self { n, f }
    }
}

impl<F: Fn(u64) -> f64 + Sync> Game for FnGame<F> {
    fn players(&self) -> usize {
        self.n
    }
    fn value(&self, c: &Coalition) -> Result<f64> {
        let mask = c.iter().fold(0u64, |m, i| m | 1 << i);
        Ok((self.f)(mask))
    }
}

/// Game backed by an explicit value table.
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 1 << n);
        Self { n, values }
    }
}

impl Game for TableGame {
    fn players(&self) -> usize {
        self.n
    }
    fn value(&self, c: &Coalition) -> Result<f64> {
        Ok(self.values[c.iter().fold(0usize, |m, i| m | 1 << i)])
    }
    fn table(&self) -> Result<Vec<f64>> {
        Ok(self.values.clone())
    }
}

type Slot = Arc<Mutex<Option<Arc<[f64]>>>>;

pub struct ModelGame<'a> {
    masker: Masker<'a>,
    model: &'a dyn Model,
    ledger: &'a QueryLedger,
    tag: &'a str,
    memo: Mutex<HashMap<Coalition, Slot>>,
    charged: Mutex<u64>,
}

impl<'a> ModelGame<'a> {
    pub fn new(
        x: &Tensor,
        model: &'a dyn Model,
        spec: &'a MaskerSpec,
        ledger: &'a QueryLedger,
        tag: &'a str,
    ) -> Result<Self> {
        if x.shape() != model.input_shape() {
            return Err(Error::Shape(format!(
                "input {} does not match model {}",
                x.shape(),
                model.input_shape()
            )));
        }
        Ok(Self {
            masker: Masker::new(x, spec)?,
            model,
            ledger,
            tag,
            memo: Mutex::new(HashMap::new()),
            charged: Mutex::new(0),
        })
    }

    pub fn players(&self) -> usize {
        self.masker.grid().atom_count()
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn masker(&self) -> &Masker<'a> {
        &self.masker
    }

    pub fn ledger(&self) -> &QueryLedger {
        self.ledger
    }

    pub fn evals(&self) -> u64 {
        *self.charged.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn slot(&self, c: &Coalition) -> Slot {
        let mut memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
        memo.entry(c.clone()).or_default().clone()
    }

    pub fn is_cached(&self, c: &Coalition) -> bool {
        let memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
        memo.get(c)
            .is_some_and(|s| s.lock().unwrap_or_else(|e| e.into_inner()).is_some())
    }

    fn charge_one(&self) -> Result<()> {
        self.ledger.charge(1, self.tag)?;
        *self.charged.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        Ok(())
    }

    /// Model output on the masked input.
    pub fn outputs(&self, c: &Coalition) -> Result<Arc<[f64]>> {
        let slot = self.slot(c);
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        self.charge_one()?;
        let masked = self.masker.apply(c)?;
        let out: Arc<[f64]> = self.model.evaluate(&masked).into();
        *guard = Some(out.clone());
        Ok(out)
    }

    fn store(&self, c: &Coalition, buf: &Tensor) -> Result<Arc<[f64]>> {
        let slot = self.slot(c);
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        self.charge_one()?;
        let out: Arc<[f64]> = self.model.evaluate(buf).into();
        *guard = Some(out.clone());
        Ok(out)
    }

    fn ensure_affordable(&self, coalitions: &[Coalition]) -> Result<()> {
        let missing = coalitions.iter().filter(|c| !self.is_cached(c)).count() as u64;
        if missing > 0 && !self.ledger.can_afford(missing) {
            return Err(Error::Exhausted);
        }
        Ok(())
    }

    /// Evaluates every coalition of a small game, walking each chunk of the
    /// index space in Gray-code order so consecutive inputs differ by one
    /// atom and the masked buffer is patched instead of rebuilt.
    pub fn output_table(&self) -> Result<Vec<Arc<[f64]>>> {
        let n = self.players();
        if n > 24 {
            return Err(Error::TooManyPlayers {
                players: n,
                limit: 24,
            });
        }
        let total = 1u64 << n;
        let cached = {
            let memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
            memo.values()
                .filter(|s| s.lock().unwrap_or_else(|e| e.into_inner()).is_some())
                .count() as u64
        };
        if !self.ledger.can_afford(total.saturating_sub(cached)) {
            return Err(Error::Exhausted);
        }
        let chunk = 1u64 << n.min(10);
        let chunks: Vec<Vec<(u64, Arc<[f64]>)>> = (0..total.div_ceil(chunk))
            .into_par_iter()
            .map(|ci| -> Result<Vec<(u64, Arc<[f64]>)>> {
                let start = ci * chunk;
                let end = (start + chunk).min(total);
                let gray = |i: u64| i ^ (i >> 1);
                let mut c = Coalition::from_mask(n, gray(start));
                let mut buf = self.masker.reference().clone();
                self.masker.apply_into(&c, &mut buf)?;
                let mut out = Vec::with_capacity((end - start) as usize);
                for i in start..end {
                    if i > start {
                        let flipped = (gray(i) ^ gray(i - 1)).trailing_zeros() as usize;
                        let on = !c.contains(flipped);
                        if on {
                            c.insert(flipped)
                        } else {
                            c.remove(flipped)
                        }
                        self.masker.set_atom(&mut buf, flipped, on);
                    }
                    out.push((gray(i), self.store(&c, &buf)?));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut table: Vec<Option<Arc<[f64]>>> = vec![None; total as usize];
        for (m, v) in chunks.into_iter().flatten() {
            table[m as usize] = Some(v);
        }
        Ok(table
            .into_iter()
            .map(|v| v.expect("gray code covers every mask"))
            .collect())
    }

    pub fn class_game(&self, class: usize) -> ClassGame<'_, 'a> {
        assert!(class < self.num_classes());
        ClassGame { game: self, class }
    }
}

/// One class's coordinate of a [`ModelGame`].
pub struct ClassGame<'g, 'a> {
    game: &'g ModelGame<'a>,
    class: usize,
}

impl Game for ClassGame<'_, '_> {
    fn players(&self) -> usize {
        self.game.players()
    }

    fn value(&self, c: &Coalition) -> Result<f64> {
        Ok(self.game.outputs(c)?[self.class])
    }

    fn atom_shape(&self) -> Shape {
        self.game.masker().grid().atom_dims().clone()
    }

    fn class(&self) -> Option<usize> {
        Some(self.class)
    }

    fn evals_used(&self) -> u64 {
        self.game.evals()
    }

    fn prefetch(&self, coalitions: &[Coalition]) -> Result<()> {
        self.game.ensure_affordable(coalitions)?;
        coalitions
            .par_iter()
            .try_for_each(|c| self.game.outputs(c).map(|_| ()))
    }

    fn table(&self) -> Result<Vec<f64>> {
        Ok(self
            .game
            .output_table()?
            .iter()
            .map(|v| v[self.class])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{make_victim, VictimKind, VictimSpec};
    use crate::grid::AtomGrid;
    use crate::masking::Fill;

    #[test]
    fn memo_charges_once_per_coalition() {
        let v = make_victim(&VictimSpec::new(VictimKind::LinearSoftmax, 1, 3, vec![4])).unwrap();
        let x = Tensor::new(v.input_shape().clone(), vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let spec = MaskerSpec::new(Fill::Mean, AtomGrid::identity(x.shape().clone())).unwrap();
        let ledger = QueryLedger::new(100);
        let g = ModelGame::new(&x, &v, &spec, &ledger, "t").unwrap();
        let c = Coalition::from_indices(4, [0, 2]);
        let a = g.outputs(&c).unwrap();
        let b = g.outputs(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ledger.used(), 1);
        let cg = g.class_game(1);
        assert_eq!(cg.value(&c).unwrap(), a[1]);
        assert_eq!(ledger.used(), 1);
    }

    #[test]
    fn gray_table_matches_direct_masking() {
        let v = make_victim(&VictimSpec::new(
            VictimKind::LinearSoftmax,
            2,
            3,
            vec![3, 4],
        ))
        .unwrap();
        let x = Tensor::new(
            v.input_shape().clone(),
            (0..12).map(|i| i as f64 / 11.0).collect(),
        )
        .unwrap();
        let grid = AtomGrid::new(x.shape().clone(), &[1, 2]).unwrap();
        let spec = MaskerSpec::default_blur(grid);
        let ledger = QueryLedger::unlimited();
        let g = ModelGame::new(&x, &v, &spec, &ledger, "t").unwrap();
        let table = g.class_game(2).table().unwrap();
        assert_eq!(ledger.used(), 64);
        let fresh = QueryLedger::unlimited();
        let g2 = ModelGame::new(&x, &v, &spec, &fresh, "t").unwrap();
        for m in 0..64u64 {
            assert_eq!(
                table[m as usize],
                g2.outputs(&Coalition::from_mask(6, m)).unwrap()[2]
            );
        }
        // second table is all memo hits
        g.class_game(0).table().unwrap();
        assert_eq!(ledger.used(), 64);
    }

    #[test]
    fn table_refuses_when_unaffordable() {
        let v = make_victim(&VictimSpec::new(VictimKind::LinearSoftmax, 2, 3, vec![5])).unwrap();
        let x = Tensor::filled(v.input_shape().clone(), 0.5);
        let spec = MaskerSpec::new(Fill::Mean, AtomGrid::identity(x.shape().clone())).unwrap();
        let ledger = QueryLedger::new(31);
        let g = ModelGame::new(&x, &v, &spec, &ledger, "t").unwrap();
        assert_eq!(g.class_game(0).table(), Err(Error::Exhausted));
        assert_eq!(ledger.used(), 0);
    }
}
