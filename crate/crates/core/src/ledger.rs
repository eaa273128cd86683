//! Accounting of black-box evaluations against a hard budget.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

/// Signal that a charge would overrun the budget. Callers stop refining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExhausted {
    pub requested: u64,
    pub remaining: u64,
}

impl fmt::Display for BudgetExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "budget exhausted: requested {}, remaining {}",
            self.requested, self.remaining
        )
    }
}

impl std::error::Error for BudgetExhausted {}

#[derive(Debug, Default)]
struct State {
    used: u64,
    by_tag: BTreeMap<String, u64>,
}

/// Thread-safe evaluation counter. Charges are all-or-nothing, so totals do
/// not depend on how concurrent callers interleave.
#[derive(Debug)]
pub struct QueryLedger {
    budget: Option<u64>,
    state: Mutex<State>,
}

impl QueryLedger {
    pub fn new(budget: u64) -> Self {
        Self {
            budget: Some(budget),
            state: Mutex::default(),
        }
    }

    pub fn unlimited() -> Self {
        Self {
            budget: None,
            state: Mutex::default(),
        }
    }

    pub fn with_budget(budget: Option<u64>) -> Self {
        Self {
            budget,
            state: Mutex::default(),
        }
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn used(&self) -> u64 {
        self.lock().used
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b - self.used())
    }

    pub fn can_afford(&self, n: u64) -> bool {
        self.remaining().is_none_or(|r| n <= r)
    }

    pub fn charge(&self, n: u64, tag: &str) -> Result<u64, BudgetExhausted> {
        assert!(n >= 1, "charges are positive");
        let mut st = self.lock();
        if let Some(b) = self.budget {
            let remaining = b - st.used;
            if n > remaining {
                return Err(BudgetExhausted {
                    requested: n,
                    remaining,
                });
            }
        }
        st.used += n;
        *st.by_tag.entry(tag.to_owned()).or_default() += n;
        Ok(st.used)
    }

    /// Per-tag totals, sorted by tag.
    pub fn log(&self) -> Vec<(String, u64)> {
        self.lock()
            .by_tag
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn tagged(&self, tag: &str) -> u64 {
        self.lock().by_tag.get(tag).copied().unwrap_or(0)
    }

    /// Fresh ledger for a unit of work that will later be merged back with
    /// [`QueryLedger::absorb`].
    pub fn sub(budget: Option<u64>) -> Self {
        Self::with_budget(budget)
    }

    /// Charges everything recorded in `other`, tag by tag, as one atomic step.
    pub fn absorb(&self, other: &QueryLedger) -> Result<u64, BudgetExhausted> {
        let theirs = other.lock();
        let mut st = self.lock();
        if let Some(b) = self.budget {
            let remaining = b - st.used;
            if theirs.used > remaining {
                return Err(BudgetExhausted {
                    requested: theirs.used,
                    remaining,
                });
            }
        }
        st.used += theirs.used;
        for (tag, n) in &theirs.by_tag {
            *st.by_tag.entry(tag.clone()).or_default() += n;
        }
        Ok(st.used)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}
