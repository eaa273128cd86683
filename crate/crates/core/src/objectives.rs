//! Search and training objectives: the class objective over attributions,
//! attribution normalization, and the clone losses.

use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::error::{Error, Result};

/// Finite stand-in for an infinite loss inside the optimizers.
pub const LOSS_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl ObjectiveWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = Self { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) || self.alpha + self.beta <= 0.0 {
            return Err(Error::Config(format!(
                "objective weights need alpha, beta >= 0 and alpha + beta > 0 (got {}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

/// Sum of the per-atom values.
pub fn class_objective(attr: &Attribution) -> f64 {
    attr.total()
}

/// Scales values by `1 / max|phi|` into `[-1, 1]`; all-zero stays all-zero.
pub fn normalize_shap(attr: &Attribution) -> Attribution {
    let peak = attr.phi().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = attr.clone();
    out.normalized = true;
    if peak > 0.0 {
        let scaled: Vec<f64> = attr.phi().iter().map(|v| v / peak).collect();
        out.values =
            crate::tensor::Tensor::new(attr.values.shape().clone(), scaled).expect("finite");
    }
    out
}

/// `sum_{i in topk} V_i ln(V_i / S_i)` with `0 ln(0/s) = 0`. A positive
/// victim entry against a zero substitute entry gives `+inf` and a warning.
pub fn kl_clone_loss(victim: &[f64], substitute: &[f64], topk: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &i in topk {
        let (v, s) = (victim[i], substitute[i]);
        if v <= 0.0 {
            continue;
        }
        if s <= 0.0 {
            log::warn!("kl_clone_loss: substitute is zero at class {i} where victim has {v}");
            return f64::INFINITY;
        }
        loss += v * (v / s).ln();
    }
    loss
}

/// `-sum_{i in topk} V_i ln S_i`, with the same zero handling as
/// [`kl_clone_loss`].
pub fn ce_clone_loss(victim: &[f64], substitute: &[f64], topk: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &i in topk {
        let (v, s) = (victim[i], substitute[i]);
        if v <= 0.0 {
            continue;
        }
        if s <= 0.0 {
            log::warn!("ce_clone_loss: substitute is zero at class {i} where victim has {v}");
            return f64::INFINITY;
        }
        loss -= v * s.ln();
    }
    loss
}

/// KL over every class.
pub fn disagreement(victim: &[f64], substitute: &[f64]) -> f64 {
    let all: Vec<usize> = (0..victim.len()).collect();
    kl_clone_loss(victim, substitute, &all)
}

/// Caps infinities (and NaN) at [`LOSS_CAP`] so search stays totally ordered.
pub fn saturate(loss: f64) -> f64 {
    if loss.is_nan() {
        LOSS_CAP
    } else {
        loss.min(LOSS_CAP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::Method;
    use crate::rng::SplitMix64;
    use crate::tensor::Shape;
    use proptest::prelude::*;

    fn attr(v: Vec<f64>) -> Attribution {
        let n = v.len();
        Attribution::new(v, Shape::new(vec![n]).unwrap(), 0.1, 0.0, Method::Partition)
    }

    #[test]
    fn normalization() {
        let a = normalize_shap(&attr(vec![2.0, -4.0]));
        assert_eq!(a.phi(), &[0.5, -1.0]);
        assert!(a.normalized);
        assert_eq!(a.base_value, 0.1);
        let z = normalize_shap(&attr(vec![0.0; 3]));
        assert_eq!(z.phi(), &[0.0; 3]);
    }

    #[test]
    fn loss_values() {
        assert!((kl_clone_loss(&[1.0, 0.0], &[0.5, 0.5], &[0, 1]) - 2f64.ln()).abs() < 1e-12);
        let onehot = [0.0, 0.0, 1.0, 0.0];
        let s = [0.25, 0.25, 0.25, 0.25];
        assert!((ce_clone_loss(&onehot, &s, &[2]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(ce_clone_loss(&onehot, &onehot, &[2]), 0.0);
        let hard = [0.5, 0.5, 0.0, 0.0];
        assert!((ce_clone_loss(&hard, &s, &[0, 1]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(kl_clone_loss(&s, &s, &[0, 1, 2, 3]), 0.0);
    }

    #[test]
    fn zero_substitute_is_infinite_then_saturated() {
        let l = kl_clone_loss(&[0.5, 0.5], &[1.0, 0.0], &[0, 1]);
        assert_eq!(l, f64::INFINITY);
        assert_eq!(saturate(l), LOSS_CAP);
        assert_eq!(ce_clone_loss(&[0.0, 1.0], &[1.0, 0.0], &[1]), f64::INFINITY);
        // zero victim mass contributes nothing even against a zero substitute
        assert_eq!(kl_clone_loss(&[1.0, 0.0], &[1.0, 0.0], &[0, 1]), 0.0);
    }

    #[test]
    fn weights_validation() {
        assert!(ObjectiveWeights::new(0.0, 0.0).is_err());
        assert!(ObjectiveWeights::new(-1.0, 2.0).is_err());
        assert!(ObjectiveWeights::new(0.0, 1.0).is_ok());
    }

    fn simplex(r: &mut SplitMix64, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| r.next_f64() + 1e-3).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative_and_zero_on_equal(seed in any::<u64>(), n in 2usize..8) {
            let mut r = SplitMix64::new(seed);
            let v = simplex(&mut r, n);
            let s = simplex(&mut r, n);
            let all: Vec<usize> = (0..n).collect();
            prop_assert!(kl_clone_loss(&v, &s, &all) >= -1e-15);
            prop_assert!(disagreement(&v, &v).abs() < 1e-15);
            prop_assert!(ce_clone_loss(&v, &s, &all) >= 0.0);
        }

        #[test]
        fn normalization_is_idempotent_and_order_preserving(vals in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            let a = normalize_shap(&attr(vals.clone()));
            let b = normalize_shap(&a);
            prop_assert_eq!(a.phi(), b.phi());
            for (x, y) in vals.iter().zip(a.phi()) {
                prop_assert_eq!(x.signum() * (x.abs() > 0.0) as i32 as f64, y.signum() * (y.abs() > 0.0) as i32 as f64);
                prop_assert!(y.abs() <= 1.0);
            }
            let am = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
            prop_assert_eq!(am(&vals), am(a.phi()));
        }
    }
}
