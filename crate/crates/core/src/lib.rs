//! Budgeted hierarchical Shapley/Owen attribution for black-box classifiers,
//! and a small model-extraction simulator driven by the attribution signal.
//!
//! The building blocks, bottom-up:
//!
//! - [`tensor`], [`grid`], [`coalition`], [`tree`], [`ledger`], [`rng`]: value types.
//! - [`blackbox`]: the model trait, top-k label wrappers and seeded toy victims.
//! - [`masking`]: coalition to model input (blur, baseline or mean fill).
//! - [`game`] and [`oracle`]: memoized games and exhaustive Shapley/Owen engines.
//! - [`explainer`]: the budget-constrained partition explainer.
//! - [`objectives`], [`synthesis`], [`extraction`]: class-targeted query
//!   synthesis and substitute training.
//! - [`config`], [`format`]: run configuration and file formats.

pub mod attribution;
pub mod blackbox;
pub mod coalition;
pub mod config;
pub mod error;
pub mod explainer;
pub mod extraction;
pub mod format;
pub mod game;
pub mod grid;
pub mod ledger;
pub mod masking;
pub mod objectives;
pub mod oracle;
pub mod rng;
pub mod synthesis;
pub mod tensor;
pub mod tree;

pub use attribution::{Attribution, Method};
pub use coalition::Coalition;
pub use error::{Error, Result};
pub use grid::AtomGrid;
pub use ledger::{BudgetExhausted, QueryLedger};
pub use tensor::{Shape, Tensor};
pub use tree::PartitionTree;
