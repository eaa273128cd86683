use serde::{Deserialize, Serialize};

use crate::grid::AtomGrid;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactShapley,
    ExactOwen,
    GroupUniform,
    Partition,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExactShapley => "exact_shapley",
            Method::ExactOwen => "exact_owen",
            Method::GroupUniform => "group_uniform",
            Method::Partition => "partition",
        }
    }
}

/// Per-atom attribution for one class (or one scalar game).
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// One value per atom, shaped like the atom lattice.
    pub values: Tensor,
    /// `v(empty)`.
    pub base_value: f64,
    /// `v(full)`.
    pub full_value: f64,
    pub class: Option<usize>,
    pub evals_used: u64,
    pub method: Method,
    pub normalized: bool,
}

impl Attribution {
    pub fn new(
        values: Vec<f64>,
        shape: Shape,
        base_value: f64,
        full_value: f64,
        method: Method,
    ) -> Self {
        Self {
            values: Tensor::new(shape, values).expect("attribution values are finite"),
            base_value,
            full_value,
            class: None,
            evals_used: 0,
            method,
            normalized: false,
        }
    }

    pub fn phi(&self) -> &[f64] {
        self.values.data()
    }

    pub fn total(&self) -> f64 {
        self.phi().iter().sum()
    }

    /// `|sum(phi) - (v(full) - v(empty))|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.total() - (self.full_value - self.base_value)).abs()
    }

    /// Broadcasts atom values back onto input cells.
    pub fn to_cells(&self, grid: &AtomGrid) -> Tensor {
        let data = (0..grid.input_shape().len())
            .map(|c| self.phi()[grid.atom_of(c)])
            .collect();
        Tensor::new(grid.input_shape().clone(), data).expect("finite")
    }
}
