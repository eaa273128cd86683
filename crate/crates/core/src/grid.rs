//! Tiling of an input tensor into rectangular blocks ("atoms"), the smallest
//! unit the masker can switch on or off.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomGrid {
    input_shape: Shape,
    block: Vec<usize>,
    /// Atoms per axis: `ceil(dim / block)`.
    atom_dims: Shape,
    /// Owning atom of every input cell, row-major.
    cell_atom: Vec<u32>,
    /// Cells of every atom, ascending.
    atom_cells: Vec<Vec<usize>>,
}

impl AtomGrid {
    /// Tiles `input_shape` into blocks of extent `block`. Edge blocks keep
    /// whatever remainder is left (no padding).
    pub fn new(input_shape: Shape, block: &[usize]) -> Result<Self> {
        if block.len() != input_shape.rank() {
            return Err(Error::RankMismatch {
                input: input_shape.rank(),
                block: block.len(),
            });
        }
        if block.contains(&0) {
            return Err(Error::ZeroBlock);
        }
        let atom_dims: Vec<usize> = input_shape
            .dims()
            .iter()
            .zip(block)
            .map(|(&d, &b)| d.div_ceil(b))
            .collect();
        let atom_dims = Shape::new(atom_dims)?;
        if atom_dims.len() > u32::MAX as usize {
            return Err(Error::Shape("too many atoms".into()));
        }

        let rank = input_shape.rank();
        let atom_strides = atom_dims.strides();
        let n_cells = input_shape.len();
        let mut cell_atom = Vec::with_capacity(n_cells);
        let mut atom_cells = vec![Vec::new(); atom_dims.len()];
        let mut coord = vec![0usize; rank];
        for cell in 0..n_cells {
            let atom: usize = (0..rank)
                .map(|a| (coord[a] / block[a]) * atom_strides[a])
                .sum();
            cell_atom.push(atom as u32);
            atom_cells[atom].push(cell);
            // odometer increment, last axis fastest
            for a in (0..rank).rev() {
                coord[a] += 1;
                if coord[a] < input_shape.dims()[a] {
                    break;
                }
                coord[a] = 0;
            }
        }

        Ok(Self {
            input_shape,
            block: block.to_vec(),
            atom_dims,
            cell_atom,
            atom_cells,
        })
    }

    /// One atom per cell.
    pub fn identity(input_shape: Shape) -> Self {
        let block = vec![1; input_shape.rank()];
        Self::new(input_shape, &block).expect("unit blocks always tile")
    }

    pub fn input_shape(&self) -> &Shape {
        &self.input_shape
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    /// Shape of the atom lattice.
    pub fn atom_dims(&self) -> &Shape {
        &self.atom_dims
    }

    pub fn atom_count(&self) -> usize {
        self.atom_cells.len()
    }

    pub fn atom_of(&self, cell: usize) -> usize {
        self.cell_atom[cell] as usize
    }

    pub fn cells(&self, atom: usize) -> &[usize] {
        &self.atom_cells[atom]
    }

    /// Per-axis cell ranges covered by `atom`.
    pub fn cell_ranges(&self, atom: usize) -> Vec<Range<usize>> {
        let strides = self.atom_dims.strides();
        let mut rest = atom;
        strides
            .iter()
            .enumerate()
            .map(|(axis, &s)| {
                let k = rest / s;
                rest %= s;
                let lo = k * self.block[axis];
                let hi = (lo + self.block[axis]).min(self.input_shape.dims()[axis]);
                lo..hi
            })
            .collect()
    }

    /// Largest block extent, the default blur sigma.
    pub fn max_block_extent(&self) -> usize {
        self.block.iter().copied().max().unwrap_or(1)
    }
}
