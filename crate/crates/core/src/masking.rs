//! Turns a coalition of atoms into a concrete model input.
//!
//! Inactive atoms take their cells from a fill reference computed once from
//! the original input (a Gaussian blur of it, a baseline tensor, or its
//! mean), so a masked input depends only on `(x, coalition, spec)`.

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Blur { sigma: f64 },
    Baseline(Tensor),
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskerSpec {
    pub fill: Fill,
    pub grid: AtomGrid,
}

impl MaskerSpec {
    pub fn new(fill: Fill, grid: AtomGrid) -> Result<Self> {
        match &fill {
            Fill::Blur { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                return Err(Error::Config(format!(
                    "blur sigma must be positive, got {sigma}"
                )))
            }
            Fill::Baseline(b) if b.shape() != grid.input_shape() => {
                return Err(Error::Shape(format!(
                    "baseline {} does not match input {}",
                    b.shape(),
                    grid.input_shape()
                )))
            }
            _ => {}
        }
        Ok(Self { fill, grid })
    }

    /// Blur fill with sigma equal to the largest block extent.
    pub fn default_blur(grid: AtomGrid) -> Self {
        let sigma = grid.max_block_extent() as f64;
        Self {
            fill: Fill::Blur { sigma },
            grid,
        }
    }
}

/// Masking state for one input: the original and its fill reference.
#[derive(Debug, Clone)]
pub struct Masker<'a> {
    x: Tensor,
    reference: Tensor,
    grid: &'a AtomGrid,
}

impl<'a> Masker<'a> {
    pub fn new(x: &Tensor, spec: &'a MaskerSpec) -> Result<Self> {
        if x.shape() != spec.grid.input_shape() {
            return Err(Error::Shape(format!(
                "input {} does not match masker grid {}",
                x.shape(),
                spec.grid.input_shape()
            )));
        }
        let reference = match &spec.fill {
            Fill::Blur { sigma } => blur_reference(x, *sigma),
            Fill::Baseline(b) => b.clone(),
            Fill::Mean => Tensor::filled(x.shape().clone(), x.mean()),
        };
        Ok(Self {
            x: x.clone(),
            reference,
            grid: &spec.grid,
        })
    }

    pub fn input(&self) -> &Tensor {
        &self.x
    }

    pub fn reference(&self) -> &Tensor {
        &self.reference
    }

    pub fn grid(&self) -> &AtomGrid {
        self.grid
    }

    pub fn apply(&self, coalition: &Coalition) -> Result<Tensor> {
        let mut out = self.reference.clone();
        self.apply_into(coalition, &mut out)?;
        Ok(out)
    }

    /// Overwrites every cell of `out` according to `coalition`.
    pub fn apply_into(&self, coalition: &Coalition, out: &mut Tensor) -> Result<()> {
        if coalition.width() != self.grid.atom_count() {
            return Err(Error::Width {
                expected: self.grid.atom_count(),
                got: coalition.width(),
            });
        }
        for atom in 0..self.grid.atom_count() {
            self.set_atom(out, atom, coalition.contains(atom));
        }
        Ok(())
    }

    /// Switches one atom of an already-masked buffer on or off.
    pub fn set_atom(&self, out: &mut Tensor, atom: usize, active: bool) {
        let src = if active {
            self.x.data()
        } else {
            self.reference.data()
        };
        let dst = out.data_mut();
        for &c in self.grid.cells(atom) {
            dst[c] = src[c];
        }
    }
}

pub fn apply_mask(x: &Tensor, coalition: &Coalition, spec: &MaskerSpec) -> Result<Tensor> {
    Masker::new(x, spec)?.apply(coalition)
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable Gaussian blur along every axis with clamp-to-edge borders.
pub fn blur_reference(x: &Tensor, sigma: f64) -> Tensor {
    assert!(sigma > 0.0, "sigma must be positive");
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let dims = x.shape().dims().to_vec();
    let strides = x.shape().strides();
    let mut cur = x.data().to_vec();
    let mut next = vec![0.0; cur.len()];
    for (axis, &n) in dims.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        let n = n as i64;
        for (cell, out) in next.iter_mut().enumerate() {
            let pos = (cell / stride) as i64 % n;
            let base = cell - pos as usize * stride;
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let q = (pos + t as i64 - radius).clamp(0, n - 1) as usize;
                acc += w * cur[base + q * stride];
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Tensor::from_parts_unchecked(x.shape().clone(), cur)
}
