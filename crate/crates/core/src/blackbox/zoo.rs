//! Seeded toy victims. Every victim is reconstructible from its [`VictimSpec`].

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Model};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VictimKind {
    /// `softmax((W x + b) / T)` with Gaussian `W`, `b`.
    LinearSoftmax,
    /// Class score is the mean brightness of a class-owned region.
    QuadrantBright,
    /// Mixture of per-group experts, each a function of its group's
    /// (order-independent) mean; invariant to permutations within a group.
    GroupSymmetric,
    /// `linear_softmax` that never reads one input cell.
    DeadFeature,
    /// `p_c = 1/C + sum_j w_cj tanh(x_j)`: additively separable over cells.
    Additive,
}

impl VictimKind {
    pub const ALL: [VictimKind; 5] = [
        VictimKind::LinearSoftmax,
        VictimKind::QuadrantBright,
        VictimKind::GroupSymmetric,
        VictimKind::DeadFeature,
        VictimKind::Additive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VictimKind::LinearSoftmax => "linear_softmax",
            VictimKind::QuadrantBright => "quadrant_bright",
            VictimKind::GroupSymmetric => "group_symmetric",
            VictimKind::DeadFeature => "dead_feature",
            VictimKind::Additive => "additive",
        }
    }

    fn default_temperature(self) -> f64 {
        match self {
            VictimKind::QuadrantBright => 0.05,
            _ => 1.0,
        }
    }
}

impl FromStr for VictimKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VictimKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownVictim(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VictimSpec {
    pub kind: VictimKind,
    pub seed: u64,
    pub num_classes: usize,
    pub input_shape: Vec<usize>,
    #[serde(default = "one")]
    pub weight_scale: f64,
    /// Kind default when absent (0.05 for `quadrant_bright`, else 1).
    #[serde(default)]
    pub temperature: Option<f64>,
    /// `dead_feature`: the ignored cell (default 0).
    #[serde(default)]
    pub dead_cell: Option<usize>,
    /// `group_symmetric`: sizes of consecutive cell groups (default pairs).
    #[serde(default)]
    pub groups: Option<Vec<usize>>,
    /// `quadrant_bright`: additive per-class score offsets (default zeros).
    #[serde(default)]
    pub class_bias: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl VictimSpec {
    pub fn new(kind: VictimKind, seed: u64, num_classes: usize, input_shape: Vec<usize>) -> Self {
        Self {
            kind,
            seed,
            num_classes,
            input_shape,
            weight_scale: 1.0,
            temperature: None,
            dead_cell: None,
            groups: None,
            class_bias: None,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
            .unwrap_or_else(|| self.kind.default_temperature())
    }
}

/// Concrete victim. Parameters stay public so white-box checks can read them.
#[derive(Debug, Clone)]
pub enum Victim {
    Linear(LinearSoftmax),
    Quadrant(QuadrantBright),
    Group(GroupSymmetric),
    Additive(AdditiveVictim),
}

pub fn make_victim(spec: &VictimSpec) -> Result<Victim> {
    let shape = Shape::new(spec.input_shape.clone())?;
    if spec.num_classes < 2 {
        return Err(Error::Victim("need at least 2 classes".into()));
    }
    let t = spec.temperature();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Victim(format!(
            "temperature must be positive, got {t}"
        )));
    }
    if !(spec.weight_scale.is_finite() && spec.weight_scale > 0.0) {
        return Err(Error::Victim("weight_scale must be positive".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    Ok(match spec.kind {
        VictimKind::LinearSoftmax => {
            Victim::Linear(LinearSoftmax::random(spec, shape, &mut rng, None))
        }
        VictimKind::DeadFeature => {
            let dead = spec.dead_cell.unwrap_or(0);
            if dead >= shape.len() {
                return Err(Error::Victim(format!("dead cell {dead} outside {shape}")));
            }
            Victim::Linear(LinearSoftmax::random(spec, shape, &mut rng, Some(dead)))
        }
        VictimKind::QuadrantBright => Victim::Quadrant(QuadrantBright::new(spec, shape)?),
        VictimKind::GroupSymmetric => Victim::Group(GroupSymmetric::random(spec, shape, &mut rng)?),
        VictimKind::Additive => Victim::Additive(AdditiveVictim::random(spec, shape, &mut rng)),
    })
}

impl Model for Victim {
    fn num_classes(&self) -> usize {
        match self {
            Victim::Linear(m) => m.num_classes(),
            Victim::Quadrant(m) => m.num_classes(),
            Victim::Group(m) => m.num_classes(),
            Victim::Additive(m) => m.num_classes(),
        }
    }
    fn input_shape(&self) -> &Shape {
        match self {
            Victim::Linear(m) => m.input_shape(),
            Victim::Quadrant(m) => m.input_shape(),
            Victim::Group(m) => m.input_shape(),
            Victim::Additive(m) => m.input_shape(),
        }
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        match self {
            Victim::Linear(m) => m.evaluate(x),
            Victim::Quadrant(m) => m.evaluate(x),
            Victim::Group(m) => m.evaluate(x),
            Victim::Additive(m) => m.evaluate(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSoftmax {
    shape: Shape,
    /// Row-major `classes x cells`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub temperature: f64,
    pub dead_cell: Option<usize>,
}

impl LinearSoftmax {
    fn random(spec: &VictimSpec, shape: Shape, rng: &mut SplitMix64, dead: Option<usize>) -> Self {
        let d = shape.len();
        let c = spec.num_classes;
        let w_scale = spec.weight_scale / (d as f64).sqrt();
        let mut weights: Vec<f64> = (0..c * d).map(|_| w_scale * rng.normal()).collect();
        let bias = (0..c)
            .map(|_| 0.1 * spec.weight_scale * rng.normal())
            .collect();
        if let Some(j) = dead {
            for k in 0..c {
                weights[k * d + j] = 0.0;
            }
        }
        Self {
            shape,
            weights,
            bias,
            temperature: spec.temperature(),
            dead_cell: dead,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        self.bias
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let row = &self.weights[k * d..(k + 1) * d];
                let dot: f64 = row
                    .iter()
                    .zip(x)
                    .enumerate()
                    .filter(|(j, _)| Some(*j) != self.dead_cell)
                    .map(|(_, (w, v))| w * v)
                    .sum();
                (dot + b) / self.temperature
            })
            .collect()
    }
}

impl Model for LinearSoftmax {
    fn num_classes(&self) -> usize {
        self.bias.len()
    }
    fn input_shape(&self) -> &Shape {
        &self.shape
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let mut z = self.logits(x.data());
        softmax_in_place(&mut z);
        z
    }
}

#[derive(Debug, Clone)]
pub struct QuadrantBright {
    shape: Shape,
    /// Cells owned by each class.
    pub regions: Vec<Vec<usize>>,
    pub class_bias: Vec<f64>,
    pub temperature: f64,
}

impl QuadrantBright {
    fn new(spec: &VictimSpec, shape: Shape) -> Result<Self> {
        let c = spec.num_classes;
        let dims = shape.dims();
        let mut regions = vec![Vec::new(); c];
        if dims.len() == 1 {
            for j in 0..dims[0] {
                regions[j * c / dims[0]].push(j);
            }
        } else {
            // class c owns tile (c / cols, c % cols) of a rows x cols tiling of axes 0,1
            let cols = (c as f64).sqrt().ceil() as usize;
            let rows = c.div_ceil(cols);
            let (h, w) = (dims[0], dims[1]);
            let inner: usize = dims[2..].iter().product();
            for cell in 0..shape.len() {
                let hw = cell / inner;
                let (y, x) = (hw / w, hw % w);
                let tile = (y * rows / h) * cols + x * cols / w;
                if tile < c {
                    regions[tile].push(cell);
                }
            }
        }
        if let Some(k) = regions.iter().position(|r| r.is_empty()) {
            return Err(Error::Victim(format!(
                "input {shape} too small: class {k} has no region"
            )));
        }
        let class_bias = match &spec.class_bias {
            Some(b) if b.len() == c && b.iter().all(|v| v.is_finite()) => b.clone(),
            Some(b) => {
                return Err(Error::Victim(format!(
                    "class_bias needs {c} finite values, got {b:?}"
                )))
            }
            None => vec![0.0; c],
        };
        Ok(Self {
            shape,
            regions,
            class_bias,
            temperature: spec.temperature(),
        })
    }

    /// Class whose region contains `cell`, if any.
    pub fn owner(&self, cell: usize) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(&cell))
    }
}

impl Model for QuadrantBright {
    fn num_classes(&self) -> usize {
        self.regions.len()
    }
    fn input_shape(&self) -> &Shape {
        &self.shape
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let d = x.data();
        let mut z: Vec<f64> = self
            .regions
            .iter()
            .zip(&self.class_bias)
            .map(|(r, b)| {
                let mean = r.iter().map(|&j| d[j]).sum::<f64>() / r.len() as f64;
                (mean + b) / self.temperature
            })
            .collect();
        softmax_in_place(&mut z);
        z
    }
}

#[derive(Debug, Clone)]
pub struct GroupSymmetric {
    shape: Shape,
    /// Consecutive cell ranges `[start, end)`.
    pub groups: Vec<(usize, usize)>,
    /// Per group: `classes` slopes then `classes` offsets.
    slopes: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
    pub temperature: f64,
    classes: usize,
}

impl GroupSymmetric {
    fn random(spec: &VictimSpec, shape: Shape, rng: &mut SplitMix64) -> Result<Self> {
        let d = shape.len();
        let sizes = match &spec.groups {
            Some(s) => s.clone(),
            None => {
                let mut s = vec![2; d / 2];
                if d % 2 == 1 {
                    s.push(1);
                }
                s
            }
        };
        if sizes.contains(&0) || sizes.iter().sum::<usize>() != d {
            return Err(Error::Victim(format!(
                "group sizes {sizes:?} must be positive and sum to {d}"
            )));
        }
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for s in sizes {
            groups.push((start, start + s));
            start += s;
        }
        let c = spec.num_classes;
        let mut slopes = Vec::new();
        let mut offsets = Vec::new();
        for _ in &groups {
            slopes.push(
                (0..c)
                    .map(|_| 2.0 * spec.weight_scale * rng.normal())
                    .collect(),
            );
            offsets.push((0..c).map(|_| spec.weight_scale * rng.normal()).collect());
        }
        Ok(Self {
            shape,
            groups,
            slopes,
            offsets,
            temperature: spec.temperature(),
            classes: c,
        })
    }

    pub fn group_sets(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(|&(a, b)| (a..b).collect()).collect()
    }
}

impl Model for GroupSymmetric {
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn input_shape(&self) -> &Shape {
        &self.shape
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let d = x.data();
        let total = d.len() as f64;
        let mut out = vec![0.0; self.classes];
        let mut vals = Vec::new();
        for (g, &(a, b)) in self.groups.iter().enumerate() {
            // sorted summation makes the mean exactly permutation invariant
            vals.clear();
            vals.extend_from_slice(&d[a..b]);
            vals.sort_by(f64::total_cmp);
            let mean = vals.iter().sum::<f64>() / (b - a) as f64;
            let mut z: Vec<f64> = self.slopes[g]
                .iter()
                .zip(&self.offsets[g])
                .map(|(s, o)| (s * mean + o) / self.temperature)
                .collect();
            softmax_in_place(&mut z);
            let weight = (b - a) as f64 / total;
            for (acc, p) in out.iter_mut().zip(z) {
                *acc += weight * p;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AdditiveVictim {
    shape: Shape,
    /// Row-major `classes x cells`; columns sum to zero.
    pub weights: Vec<f64>,
    classes: usize,
}

impl AdditiveVictim {
    fn random(spec: &VictimSpec, shape: Shape, rng: &mut SplitMix64) -> Self {
        let d = shape.len();
        let c = spec.num_classes;
        let mut w: Vec<f64> = (0..c * d).map(|_| rng.normal()).collect();
        for j in 0..d {
            let mean = (0..c).map(|k| w[k * d + j]).sum::<f64>() / c as f64;
            for k in 0..c {
                w[k * d + j] -= mean;
            }
        }
        // |sum_j w_cj tanh(x_j)| stays below 0.9 / C, keeping every p_c positive
        let max_row = (0..c)
            .map(|k| w[k * d..(k + 1) * d].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let scale = if max_row > 0.0 {
            spec.weight_scale.min(1.0) * 0.9 / (c as f64 * max_row)
        } else {
            0.0
        };
        w.iter_mut().for_each(|v| *v *= scale);
        Self {
            shape,
            weights: w,
            classes: c,
        }
    }

    /// Closed-form contribution of cell `j` to class `c` when it moves from
    /// `from` to `to`.
    pub fn cell_effect(&self, class: usize, cell: usize, from: f64, to: f64) -> f64 {
        self.weights[class * self.shape.len() + cell] * (to.tanh() - from.tanh())
    }
}

impl Model for AdditiveVictim {
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn input_shape(&self) -> &Shape {
        &self.shape
    }
    fn evaluate(&self, x: &Tensor) -> Vec<f64> {
        let d = x.len();
        let t: Vec<f64> = x.data().iter().map(|v| v.tanh()).collect();
        (0..self.classes)
            .map(|k| {
                let row = &self.weights[k * d..(k + 1) * d];
                1.0 / self.classes as f64 + row.iter().zip(&t).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::check_distribution;

    fn rand_input(shape: &Shape, seed: u64) -> Tensor {
        let mut r = SplitMix64::new(seed);
        Tensor::new(
            shape.clone(),
            (0..shape.len()).map(|_| r.uniform(-1.0, 2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn every_kind_emits_distributions() {
        for kind in VictimKind::ALL {
            let v = make_victim(&VictimSpec::new(kind, 11, 4, vec![4, 4])).unwrap();
            for s in 0..50 {
                check_distribution(&v.evaluate(&rand_input(v.input_shape(), s))).unwrap();
            }
        }
    }

    #[test]
    fn group_symmetric_invariant_under_in_group_swap() {
        let mut spec = VictimSpec::new(VictimKind::GroupSymmetric, 5, 3, vec![4]);
        spec.groups = Some(vec![2, 2]);
        let v = make_victim(&spec).unwrap();
        let x = Tensor::new(v.input_shape().clone(), vec![0.3, -1.2, 0.9, 0.4]).unwrap();
        let swapped = Tensor::new(v.input_shape().clone(), vec![-1.2, 0.3, 0.9, 0.4]).unwrap();
        assert_eq!(v.evaluate(&x), v.evaluate(&swapped));
        let mut spec = VictimSpec::new(VictimKind::GroupSymmetric, 5, 3, vec![7]);
        spec.groups = Some(vec![4, 3]);
        let v = make_victim(&spec).unwrap();
        let a = Tensor::new(
            v.input_shape().clone(),
            vec![0.1, 0.7, 0.3, 0.9, 1.0, 2.0, 3.0],
        )
        .unwrap();
        let b = Tensor::new(
            v.input_shape().clone(),
            vec![0.9, 0.3, 0.1, 0.7, 2.0, 3.0, 1.0],
        )
        .unwrap();
        assert_eq!(v.evaluate(&a), v.evaluate(&b));
    }

    #[test]
    fn dead_feature_is_ignored() {
        let mut spec = VictimSpec::new(VictimKind::DeadFeature, 9, 3, vec![3, 3]);
        spec.dead_cell = Some(5);
        let v = make_victim(&spec).unwrap();
        let x = rand_input(v.input_shape(), 1);
        let mut d = x.data().to_vec();
        for delta in [-5.0, 0.5, 100.0] {
            d[5] = x.data()[5] + delta;
            let y = Tensor::new(x.shape().clone(), d.clone()).unwrap();
            assert_eq!(v.evaluate(&x), v.evaluate(&y));
        }
    }

    #[test]
    fn linear_is_reproducible() {
        let spec = VictimSpec::new(VictimKind::LinearSoftmax, 42, 5, vec![3, 3]);
        let x = rand_input(&Shape::new(vec![3, 3]).unwrap(), 0);
        let a = make_victim(&spec).unwrap().evaluate(&x);
        let b = make_victim(&spec).unwrap().evaluate(&x);
        assert_eq!(a, b);
        let other = make_victim(&VictimSpec { seed: 43, ..spec })
            .unwrap()
            .evaluate(&x);
        assert_ne!(a, other);
    }

    #[test]
    fn quadrants_follow_brightness() {
        let spec = VictimSpec::new(VictimKind::QuadrantBright, 0, 4, vec![12, 12]);
        let Victim::Quadrant(q) = make_victim(&spec).unwrap() else {
            unreachable!()
        };
        assert!(q.regions.iter().all(|r| r.len() == 36));
        assert_eq!(q.owner(0), Some(0));
        assert_eq!(q.owner(11), Some(1));
        assert_eq!(q.owner(12 * 11), Some(2));
        assert_eq!(q.owner(143), Some(3));
        for class in 0..4 {
            let mut d = vec![0.2; 144];
            for &j in &q.regions[class] {
                d[j] = 0.8;
            }
            let p = q.evaluate(&Tensor::new(q.input_shape().clone(), d).unwrap());
            assert_eq!(crate::blackbox::argmax(&p), class);
        }
    }

    #[test]
    fn bad_specs() {
        assert!("resnet".parse::<VictimKind>().is_err());
        let mut s = VictimSpec::new(VictimKind::GroupSymmetric, 0, 2, vec![4]);
        s.groups = Some(vec![3, 3]);
        assert!(make_victim(&s).is_err());
        let mut s = VictimSpec::new(VictimKind::DeadFeature, 0, 2, vec![4]);
        s.dead_cell = Some(4);
        assert!(make_victim(&s).is_err());
        assert!(make_victim(&VictimSpec::new(
            VictimKind::QuadrantBright,
            0,
            4,
            vec![1, 1]
        ))
        .is_err());
    }
}
