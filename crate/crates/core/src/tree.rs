//! Binary feature hierarchy over the atom lattice.
//!
//! Built by recursive axis-aligned bisection: split the longest axis of the
//! node's atom box (lowest axis index on ties) at `lo + floor(extent / 2)`
//! until every leaf holds exactly one atom. Node ids are preorder indices.

use std::ops::Range;

use crate::coalition::Coalition;
use crate::grid::AtomGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
    pub atoms: Coalition,
    pub depth: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn size(&self) -> usize {
        self.atoms.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
}

impl PartitionTree {
    pub fn bisect(grid: &AtomGrid) -> Self {
        let dims = grid.atom_dims().dims().to_vec();
        let strides = grid.atom_dims().strides();
        let width = grid.atom_count();
        let mut nodes = Vec::with_capacity(2 * width - 1);
        let root_box: Vec<Range<usize>> = dims.iter().map(|&d| 0..d).collect();
        build(&root_box, None, 0, &strides, width, &mut nodes);
        let leaves = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect();
        Self { nodes, leaves }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf ids in preorder.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn width(&self) -> usize {
        self.root().atoms.width()
    }

    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Number of internal nodes at each depth.
    pub fn internal_per_depth(&self) -> Vec<usize> {
        let mut counts = vec![0; self.height() + 1];
        for n in &self.nodes {
            if !n.is_leaf() {
                counts[n.depth] += 1;
            }
        }
        counts
    }
}

fn build(
    bx: &[Range<usize>],
    parent: Option<usize>,
    depth: usize,
    strides: &[usize],
    width: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let atoms = atoms_in_box(bx, strides, width);
    nodes.push(Node {
        id,
        parent,
        children: None,
        atoms,
        depth,
    });
    // longest axis, lowest index wins ties
    let (axis, extent) =
        bx.iter().map(|r| r.len()).enumerate().fold(
            (0, 0),
            |best, (a, e)| if e > best.1 { (a, e) } else { best },
        );
    if extent <= 1 {
        return id;
    }
    let mid = bx[axis].start + extent / 2;
    let mut left = bx.to_vec();
    left[axis].end = mid;
    let mut right = bx.to_vec();
    right[axis].start = mid;
    let l = build(&left, Some(id), depth + 1, strides, width, nodes);
    let r = build(&right, Some(id), depth + 1, strides, width, nodes);
    nodes[id].children = Some((l, r));
    id
}

fn atoms_in_box(bx: &[Range<usize>], strides: &[usize], width: usize) -> Coalition {
    let mut c = Coalition::empty(width);
    let mut coord: Vec<usize> = bx.iter().map(|r| r.start).collect();
    loop {
        c.insert(coord.iter().zip(strides).map(|(x, s)| x * s).sum());
        let mut axis = bx.len();
        loop {
            if axis == 0 {
                return c;
            }
            axis -= 1;
            coord[axis] += 1;
            if coord[axis] < bx[axis].end {
                break;
            }
            coord[axis] = bx[axis].start;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn tree(dims: &[usize], block: &[usize]) -> PartitionTree {
        let g = AtomGrid::new(Shape::new(dims.to_vec()).unwrap(), block).unwrap();
        PartitionTree::bisect(&g)
    }

    fn atoms(t: &PartitionTree, id: usize) -> Vec<usize> {
        t.node(id).atoms.iter().collect()
    }

    #[test]
    fn two_by_two_splits_rows_first() {
        let t = tree(&[6, 6], &[3, 3]);
        assert_eq!(t.len(), 7);
        assert_eq!(t.root().children, Some((1, 4)));
        assert_eq!(atoms(&t, 1), vec![0, 1]);
        assert_eq!(atoms(&t, 2), vec![0]);
        assert_eq!(atoms(&t, 3), vec![1]);
        assert_eq!(atoms(&t, 4), vec![2, 3]);
        assert_eq!(t.leaves(), &[2, 3, 5, 6]);
    }

    #[test]
    fn single_atom_is_a_leaf_root() {
        let t = tree(&[3, 3], &[3, 3]);
        assert_eq!(t.len(), 1);
        assert!(t.root().is_leaf());
        assert_eq!(t.leaves(), &[0]);
    }

    #[test]
    fn eight_in_a_row_is_balanced() {
        let t = tree(&[8], &[1]);
        assert_eq!(t.len(), 15);
        assert_eq!(t.height(), 3);
        assert!(t.leaves().iter().all(|&l| t.node(l).depth == 3));
        let leaf_atoms: Vec<usize> = t.leaves().iter().flat_map(|&l| atoms(&t, l)).collect();
        assert_eq!(leaf_atoms, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn structural_invariants_hold() {
        for (dims, block) in [
            (vec![5, 7], vec![1, 1]),
            (vec![4, 3, 5], vec![1, 2, 2]),
            (vec![13], vec![2]),
        ] {
            let t = tree(&dims, &block);
            let width = t.width();
            assert_eq!(t.root().atoms, Coalition::full(width));
            assert_eq!(t.leaves().len(), width);
            for n in t.nodes() {
                match n.children {
                    Some((l, r)) => {
                        let (l, r) = (t.node(l), t.node(r));
                        assert!(l.atoms.is_disjoint(&r.atoms));
                        assert_eq!(l.atoms.union(&r.atoms), n.atoms);
                        assert_eq!(l.parent, Some(n.id));
                        assert!(l.id == n.id + 1 && r.id > l.id, "preorder ids");
                    }
                    None => assert_eq!(n.size(), 1),
                }
            }
        }
    }
}
