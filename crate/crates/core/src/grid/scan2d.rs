//! Two-dimensional parallel recursion over power-of-two aligned quadrants.
//!
//! Every merge rule is a row of [`RULES`]: the parent tensor, the block of it
//! being written, and a sum of ordered products of child tensors. A small
//! interpreter evaluates the table for every 2×2 group of blocks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::gates::GridGates;
use super::scan1d::{levels_for, ScanOutput};

/// Child quadrants of a merge, in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quad {
    TL,
    TR,
    BL,
    BR,
}

impl Quad {
    fn index(self) -> usize {
        self as usize
    }

    fn offset(self) -> (usize, usize) {
        match self {
            Quad::TL => (0, 0),
            Quad::TR => (1, 0),
            Quad::BL => (0, 1),
            Quad::BR => (1, 1),
        }
    }
}

/// The eight level tensors plus the gating block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// node → right boundary row
    SRight,
    /// node → bottom boundary column
    SDown,
    /// left row → right row
    TRR,
    /// left row → bottom column
    TRD,
    /// top column → right row
    TDR,
    /// top column → bottom column
    TDD,
    /// left row → node
    MRight,
    /// top column → node
    MDown,
    /// node → node
    G,
}

/// Index set of one axis of a parent block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// Nodes of a child quadrant.
    Nodes(Quad),
    /// Half of a boundary: rows (left/right) or columns (top/bottom).
    Half(usize),
}

pub struct Rule {
    pub target: Kind,
    pub rows: Part,
    pub cols: Part,
    pub terms: &'static [&'static [(Kind, Quad)]],
}

use Kind::*;
use Part::*;
use Quad::*;

macro_rules! rule {
    ($target:expr, $rows:expr, $cols:expr, [$([$(($k:expr, $q:expr)),+]),+]) => {
        Rule { target: $target, rows: $rows, cols: $cols, terms: &[$(&[$(($k, $q)),+]),+] }
    };
}

pub const RULES: &[Rule] = &[
    // Source onto the right boundary.
    rule!(SRight, Nodes(TL), Half(0), [[(SRight, TL), (TRR, TR)]]),
    rule!(SRight, Nodes(TR), Half(0), [[(SRight, TR)]]),
    rule!(SRight, Nodes(TL), Half(1), [[(SRight, TL), (TRD, TR), (TDR, BR)], [(SDown, TL), (TDR, BL), (TRR, BR)]]),
    rule!(SRight, Nodes(TR), Half(1), [[(SDown, TR), (TDR, BR)]]),
    rule!(SRight, Nodes(BL), Half(1), [[(SRight, BL), (TRR, BR)]]),
    rule!(SRight, Nodes(BR), Half(1), [[(SRight, BR)]]),
    // Source onto the bottom boundary.
    rule!(SDown, Nodes(TL), Half(0), [[(SDown, TL), (TDD, BL)]]),
    rule!(SDown, Nodes(BL), Half(0), [[(SDown, BL)]]),
    rule!(SDown, Nodes(TL), Half(1), [[(SRight, TL), (TRD, TR), (TDD, BR)], [(SDown, TL), (TDR, BL), (TRD, BR)]]),
    rule!(SDown, Nodes(TR), Half(1), [[(SDown, TR), (TDD, BR)]]),
    rule!(SDown, Nodes(BL), Half(1), [[(SRight, BL), (TRD, BR)]]),
    rule!(SDown, Nodes(BR), Half(1), [[(SDown, BR)]]),
    // Left boundary → right boundary.
    rule!(TRR, Half(0), Half(0), [[(TRR, TL), (TRR, TR)]]),
    rule!(TRR, Half(0), Half(1), [[(TRR, TL), (TRD, TR), (TDR, BR)], [(TRD, TL), (TDR, BL), (TRR, BR)]]),
    rule!(TRR, Half(1), Half(1), [[(TRR, BL), (TRR, BR)]]),
    // Left boundary → bottom boundary.
    rule!(TRD, Half(0), Half(0), [[(TRD, TL), (TDD, BL)]]),
    rule!(TRD, Half(1), Half(0), [[(TRD, BL)]]),
    rule!(TRD, Half(0), Half(1), [[(TRD, TL), (TDR, BL), (TRD, BR)], [(TRR, TL), (TRD, TR), (TDD, BR)]]),
    rule!(TRD, Half(1), Half(1), [[(TRR, BL), (TRD, BR)]]),
    // Top boundary → right boundary.
    rule!(TDR, Half(0), Half(0), [[(TDR, TL), (TRR, TR)]]),
    rule!(TDR, Half(1), Half(0), [[(TDR, TR)]]),
    rule!(TDR, Half(0), Half(1), [[(TDR, TL), (TRD, TR), (TDR, BR)], [(TDD, TL), (TDR, BL), (TRR, BR)]]),
    rule!(TDR, Half(1), Half(1), [[(TDD, TR), (TDR, BR)]]),
    // Top boundary → bottom boundary.
    rule!(TDD, Half(0), Half(0), [[(TDD, TL), (TDD, BL)]]),
    rule!(TDD, Half(0), Half(1), [[(TDD, TL), (TDR, BL), (TRD, BR)], [(TDR, TL), (TRD, TR), (TDD, BR)]]),
    rule!(TDD, Half(1), Half(1), [[(TDD, TR), (TDD, BR)]]),
    // Mark from the left boundary.
    rule!(MRight, Half(0), Nodes(TL), [[(MRight, TL)]]),
    rule!(MRight, Half(0), Nodes(TR), [[(TRR, TL), (MRight, TR)]]),
    rule!(MRight, Half(0), Nodes(BL), [[(TRD, TL), (MDown, BL)]]),
    rule!(MRight, Half(0), Nodes(BR), [[(TRD, TL), (TDR, BL), (MRight, BR)], [(TRR, TL), (TRD, TR), (MDown, BR)]]),
    rule!(MRight, Half(1), Nodes(BL), [[(MRight, BL)]]),
    rule!(MRight, Half(1), Nodes(BR), [[(TRR, BL), (MRight, BR)]]),
    // Mark from the top boundary.
    rule!(MDown, Half(0), Nodes(TL), [[(MDown, TL)]]),
    rule!(MDown, Half(0), Nodes(TR), [[(TDR, TL), (MRight, TR)]]),
    rule!(MDown, Half(0), Nodes(BL), [[(TDD, TL), (MDown, BL)]]),
    rule!(MDown, Half(0), Nodes(BR), [[(TDR, TL), (TRD, TR), (MDown, BR)], [(TDD, TL), (TDR, BL), (MRight, BR)]]),
    rule!(MDown, Half(1), Nodes(TR), [[(MDown, TR)]]),
    rule!(MDown, Half(1), Nodes(BR), [[(TDD, TR), (MDown, BR)]]),
    // Gating between nodes.
    rule!(G, Nodes(TL), Nodes(TL), [[(G, TL)]]),
    rule!(G, Nodes(TR), Nodes(TR), [[(G, TR)]]),
    rule!(G, Nodes(BL), Nodes(BL), [[(G, BL)]]),
    rule!(G, Nodes(BR), Nodes(BR), [[(G, BR)]]),
    rule!(G, Nodes(TL), Nodes(TR), [[(SRight, TL), (MRight, TR)]]),
    rule!(G, Nodes(TL), Nodes(BL), [[(SDown, TL), (MDown, BL)]]),
    rule!(G, Nodes(TL), Nodes(BR), [[(SRight, TL), (TRD, TR), (MDown, BR)], [(SDown, TL), (TDR, BL), (MRight, BR)]]),
    rule!(G, Nodes(TR), Nodes(BR), [[(SDown, TR), (MDown, BR)]]),
    rule!(G, Nodes(BL), Nodes(BR), [[(SRight, BL), (MRight, BR)]]),
];

/// Generalized gates of one `s × s` block. Nodes are indexed `v * s + u`,
/// boundary rows/columns by their offset within the block.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub size: usize,
    pub tensors: [Mat; 9],
}

impl GridBlock {
    pub fn get(&self, kind: Kind) -> &Mat {
        &self.tensors[kind as usize]
    }

    fn empty(size: usize) -> Self {
        let (n, s) = (size * size, size);
        let shape = |k: Kind| match k {
            SRight | SDown => (n, s),
            TRR | TRD | TDR | TDD => (s, s),
            MRight | MDown => (s, n),
            G => (n, n),
        };
        let kinds = [SRight, SDown, TRR, TRD, TDR, TDD, MRight, MDown, G];
        GridBlock { size, tensors: kinds.map(|k| Mat::zeros(shape(k).0, shape(k).1)) }
    }
}

/// Blocks of one level, row-major over the block grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevelTensors {
    pub level: usize,
    /// Blocks per side.
    pub side: usize,
    pub blocks: Vec<GridBlock>,
}

impl GridLevelTensors {
    /// Level 0 of a square `2^k × 2^k` grid.
    pub fn level0(gates: &GridGates) -> Result<Self> {
        gates.check()?;
        if gates.width != gates.height {
            return Err(Error::Shape(format!("grid {}×{} is not square", gates.width, gates.height)));
        }
        let blocks = (0..gates.node_count())
            .map(|n| {
                let mut b = GridBlock::empty(1);
                let vals = [
                    gates.source_right[n],
                    gates.source_down[n],
                    gates.t_rr[n],
                    gates.t_rd[n],
                    gates.t_dr[n],
                    gates.t_dd[n],
                    gates.mark_right[n],
                    gates.mark_down[n],
                    gates.direct[n],
                ];
                for (t, v) in b.tensors.iter_mut().zip(vals) {
                    t[(0, 0)] = v;
                }
                b
            })
            .collect();
        Ok(GridLevelTensors { level: 0, side: gates.width, blocks })
    }

    pub fn block_size(&self) -> usize {
        1 << self.level
    }

    /// One recursion step: every 2×2 group of blocks becomes one block.
    pub fn merge(&self) -> Self {
        let side = self.side / 2;
        let merge_one = |p: usize| {
            let (px, py) = (p % side, p / side);
            let child = |q: Quad| {
                let (ox, oy) = q.offset();
                &self.blocks[(2 * py + oy) * self.side + 2 * px + ox]
            };
            merge_quad([child(TL), child(TR), child(BL), child(BR)])
        };
        // Small blocks merge faster than a task can be scheduled.
        let blocks = if self.block_size() >= PARALLEL_BLOCK_SIZE {
            (0..side * side).into_par_iter().map(merge_one).collect()
        } else {
            (0..side * side).map(merge_one).collect()
        };
        GridLevelTensors { level: self.level + 1, side, blocks }
    }
}

const PARALLEL_BLOCK_SIZE: usize = 4;

/// Position within the parent block of entry `i` of an axis part.
fn index(part: Part, s: usize, i: usize) -> usize {
    match part {
        Half(h) => h * s + i,
        Nodes(q) => {
            let (qx, qy) = q.offset();
            (qy * s + i / s) * 2 * s + qx * s + i % s
        }
    }
}

fn term_product(children: &[&GridBlock; 4], term: &[(Kind, Quad)]) -> Mat {
    let f = |t: &(Kind, Quad)| children[t.1.index()].get(t.0);
    let mut acc = f(&term[0]).matmul(f(&term[1]));
    for t in &term[2..] {
        acc = acc.matmul(f(t));
    }
    acc
}

fn merge_quad(children: [&GridBlock; 4]) -> GridBlock {
    let s = children[0].size;
    let mut parent = GridBlock::empty(2 * s);
    for rule in RULES {
        let owned;
        let block = match rule.terms {
            [[(k, q)]] => children[q.index()].get(*k),
            [first, rest @ ..] => {
                let mut sum = term_product(&children, first);
                for term in rest {
                    sum.add_assign(&term_product(&children, term));
                }
                owned = sum;
                &owned
            }
            [] => unreachable!("rule without terms"),
        };
        let target = &mut parent.tensors[rule.target as usize];
        for i in 0..block.rows() {
            let r = index(rule.rows, s, i);
            for j in 0..block.cols() {
                target[(r, index(rule.cols, s, j))] = block[(i, j)];
            }
        }
    }
    parent
}

/// Parallel scan of a square grid of side `2^levels`. The gating matrix is
/// indexed by node id `y * side + x`, rows are sources.
pub fn scan_2d(gates: &GridGates, levels: usize) -> Result<ScanOutput> {
    if gates.width != 1 << levels || gates.height != 1 << levels {
        return Err(Error::Length { len: gates.width.max(gates.height), levels });
    }
    let mut t = GridLevelTensors::level0(gates)?;
    let mut merge_levels = 0;
    while t.side > 1 {
        t = t.merge();
        merge_levels += 1;
    }
    let [_, _, _, _, _, _, _, _, g] = t.blocks.swap_remove(0).tensors;
    Ok(ScanOutput { gating: g, merge_levels })
}

/// Pads an arbitrary grid to the enclosing power-of-two square, scans, and
/// returns the gating matrix over the original node ids.
pub fn gating_2d(gates: &GridGates) -> Result<ScanOutput> {
    gates.check()?;
    let levels = levels_for(gates.width.max(gates.height));
    let side = 1 << levels;
    let out = scan_2d(&gates.padded(side, side), levels)?;
    let w = gates.width;
    let map = |n: usize| (n / w) * side + n % w;
    let n = gates.node_count();
    let gating = Mat::from_fn(n, n, |a, b| out.gating[(map(a), map(b))]);
    Ok(ScanOutput { gating, merge_levels: out.merge_levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_all_ones() {
        let out = scan_2d(&GridGates::constant(2, 2, 1.0), 1).unwrap();
        assert_eq!(out.gating[(0, 3)], 2.0);
        assert_eq!(out.gating[(0, 1)], 1.0);
        assert_eq!(out.gating[(3, 0)], 0.0);
        assert_eq!(out.merge_levels, 1);
    }

    #[test]
    fn every_rule_targets_a_valid_block() {
        for rule in RULES {
            let rows_are_nodes = matches!(rule.target, SRight | SDown | G);
            let cols_are_nodes = matches!(rule.target, MRight | MDown | G);
            assert_eq!(matches!(rule.rows, Nodes(_)), rows_are_nodes);
            assert_eq!(matches!(rule.cols, Nodes(_)), cols_are_nodes);
        }
        assert_eq!(RULES.len(), 47);
    }

    #[test]
    fn rejects_unpadded() {
        assert!(matches!(scan_2d(&GridGates::constant(3, 3, 1.0), 2), Err(Error::Length { .. })));
    }
}
