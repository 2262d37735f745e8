//! Hierarchical decompositions of a DAG into nested convex subgraphs.
//!
//! Level 0 holds singletons and the top level holds the whole graph. Each
//! block at level `l + 1` lists its children at level `l` in an order that is
//! topological for the meta-graph formed by the children and the boundary
//! edges between them. Every block is convex: no path leaves a block and
//! re-enters it.

use std::collections::BTreeSet;

use crate::dag::{Dag, EdgeId, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Recursive halving of contiguous ranges of the topological order.
    TopologicalBisection,
    /// Power-of-two aligned quadrants; only for grid DAGs built like [`Dag::grid`].
    GridQuadrant,
}

/// Edges from child `from` to child `to` (positions within the parent's child list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Boundary {
    pub from: usize,
    pub to: usize,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    /// Nodes in global topological order.
    pub nodes: Vec<NodeId>,
    /// Indices into the level below; empty at level 0.
    pub children: Vec<usize>,
    /// Edges with both endpoints inside this block.
    pub internal_edges: Vec<EdgeId>,
    /// Edges between distinct children.
    pub boundaries: Vec<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub blocks: Vec<Subgraph>,
    /// Block index of every node.
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub strategy: Strategy,
    node_count: usize,
    edge_count: usize,
    levels: Vec<Level>,
}

impl Decomposition {
    /// Index of the top level (`L`); `level(L)` is the whole graph.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub(crate) fn check_matches(&self, dag: &Dag) -> Result<()> {
        if self.node_count != dag.node_count() || self.edge_count != dag.edge_count() {
            return Err(Error::DecompositionMismatch(format!(
                "built for {} nodes / {} edges, graph has {} / {}",
                self.node_count,
                self.edge_count,
                dag.node_count(),
                dag.edge_count()
            )));
        }
        for l in 1..self.levels.len() {
            let below = &self.levels[l - 1].assignment;
            for block in &self.levels[l].blocks {
                for b in &block.boundaries {
                    for &e in &b.edges {
                        let (u, v) = dag.edges()[e];
                        if below[u] != block.children[b.from] || below[v] != block.children[b.to] {
                            return Err(Error::DecompositionMismatch(format!(
                                "boundary edge {e} does not join its blocks"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Edges accounted for at level `l`: internal edges of the level-`l`
    /// blocks plus every boundary edge recorded above `l`.
    pub fn edges_at_level(&self, l: usize) -> BTreeSet<EdgeId> {
        let mut set: BTreeSet<EdgeId> = self.levels[l].blocks.iter().flat_map(|b| b.internal_edges.iter().copied()).collect();
        for level in &self.levels[l + 1..] {
            for block in &level.blocks {
                for b in &block.boundaries {
                    set.extend(b.edges.iter().copied());
                }
            }
        }
        set
    }
}

pub fn decompose(dag: &Dag, strategy: Strategy) -> Result<Decomposition> {
    match strategy {
        Strategy::TopologicalBisection => Ok(bisection(dag)),
        Strategy::GridQuadrant => {
            let (w, h) = detect_grid(dag).ok_or_else(|| Error::StrategyMismatch {
                strategy: "grid-quadrant",
                reason: "graph is not a down-right grid".into(),
            })?;
            Ok(quadrants(dag, w, h))
        }
    }
}

/// Finds `(width, height)` such that the edge set equals that of `Dag::grid(width, height)`.
pub fn detect_grid(dag: &Dag) -> Option<(usize, usize)> {
    let n = dag.node_count();
    if n == 0 {
        return None;
    }
    let edges: BTreeSet<_> = dag.edges().iter().copied().collect();
    (1..=n).rev().filter(|w| n.is_multiple_of(*w)).find_map(|w| {
        let g = Dag::grid(w, n / w);
        let ge: BTreeSet<_> = g.edges().iter().copied().collect();
        (ge == edges).then_some((w, n / w))
    })
}

fn levels_for(n: usize) -> usize {
    let mut l = 0;
    while (1usize << l) < n {
        l += 1;
    }
    l
}

fn bisection(dag: &Dag) -> Decomposition {
    let order = dag.topological_order().to_vec();
    let top = levels_for(order.len().max(1));
    // Ranges of the topological order, from the top level down.
    let mut ranges_by_level: Vec<Vec<(usize, usize)>> = vec![vec![(0, order.len())]];
    let mut children_by_level: Vec<Vec<Vec<usize>>> = Vec::new();
    for _ in 0..top {
        let upper = ranges_by_level.last().expect("non-empty");
        let mut lower = Vec::new();
        let mut children = Vec::new();
        for &(a, b) in upper {
            let mut kids = Vec::new();
            if b - a > 1 {
                let mid = a + (b - a).div_ceil(2);
                kids.push(lower.len());
                lower.push((a, mid));
                kids.push(lower.len());
                lower.push((mid, b));
            } else {
                kids.push(lower.len());
                lower.push((a, b));
            }
            children.push(kids);
        }
        children_by_level.push(children);
        ranges_by_level.push(lower);
    }
    ranges_by_level.reverse();
    children_by_level.reverse();
    let node_sets: Vec<Vec<Vec<NodeId>>> =
        ranges_by_level.iter().map(|rs| rs.iter().map(|&(a, b)| order[a..b].to_vec()).collect()).collect();
    assemble(dag, Strategy::TopologicalBisection, node_sets, children_by_level)
}

fn quadrants(dag: &Dag, width: usize, height: usize) -> Decomposition {
    let top = levels_for(width.max(height));
    let pos = dag.order_positions();
    // Rectangles [x0,x1) × [y0,y1) per level, top level first.
    let mut rects_by_level: Vec<Vec<(usize, usize, usize, usize)>> = vec![vec![(0, width, 0, height)]];
    let mut children_by_level: Vec<Vec<Vec<usize>>> = Vec::new();
    for l in (0..top).rev() {
        let half = 1usize << l;
        let upper = rects_by_level.last().expect("non-empty");
        let mut lower = Vec::new();
        let mut children = Vec::new();
        for &(x0, x1, y0, y1) in upper {
            let xs: Vec<(usize, usize)> =
                if x1 - x0 > half { vec![(x0, x0 + half), (x0 + half, x1)] } else { vec![(x0, x1)] };
            let ys: Vec<(usize, usize)> =
                if y1 - y0 > half { vec![(y0, y0 + half), (y0 + half, y1)] } else { vec![(y0, y1)] };
            let mut kids = Vec::new();
            // Row-major over quadrants: TL, TR, BL, BR.
            for &(ya, yb) in &ys {
                for &(xa, xb) in &xs {
                    kids.push(lower.len());
                    lower.push((xa, xb, ya, yb));
                }
            }
            children.push(kids);
        }
        children_by_level.push(children);
        rects_by_level.push(lower);
    }
    rects_by_level.reverse();
    children_by_level.reverse();
    let node_sets = rects_by_level
        .iter()
        .map(|rs| {
            rs.iter()
                .map(|&(x0, x1, y0, y1)| {
                    let mut nodes: Vec<NodeId> =
                        (y0..y1).flat_map(|y| (x0..x1).map(move |x| y * width + x)).collect();
                    nodes.sort_by_key(|&n| pos[n]);
                    nodes
                })
                .collect()
        })
        .collect();
    assemble(dag, Strategy::GridQuadrant, node_sets, children_by_level)
}

/// `node_sets[l][b]` are the nodes of block `b` at level `l` (level 0 first);
/// `children[l][b]` lists children of block `b` at level `l + 1`.
fn assemble(
    dag: &Dag,
    strategy: Strategy,
    node_sets: Vec<Vec<Vec<NodeId>>>,
    children: Vec<Vec<Vec<usize>>>,
) -> Decomposition {
    let n = dag.node_count();
    let mut levels: Vec<Level> = Vec::with_capacity(node_sets.len());
    for (l, sets) in node_sets.into_iter().enumerate() {
        let mut assignment = vec![0; n];
        for (b, nodes) in sets.iter().enumerate() {
            for &v in nodes {
                assignment[v] = b;
            }
        }
        let blocks = sets
            .into_iter()
            .enumerate()
            .map(|(b, nodes)| {
                let inside: BTreeSet<NodeId> = nodes.iter().copied().collect();
                let internal_edges = (0..dag.edge_count())
                    .filter(|&e| inside.contains(&dag.source_of(e)) && inside.contains(&dag.target_of(e)))
                    .collect::<Vec<_>>();
                let kids = if l == 0 { Vec::new() } else { children[l - 1][b].clone() };
                let mut boundaries = Vec::new();
                if l > 0 {
                    let below = &levels[l - 1].assignment;
                    let local = |blk: usize| kids.iter().position(|&k| k == blk);
                    for &e in &internal_edges {
                        let (cu, cv) = (below[dag.source_of(e)], below[dag.target_of(e)]);
                        if cu != cv {
                            let (from, to) = (local(cu).expect("child"), local(cv).expect("child"));
                            match boundaries.iter_mut().find(|bd: &&mut Boundary| bd.from == from && bd.to == to) {
                                Some(bd) => bd.edges.push(e),
                                None => boundaries.push(Boundary { from, to, edges: vec![e] }),
                            }
                        }
                    }
                    boundaries.sort_by_key(|bd| (bd.from, bd.to));
                }
                Subgraph { nodes, children: kids, internal_edges, boundaries }
            })
            .collect();
        levels.push(Level { blocks, assignment });
    }
    Decomposition { strategy, node_count: n, edge_count: dag.edge_count(), levels }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruction_holds(dag: &Dag, d: &Decomposition) {
        let all: BTreeSet<EdgeId> = (0..dag.edge_count()).collect();
        for l in 0..=d.top() {
            assert_eq!(d.edges_at_level(l), all, "level {l}");
        }
        for b in &d.level(0).blocks {
            assert_eq!(b.nodes.len(), 1);
        }
        assert_eq!(d.level(d.top()).blocks.len(), 1);
    }

    #[test]
    fn chain_of_four() {
        let dag = Dag::chain(4);
        let d = decompose(&dag, Strategy::TopologicalBisection).unwrap();
        assert_eq!(d.top(), 2);
        let mid: Vec<_> = d.level(1).blocks.iter().map(|b| b.nodes.clone()).collect();
        assert_eq!(mid, vec![vec![0, 1], vec![2, 3]]);
        let top = &d.level(2).blocks[0];
        assert_eq!(top.boundaries, vec![Boundary { from: 0, to: 1, edges: vec![1] }]);
        reconstruction_holds(&dag, &d);
    }

    #[test]
    fn five_chain_is_balanced() {
        let dag = Dag::chain(5);
        let d = decompose(&dag, Strategy::TopologicalBisection).unwrap();
        let sizes: Vec<_> = d.level(d.top() - 1).blocks.iter().map(|b| b.nodes.len()).collect();
        assert_eq!(sizes, vec![3, 2]);
        for level in d.levels() {
            let s: Vec<_> = level.blocks.iter().map(|b| b.nodes.len()).collect();
            assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1, "{s:?}");
        }
        reconstruction_holds(&dag, &d);
    }

    #[test]
    fn grid_quadrants_four_by_four() {
        let dag = Dag::grid(4, 4);
        let d = decompose(&dag, Strategy::GridQuadrant).unwrap();
        assert_eq!(d.top(), 2);
        let top = &d.level(2).blocks[0];
        assert_eq!(top.children.len(), 4);
        for &c in &top.children {
            assert_eq!(d.level(1).blocks[c].nodes.len(), 4);
        }
        // TL→TR, TL→BL, TR→BR, BL→BR, two edges across each shared side.
        let pairs: Vec<_> = top.boundaries.iter().map(|b| (b.from, b.to, b.edges.len())).collect();
        assert_eq!(pairs, vec![(0, 1, 2), (0, 2, 2), (1, 3, 2), (2, 3, 2)]);
        reconstruction_holds(&dag, &d);
    }

    #[test]
    fn quadrants_on_non_square_grid() {
        let dag = Dag::grid(5, 3);
        let d = decompose(&dag, Strategy::GridQuadrant).unwrap();
        reconstruction_holds(&dag, &d);
    }

    #[test]
    fn quadrant_on_non_grid_fails() {
        let dag = Dag::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(matches!(decompose(&dag, Strategy::GridQuadrant), Err(Error::StrategyMismatch { .. })));
    }

    #[test]
    fn detects_grid_shape() {
        assert_eq!(detect_grid(&Dag::grid(3, 2)), Some((3, 2)));
        assert!(detect_grid(&Dag::new(3, vec![(0, 2)]).unwrap()).is_none());
    }
}
