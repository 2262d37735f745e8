//! Bottom-up construction of the gating matrix over a [`Decomposition`].
//!
//! Each block carries its generalized Source (node → leaving edge),
//! Transition (entering edge → leaving edge), Mark (entering edge → node) and
//! internal gating block. A parent is formed by pushing flows across the
//! boundary edges between its children, visited in their topological order.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dag::{Dag, EdgeId, NodeId};
use crate::decompose::{Decomposition, Subgraph};
use crate::error::Result;
use crate::linalg::Gate;

use super::gating::{add_to, GatingMatrix};
use super::params::Gates;

#[derive(Debug, Clone)]
struct Block<G> {
    nodes: Vec<NodeId>,
    entering: Vec<EdgeId>,
    leaving: Vec<EdgeId>,
    /// `[node][leaving]`
    source: Vec<Vec<Option<G>>>,
    /// `[entering][leaving]`
    transition: Vec<Vec<Option<G>>>,
    /// `[entering][node]`
    mark: Vec<Vec<Option<G>>>,
    /// `[node][node]`
    gating: Vec<Vec<Option<G>>>,
}

fn leaf<G: Gate>(dag: &Dag, gates: &Gates<G>, n: NodeId) -> Block<G> {
    let wrap = |v: &G| Some(v.clone());
    Block {
        nodes: vec![n],
        entering: dag.in_edges(n).to_vec(),
        leaving: dag.out_edges(n).to_vec(),
        source: vec![gates.source[n].iter().map(wrap).collect()],
        transition: gates.transition[n].iter().map(|row| row.iter().map(wrap).collect()).collect(),
        mark: gates.mark[n].iter().map(|m| vec![Some(m.clone())]).collect(),
        gating: vec![vec![Some(gates.direct[n].clone())]],
    }
}

fn index_of(list: &[usize]) -> HashMap<usize, usize> {
    list.iter().enumerate().map(|(i, &x)| (x, i)).collect()
}

/// Pushes a flow that starts on some edges of child `start` through the later
/// children. `flow` maps edge ids to values; `on_mark(child, local_node, value)`
/// receives contributions into nodes of later children.
fn propagate<G: Gate>(
    children: &[&Block<G>],
    start: usize,
    flow: &mut HashMap<EdgeId, G>,
    mut on_mark: impl FnMut(usize, usize, G),
) {
    for (c, child) in children.iter().enumerate().skip(start + 1) {
        let mut out: Vec<Option<G>> = vec![None; child.leaving.len()];
        let mut touched = false;
        for (y, e) in child.entering.iter().enumerate() {
            let Some(f) = flow.get(e) else { continue };
            touched = true;
            for (x, slot) in out.iter_mut().enumerate() {
                if let Some(t) = &child.transition[y][x] {
                    add_to(slot, f.compose(t));
                }
            }
            for (local, m) in child.mark[y].iter().enumerate() {
                if let Some(m) = m {
                    on_mark(c, local, f.compose(m));
                }
            }
        }
        if touched {
            for (x, v) in out.into_iter().enumerate() {
                if let Some(v) = v {
                    flow.insert(child.leaving[x], v);
                }
            }
        }
    }
}

fn merge<G: Gate>(dag: &Dag, children: &[&Block<G>]) -> Block<G> {
    let nodes: Vec<NodeId> = children.iter().flat_map(|c| c.nodes.iter().copied()).collect();
    let inside: std::collections::HashSet<NodeId> = nodes.iter().copied().collect();
    let entering: Vec<EdgeId> = children
        .iter()
        .flat_map(|c| c.entering.iter().copied())
        .filter(|&e| !inside.contains(&dag.source_of(e)))
        .collect();
    let leaving: Vec<EdgeId> = children
        .iter()
        .flat_map(|c| c.leaving.iter().copied())
        .filter(|&e| !inside.contains(&dag.target_of(e)))
        .collect();
    let leaving_idx = index_of(&leaving);
    let offsets: Vec<usize> = children
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.nodes.len();
            Some(o)
        })
        .collect();
    let nn = nodes.len();

    let mut source = vec![vec![None; leaving.len()]; nn];
    let mut gating = vec![vec![None; nn]; nn];
    for (a, child) in children.iter().enumerate() {
        for (local, row) in child.source.iter().enumerate() {
            let p = offsets[a] + local;
            for (q, g) in child.gating[local].iter().enumerate() {
                gating[p][offsets[a] + q] = g.clone();
            }
            let mut flow: HashMap<EdgeId, G> = HashMap::new();
            for (x, s) in row.iter().enumerate() {
                if let Some(s) = s {
                    flow.insert(child.leaving[x], s.clone());
                }
            }
            propagate(children, a, &mut flow, |c, q, v| add_to(&mut gating[p][offsets[c] + q], v));
            for (e, v) in flow {
                if let Some(&x) = leaving_idx.get(&e) {
                    source[p][x] = Some(v);
                }
            }
        }
    }

    let mut transition = vec![vec![None; leaving.len()]; entering.len()];
    let mut mark = vec![vec![None; nn]; entering.len()];
    for (y, &e) in entering.iter().enumerate() {
        let (a, child) = children
            .iter()
            .enumerate()
            .find(|(_, c)| c.nodes.contains(&dag.target_of(e)))
            .expect("entering edge lands in a child");
        let cy = child.entering.iter().position(|&x| x == e).expect("child entering edge");
        for (q, m) in child.mark[cy].iter().enumerate() {
            mark[y][offsets[a] + q] = m.clone();
        }
        let mut flow: HashMap<EdgeId, G> = HashMap::new();
        for (x, t) in child.transition[cy].iter().enumerate() {
            if let Some(t) = t {
                flow.insert(child.leaving[x], t.clone());
            }
        }
        propagate(children, a, &mut flow, |c, q, v| add_to(&mut mark[y][offsets[c] + q], v));
        for (e, v) in flow {
            if let Some(&x) = leaving_idx.get(&e) {
                transition[y][x] = Some(v);
            }
        }
    }

    Block { nodes, entering, leaving, source, transition, mark, gating }
}

/// Gating matrix assembled level by level from singletons to the whole graph.
/// Sibling merges within a level run in parallel.
pub fn gating_matrix_hierarchical<G: Gate>(
    dag: &Dag,
    decomposition: &Decomposition,
    gates: &Gates<G>,
) -> Result<GatingMatrix<G>> {
    gates.check(dag)?;
    decomposition.check_matches(dag)?;
    let mut blocks: Vec<Block<G>> =
        decomposition.level(0).blocks.iter().map(|b: &Subgraph| leaf(dag, gates, b.nodes[0])).collect();
    for l in 1..=decomposition.top() {
        blocks = decomposition
            .level(l)
            .blocks
            .par_iter()
            .map(|b| {
                let kids: Vec<&Block<G>> = b.children.iter().map(|&c| &blocks[c]).collect();
                if kids.len() == 1 {
                    kids[0].clone()
                } else {
                    merge(dag, &kids)
                }
            })
            .collect();
    }
    let root = &blocks[0];
    let (js, jm) = gates.entry_dims();
    let mut g = GatingMatrix::filled(dag.node_count(), G::zeros(js, jm));
    for (p, &src) in root.nodes.iter().enumerate() {
        for (q, &dst) in root.nodes.iter().enumerate() {
            if let Some(v) = &root.gating[p][q] {
                *g.get_mut(src, dst) = v.clone();
            }
        }
    }
    Ok(g)
}
