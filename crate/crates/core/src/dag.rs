//! Directed acyclic graphs, their line graphs and the text fixture format.
//!
//! Edges are identified by their insertion index. Every node keeps its
//! incoming and outgoing edges sorted by edge id; the position of an edge in
//! those lists is the index used by the per-node gate arrays.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    in_pos: Vec<usize>,
    out_pos: Vec<usize>,
    order: Vec<NodeId>,
}

impl Dag {
    /// Validates ids, rejects duplicate edges and cycles.
    pub fn new(node_count: usize, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) references a node outside 0..{node_count}")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
        }
        let mut in_edges = vec![Vec::new(); node_count];
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_pos = vec![0; edges.len()];
        let mut out_pos = vec![0; edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            out_pos[e] = out_edges[u].len();
            out_edges[u].push(e);
            in_pos[e] = in_edges[v].len();
            in_edges[v].push(e);
        }
        let order = kahn_order(node_count, &edges, &out_edges)?;
        Ok(Self { node_count, edges, in_edges, out_edges, in_pos, out_pos, order })
    }

    /// `0 → 1 → … → n-1`, edge `i` joining `i` and `i+1`.
    pub fn chain(n: usize) -> Self {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, edges).expect("chain is acyclic")
    }

    /// Down-right cover of a `width × height` grid. Node `(x, y)` has id
    /// `y * width + x`; nodes are visited row-major and each contributes its
    /// right edge, then its down edge.
    pub fn grid(width: usize, height: usize) -> Self {
        let id = |x: usize, y: usize| y * width + x;
        let mut edges = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if x + 1 < width {
                    edges.push((id(x, y), id(x + 1, y)));
                }
                if y + 1 < height {
                    edges.push((id(x, y), id(x, y + 1)));
                }
            }
        }
        Self::new(width * height, edges).expect("grid is acyclic")
    }

    /// Random DAG: each pair is joined with probability `edge_prob`, oriented
    /// along a random hidden permutation so that ids are not already sorted.
    pub fn random(node_count: usize, edge_prob: f64, rng: &mut impl rand::Rng) -> Self {
        use rand::seq::SliceRandom;
        let mut rank: Vec<NodeId> = (0..node_count).collect();
        rank.shuffle(rng);
        let mut edges = Vec::new();
        for a in 0..node_count {
            for b in a + 1..node_count {
                if rng.gen_bool(edge_prob) {
                    edges.push((rank[a], rank[b]));
                }
            }
        }
        edges.shuffle(rng);
        Self::new(node_count, edges).expect("edges follow a hidden order")
    }

    /// Same nodes, every edge flipped. Edge ids are preserved.
    pub fn reversed(&self) -> Self {
        Self::new(self.node_count, self.edges.iter().map(|&(u, v)| (v, u)).collect())
            .expect("reversal of a DAG is a DAG")
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Node the edge leaves.
    #[inline]
    pub fn source_of(&self, e: EdgeId) -> NodeId {
        self.edges[e].0
    }

    /// Node the edge enters.
    #[inline]
    pub fn target_of(&self, e: EdgeId) -> NodeId {
        self.edges[e].1
    }

    #[inline]
    pub fn in_edges(&self, n: NodeId) -> &[EdgeId] {
        &self.in_edges[n]
    }

    #[inline]
    pub fn out_edges(&self, n: NodeId) -> &[EdgeId] {
        &self.out_edges[n]
    }

    /// Position of `e` within `in_edges(target_of(e))`.
    #[inline]
    pub fn in_position(&self, e: EdgeId) -> usize {
        self.in_pos[e]
    }

    /// Position of `e` within `out_edges(source_of(e))`.
    #[inline]
    pub fn out_position(&self, e: EdgeId) -> usize {
        self.out_pos[e]
    }

    /// Kahn order with lowest-id tie-breaking.
    #[inline]
    pub fn topological_order(&self) -> &[NodeId] {
        &self.order
    }

    /// Inverse of the topological order.
    pub fn order_positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.node_count];
        for (i, &n) in self.order.iter().enumerate() {
            pos[n] = i;
        }
        pos
    }

    /// `ancestors[n][m]` is true iff there is a directed path from `m` to `n` (or `m == n`).
    pub fn ancestor_matrix(&self) -> Vec<Vec<bool>> {
        let mut anc = vec![vec![false; self.node_count]; self.node_count];
        for &n in &self.order {
            anc[n][n] = true;
            for &e in &self.in_edges[n] {
                let p = self.source_of(e);
                for m in 0..self.node_count {
                    if anc[p][m] {
                        anc[n][m] = true;
                    }
                }
            }
        }
        anc
    }

    /// Parses the fixture format: `nodes <N>` followed by `edge <u> <v>` lines;
    /// `#` starts a comment. Edges are numbered in file order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let parse_num = |w: Option<&str>| -> Result<usize> {
                let w = w.ok_or_else(|| Error::Parse { line: line_no, msg: "missing number".into() })?;
                w.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("not a node id: {w:?}") })
            };
            match words.next() {
                Some("nodes") => {
                    if node_count.is_some() {
                        return Err(Error::Parse { line: line_no, msg: "repeated `nodes` line".into() });
                    }
                    node_count = Some(parse_num(words.next())?);
                }
                Some("edge") => {
                    if node_count.is_none() {
                        return Err(Error::Parse { line: line_no, msg: "`edge` before `nodes`".into() });
                    }
                    let u = parse_num(words.next())?;
                    let v = parse_num(words.next())?;
                    edges.push((u, v));
                }
                Some(other) => {
                    return Err(Error::Parse { line: line_no, msg: format!("unknown directive {other:?}") })
                }
                None => unreachable!(),
            }
            if let Some(extra) = words.next() {
                return Err(Error::Parse { line: line_no, msg: format!("trailing token {extra:?}") });
            }
        }
        let n = node_count.ok_or(Error::Parse { line: 0, msg: "missing `nodes` line".into() })?;
        Self::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {}\n", self.node_count);
        for &(u, v) in &self.edges {
            let _ = writeln!(s, "edge {u} {v}");
        }
        s
    }
}

/// Kahn's algorithm over an explicit edge list; fails on cycles.
pub fn topological_order(node_count: usize, edges: &[(NodeId, NodeId)]) -> Result<Vec<NodeId>> {
    let mut out = vec![Vec::new(); node_count];
    for (e, &(u, v)) in edges.iter().enumerate() {
        if u >= node_count || v >= node_count {
            return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range")));
        }
        out[u].push(e);
    }
    kahn_order(node_count, edges, &out)
}

fn kahn_order(node_count: usize, edges: &[(NodeId, NodeId)], out_edges: &[Vec<EdgeId>]) -> Result<Vec<NodeId>> {
    let mut indeg = vec![0usize; node_count];
    for &(_, v) in edges {
        indeg[v] += 1;
    }
    let mut ready: BinaryHeap<Reverse<NodeId>> =
        (0..node_count).filter(|&n| indeg[n] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(node_count);
    while let Some(Reverse(n)) = ready.pop() {
        order.push(n);
        for &e in &out_edges[n] {
            let v = edges[e].1;
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() != node_count {
        let node = (0..node_count).find(|&n| indeg[n] > 0).unwrap_or(0);
        return Err(Error::Cycle { node });
    }
    Ok(order)
}

/// Line graph: nodes are the edges of `base`, and `(e1, e2)` is a line edge
/// when `e1` enters the node that `e2` leaves.
#[derive(Debug, Clone)]
pub struct LineGraph<'a> {
    base: &'a Dag,
    line_edges: Vec<(EdgeId, EdgeId)>,
    succ: Vec<Vec<EdgeId>>,
}

impl<'a> LineGraph<'a> {
    pub fn new(base: &'a Dag) -> Self {
        Self::filtered(base, |_, _, _| true)
    }

    /// Keeps only the line edges `(e_in, e_out)` through node `n` for which
    /// `keep(n, e_in, e_out)` holds; used to model masked transitions.
    pub fn filtered(base: &'a Dag, mut keep: impl FnMut(NodeId, EdgeId, EdgeId) -> bool) -> Self {
        let mut line_edges = Vec::new();
        let mut succ = vec![Vec::new(); base.edge_count()];
        for n in 0..base.node_count() {
            for &ein in base.in_edges(n) {
                for &eout in base.out_edges(n) {
                    if keep(n, ein, eout) {
                        line_edges.push((ein, eout));
                        succ[ein].push(eout);
                    }
                }
            }
        }
        line_edges.sort_unstable();
        succ.iter_mut().for_each(|s| s.sort_unstable());
        Self { base, line_edges, succ }
    }

    pub fn base(&self) -> &'a Dag {
        self.base
    }

    pub fn line_edges(&self) -> &[(EdgeId, EdgeId)] {
        &self.line_edges
    }

    /// Number of line-graph nodes, i.e. base edges.
    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    pub fn successors(&self, e: EdgeId) -> &[EdgeId] {
        &self.succ[e]
    }

    /// The line graph as a standalone DAG on `0..|E|`.
    pub fn as_dag(&self) -> Dag {
        Dag::new(self.node_count(), self.line_edges.clone()).expect("line graph of a DAG is acyclic")
    }
}

/// Free-function spelling of [`LineGraph::new`].
pub fn build_line_graph(dag: &Dag) -> LineGraph<'_> {
    LineGraph::new(dag)
}
