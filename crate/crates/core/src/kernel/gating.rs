use crate::dag::{Dag, LineGraph, NodeId};
use crate::error::{Error, Result};
use crate::linalg::{dot, Gate, Mat};
use crate::paths::enumerate_line_paths;

use super::params::{Gates, Qkv};

/// Node-pair gating matrix; `get(src, dst)` is `G^{src,dst}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingMatrix<G> {
    n: usize,
    entries: Vec<G>,
}

impl<G: Gate> GatingMatrix<G> {
    pub fn filled(n: usize, zero: G) -> Self {
        Self { n, entries: vec![zero; n * n] }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, src: NodeId, dst: NodeId) -> &G {
        &self.entries[src * self.n + dst]
    }

    #[inline]
    pub fn get_mut(&mut self, src: NodeId, dst: NodeId) -> &mut G {
        &mut self.entries[src * self.n + dst]
    }

    /// Elementwise sum, in place.
    pub fn accumulate(&mut self, other: &Self) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.accumulate(b);
        }
    }
}

impl GatingMatrix<f64> {
    pub fn from_mat(m: &Mat) -> Self {
        assert_eq!(m.rows(), m.cols(), "gating matrix must be square");
        Self { n: m.rows(), entries: m.as_slice().to_vec() }
    }

    /// `N×N` matrix with rows indexed by the source node.
    pub fn to_mat(&self) -> Mat {
        Mat::from_vec(self.n, self.n, self.entries.clone())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Sum over every line-graph path of `S · Π T · M`; the diagonal holds `D`.
pub fn gating_matrix_paths<G: Gate>(dag: &Dag, gates: &Gates<G>, cap: usize) -> Result<GatingMatrix<G>> {
    gates.check(dag)?;
    let (js, jm) = gates.entry_dims();
    let mut g = GatingMatrix::filled(dag.node_count(), G::zeros(js, jm));
    let lg = LineGraph::new(dag);
    for src in 0..dag.node_count() {
        *g.get_mut(src, src) = gates.direct[src].clone();
        for (j0, &first) in dag.out_edges(src).iter().enumerate() {
            for dst in 0..dag.node_count() {
                for (il, &last) in dag.in_edges(dst).iter().enumerate() {
                    let set = enumerate_line_paths(&lg, first, last, cap)?;
                    for path in &set.paths {
                        let mut prod = gates.source[src][j0].clone();
                        for w in path.windows(2) {
                            let node = dag.target_of(w[0]);
                            let t = &gates.transition[node][dag.in_position(w[0])][dag.out_position(w[1])];
                            prod = prod.compose(t);
                        }
                        prod = prod.compose(&gates.mark[dst][il]);
                        g.get_mut(src, dst).accumulate(&prod);
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Propagates each node's source flow through the graph in topological
/// order: `F_e = S_e` on its own outgoing edges and `F_e = Σ F_{e'} T_{e'e}`
/// downstream, with `G^{src,dst} = Σ F_{e'} M_{e'}` over the inputs of `dst`.
pub fn gating_matrix_recurrent<G: Gate>(dag: &Dag, gates: &Gates<G>) -> Result<GatingMatrix<G>> {
    gates.check(dag)?;
    let (js, jm) = gates.entry_dims();
    let n = dag.node_count();
    let mut g = GatingMatrix::filled(n, G::zeros(js, jm));
    let order = dag.topological_order();
    let positions = dag.order_positions();
    for src in 0..n {
        *g.get_mut(src, src) = gates.direct[src].clone();
        let mut flow: Vec<Option<G>> = vec![None; dag.edge_count()];
        for (j, &e) in dag.out_edges(src).iter().enumerate() {
            flow[e] = Some(gates.source[src][j].clone());
        }
        for &node in &order[positions[src] + 1..] {
            let ins = dag.in_edges(node);
            if ins.iter().all(|&e| flow[e].is_none()) {
                continue;
            }
            let mut out_flow: Vec<Option<G>> = vec![None; dag.out_edges(node).len()];
            let mut mark: Option<G> = None;
            for (i, &ein) in ins.iter().enumerate() {
                let Some(f) = &flow[ein] else { continue };
                for (j, slot) in out_flow.iter_mut().enumerate() {
                    add_to(slot, f.compose(&gates.transition[node][i][j]));
                }
                add_to(&mut mark, f.compose(&gates.mark[node][i]));
            }
            for (j, &eout) in dag.out_edges(node).iter().enumerate() {
                flow[eout] = out_flow[j].take();
            }
            if let Some(m) = mark {
                *g.get_mut(src, node) = m;
            }
        }
    }
    Ok(g)
}

pub(crate) fn add_to<G: Gate>(slot: &mut Option<G>, v: G) {
    match slot {
        Some(acc) => acc.accumulate(&v),
        None => *slot = Some(v),
    }
}

/// `H_n = Σ_{n'} (Q_n·K_{n'}) G^{n'n} V_{n'}`.
pub fn apply_gating(g: &GatingMatrix<f64>, qkv: &Qkv) -> Result<Mat> {
    let n = g.node_count();
    qkv.check(n)?;
    let vd = qkv.value_dim();
    let mut hidden = Mat::zeros(n, vd);
    for dst in 0..n {
        let q = qkv.query.row(dst);
        let h = &mut hidden.as_mut_slice()[dst * vd..(dst + 1) * vd];
        for src in 0..n {
            let gv = *g.get(src, dst);
            if gv == 0.0 {
                continue;
            }
            let coef = dot(q, qkv.key.row(src)) * gv;
            for (hb, &vb) in h.iter_mut().zip(qkv.value.row(src)) {
                *hb += coef * vb;
            }
        }
    }
    Ok(hidden)
}

/// State-tracking application: node values are `J_S×V`, outputs `J_M×V`, with
/// `H_n[m] = Σ_{n'} (Q_n·K_{n'}) Σ_k G^{n'n}_{km} V_{n'}[k]`.
pub fn apply_gating_st(g: &GatingMatrix<Mat>, query: &Mat, key: &Mat, values: &[Mat]) -> Result<Vec<Mat>> {
    let n = g.node_count();
    if query.rows() != n || key.rows() != n || values.len() != n || query.cols() != key.cols() {
        return Err(Error::Shape(format!("state-tracking inputs need {n} nodes")));
    }
    let (js, jm) = g.get(0, 0).dims();
    let vd = values.first().map_or(0, Mat::cols);
    if values.iter().any(|v| v.rows() != js || v.cols() != vd) {
        return Err(Error::Shape(format!("values must be {js}×{vd}")));
    }
    let mut out = Vec::with_capacity(n);
    for dst in 0..n {
        let q = query.row(dst);
        let mut h = Mat::zeros(jm, vd);
        for src in 0..n {
            let gm = g.get(src, dst);
            if gm.max_abs() == 0.0 {
                continue;
            }
            let qk = dot(q, key.row(src));
            for m in 0..jm {
                for k in 0..js {
                    let coef = qk * gm[(k, m)];
                    for b in 0..vd {
                        h[(m, b)] += coef * values[src][(k, b)];
                    }
                }
            }
        }
        out.push(h);
    }
    Ok(out)
}
