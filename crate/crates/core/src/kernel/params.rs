use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{Dag, NodeId};
use crate::error::{Error, Result};
use crate::linalg::{Gate, Mat};

/// Per-node Source, Transition, Mark and Direct gates.
///
/// Edge slots are positions within the node's incoming/outgoing edge lists:
/// `source[n][j]` feeds the `j`-th outgoing edge, `transition[n][i][j]` maps
/// the `i`-th incoming edge onto the `j`-th outgoing edge and `mark[n][i]`
/// reads the `i`-th incoming edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gates<G> {
    pub source: Vec<Vec<G>>,
    pub transition: Vec<Vec<Vec<G>>>,
    pub mark: Vec<Vec<G>>,
    pub direct: Vec<G>,
}

impl<G: Gate> Gates<G> {
    pub fn from_fn(
        dag: &Dag,
        mut source: impl FnMut(NodeId, usize) -> G,
        mut transition: impl FnMut(NodeId, usize, usize) -> G,
        mut mark: impl FnMut(NodeId, usize) -> G,
        mut direct: impl FnMut(NodeId) -> G,
    ) -> Self {
        let n = dag.node_count();
        let mut gates = Gates {
            source: Vec::with_capacity(n),
            transition: Vec::with_capacity(n),
            mark: Vec::with_capacity(n),
            direct: Vec::with_capacity(n),
        };
        for v in 0..n {
            let (ins, outs) = (dag.in_edges(v).len(), dag.out_edges(v).len());
            gates.source.push((0..outs).map(|j| source(v, j)).collect());
            gates.transition.push((0..ins).map(|i| (0..outs).map(|j| transition(v, i, j)).collect()).collect());
            gates.mark.push((0..ins).map(|i| mark(v, i)).collect());
            gates.direct.push(direct(v));
        }
        gates
    }

    /// Checks slot counts against the node degrees of `dag`.
    pub fn check(&self, dag: &Dag) -> Result<()> {
        let n = dag.node_count();
        if self.source.len() != n || self.transition.len() != n || self.mark.len() != n || self.direct.len() != n {
            return Err(Error::Shape(format!("gates cover a different node count than the graph ({n})")));
        }
        for v in 0..n {
            let (ins, outs) = (dag.in_edges(v).len(), dag.out_edges(v).len());
            let ok = self.source[v].len() == outs
                && self.mark[v].len() == ins
                && self.transition[v].len() == ins
                && self.transition[v].iter().all(|row| row.len() == outs);
            if !ok {
                return Err(Error::Shape(format!("gate slots of node {v} do not match its degrees ({ins} in, {outs} out)")));
            }
        }
        Ok(())
    }

    /// `J_S×J_M` shape of a gating-matrix entry.
    pub(crate) fn entry_dims(&self) -> (usize, usize) {
        self.direct.first().map(Gate::dims).unwrap_or((1, 1))
    }
}

impl Gates<f64> {
    pub fn constant(dag: &Dag, source: f64, transition: f64, mark: f64, direct: f64) -> Self {
        Self::from_fn(dag, |_, _| source, |_, _, _| transition, |_, _| mark, |_| direct)
    }

    /// Independent uniform draws from `[-scale, scale]`.
    pub fn random(dag: &Dag, rng: &mut impl Rng, scale: f64) -> Self {
        let mut draw = || rng.gen_range(-scale..=scale);
        let mut gates = Self::constant(dag, 0.0, 0.0, 0.0, 0.0);
        gates.for_each_mut(|v| *v = draw());
        gates
    }

    /// Visits every gate value in the order source, transition, mark, direct.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.source.iter_mut().flatten().for_each(&mut f);
        self.transition.iter_mut().flatten().flatten().for_each(&mut f);
        self.mark.iter_mut().flatten().for_each(&mut f);
        self.direct.iter_mut().for_each(&mut f);
    }

    pub fn to_mat_gates(&self) -> Gates<Mat> {
        Gates {
            source: self.source.iter().map(|r| r.iter().map(|&v| Mat::scalar(v)).collect()).collect(),
            transition: self
                .transition
                .iter()
                .map(|t| t.iter().map(|r| r.iter().map(|&v| Mat::scalar(v)).collect()).collect())
                .collect(),
            mark: self.mark.iter().map(|r| r.iter().map(|&v| Mat::scalar(v)).collect()).collect(),
            direct: self.direct.iter().map(|&v| Mat::scalar(v)).collect(),
        }
    }
}

/// Query/key rows of length `K` and value rows of length `V`, one row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qkv {
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
}

impl Qkv {
    pub fn key_dim(&self) -> usize {
        self.key.cols()
    }

    pub fn value_dim(&self) -> usize {
        self.value.cols()
    }

    pub fn check(&self, nodes: usize) -> Result<()> {
        if self.query.rows() != nodes || self.key.rows() != nodes || self.value.rows() != nodes {
            return Err(Error::Shape(format!("query/key/value need {nodes} rows")));
        }
        if self.query.cols() != self.key.cols() {
            return Err(Error::Shape(format!("query dim {} != key dim {}", self.query.cols(), self.key.cols())));
        }
        Ok(())
    }

    pub fn random(nodes: usize, key_dim: usize, value_dim: usize, rng: &mut impl Rng) -> Self {
        let mut m = |c: usize| Mat::from_fn(nodes, c, |_, _| rng.gen_range(-1.0..=1.0));
        Qkv { query: m(key_dim), key: m(key_dim), value: m(value_dim) }
    }
}

/// Scalar-mode parameters of one pLSTM instance on a DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmParams {
    pub gates: Gates<f64>,
    pub qkv: Qkv,
}

impl StmParams {
    pub fn random(dag: &Dag, key_dim: usize, value_dim: usize, rng: &mut impl Rng) -> Self {
        let gates = Gates::random(dag, rng, 1.0);
        let qkv = Qkv::random(dag.node_count(), key_dim, value_dim, rng);
        StmParams { gates, qkv }
    }

    pub fn check(&self, dag: &Dag) -> Result<()> {
        self.gates.check(dag)?;
        self.qkv.check(dag.node_count())?;
        if !self.values().all(f64::is_finite) {
            return Err(Error::Shape("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Every parameter in the order gates, query, key, value.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let g = &self.gates;
        g.source
            .iter()
            .flatten()
            .chain(g.transition.iter().flatten().flatten())
            .chain(g.mark.iter().flatten())
            .chain(&g.direct)
            .chain(self.qkv.query.as_slice())
            .chain(self.qkv.key.as_slice())
            .chain(self.qkv.value.as_slice())
            .copied()
    }

    pub fn len(&self) -> usize {
        self.values().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mutable visit in the same order as [`StmParams::values`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.gates.for_each_mut(&mut f);
        self.qkv.query.as_mut_slice().iter_mut().for_each(&mut f);
        self.qkv.key.as_mut_slice().iter_mut().for_each(&mut f);
        self.qkv.value.as_mut_slice().iter_mut().for_each(&mut f);
    }
}

/// One `K×V` cell state per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStateField {
    pub cells: Vec<Mat>,
}
