use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{Dag, NodeId};
use crate::error::{Error, Result};
use crate::kernel::Gates;

/// Per-node gates of a chain; node `i` reads edge `i - 1` and writes edge `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqGates {
    pub source: Vec<f64>,
    pub transition: Vec<f64>,
    pub mark: Vec<f64>,
    pub direct: Vec<f64>,
}

impl SeqGates {
    pub fn constant(len: usize, source: f64, transition: f64, mark: f64, direct: f64) -> Self {
        SeqGates {
            source: vec![source; len],
            transition: vec![transition; len],
            mark: vec![mark; len],
            direct: vec![direct; len],
        }
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        let mut v = || (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect::<Vec<f64>>();
        SeqGates { source: v(), transition: v(), mark: v(), direct: v() }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.len();
        if self.transition.len() != n || self.mark.len() != n || self.direct.len() != n {
            return Err(Error::Shape("sequence gate arrays differ in length".into()));
        }
        Ok(())
    }

    /// Pads with identity transitions and zero source, mark and direct.
    pub fn padded(&self, len: usize) -> Self {
        let mut p = self.clone();
        p.source.resize(len, 0.0);
        p.transition.resize(len, 1.0);
        p.mark.resize(len, 0.0);
        p.direct.resize(len, 0.0);
        p
    }

    /// The same gates on [`Dag::chain`].
    pub fn to_dag_gates(&self) -> (Dag, Gates<f64>) {
        let dag = Dag::chain(self.len());
        let gates = Gates::from_fn(
            &dag,
            |n, _| self.source[n],
            |n, _, _| self.transition[n],
            |n, _| self.mark[n],
            |n| self.direct[n],
        );
        (dag, gates)
    }
}

/// The four DAG covers of a 2D grid, named by their propagation directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionCombo {
    DownRight,
    DownLeft,
    UpRight,
    UpLeft,
}

impl DirectionCombo {
    pub const ALL: [DirectionCombo; 4] =
        [DirectionCombo::DownRight, DirectionCombo::DownLeft, DirectionCombo::UpRight, DirectionCombo::UpLeft];

    /// `(flip_x, flip_y)` mapping this cover onto the down-right one.
    pub fn flips(self) -> (bool, bool) {
        match self {
            DirectionCombo::DownRight => (false, false),
            DirectionCombo::DownLeft => (true, false),
            DirectionCombo::UpRight => (false, true),
            DirectionCombo::UpLeft => (true, true),
        }
    }

    /// Node id of `node` after reflecting a `width × height` grid into the
    /// down-right frame. The map is an involution.
    pub fn reflect(self, node: NodeId, width: usize, height: usize) -> NodeId {
        let (fx, fy) = self.flips();
        let (x, y) = (node % width, node / width);
        let x = if fx { width - 1 - x } else { x };
        let y = if fy { height - 1 - y } else { y };
        y * width + x
    }
}

/// Per-node gates of one grid cover, stored row-major (`y * width + x`) in
/// the cover's own frame: "right" is the horizontal propagation direction
/// and "down" the vertical one.
///
/// `t_rr`: horizontal in → horizontal out, `t_rd`: horizontal in → vertical
/// out, `t_dr`: vertical in → horizontal out, `t_dd`: vertical in → vertical
/// out. `mark_right` reads the horizontal input, `mark_down` the vertical one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGates {
    pub width: usize,
    pub height: usize,
    pub source_right: Vec<f64>,
    pub source_down: Vec<f64>,
    pub t_rr: Vec<f64>,
    pub t_rd: Vec<f64>,
    pub t_dr: Vec<f64>,
    pub t_dd: Vec<f64>,
    pub mark_right: Vec<f64>,
    pub mark_down: Vec<f64>,
    pub direct: Vec<f64>,
}

impl GridGates {
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        let v = vec![value; width * height];
        GridGates {
            width,
            height,
            source_right: v.clone(),
            source_down: v.clone(),
            t_rr: v.clone(),
            t_rd: v.clone(),
            t_dr: v.clone(),
            t_dd: v.clone(),
            mark_right: v.clone(),
            mark_down: v.clone(),
            direct: v,
        }
    }

    pub fn random(width: usize, height: usize, rng: &mut impl Rng) -> Self {
        let mut g = Self::constant(width, height, 0.0);
        g.fields_mut().into_iter().flat_map(|f| f.iter_mut()).for_each(|v| *v = rng.gen_range(-1.0..=1.0));
        g
    }

    pub fn node_count(&self) -> usize {
        self.width * self.height
    }

    pub fn fields(&self) -> [&Vec<f64>; 9] {
        [
            &self.source_right,
            &self.source_down,
            &self.t_rr,
            &self.t_rd,
            &self.t_dr,
            &self.t_dd,
            &self.mark_right,
            &self.mark_down,
            &self.direct,
        ]
    }

    pub fn fields_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.source_right,
            &mut self.source_down,
            &mut self.t_rr,
            &mut self.t_rd,
            &mut self.t_dr,
            &mut self.t_dd,
            &mut self.mark_right,
            &mut self.mark_down,
            &mut self.direct,
        ]
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.node_count();
        if self.fields().iter().any(|f| f.len() != n) {
            return Err(Error::Shape(format!("grid gate arrays must have {n} entries")));
        }
        Ok(())
    }

    /// Extends to `width × height` with identity straight transitions and
    /// zero sources, marks, cross transitions and direct terms.
    pub fn padded(&self, width: usize, height: usize) -> Self {
        let mut p = Self::constant(width, height, 0.0);
        p.t_rr.iter_mut().for_each(|v| *v = 1.0);
        p.t_dd.iter_mut().for_each(|v| *v = 1.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let (src, dst) = (y * self.width + x, y * width + x);
                for (to, from) in p.fields_mut().into_iter().zip(self.fields()) {
                    to[dst] = from[src];
                }
            }
        }
        p
    }

    /// Gates relocated so that `combo`'s cover becomes the down-right cover.
    pub fn reflected(&self, combo: DirectionCombo) -> Self {
        let mut r = self.clone();
        for (to, from) in r.fields_mut().into_iter().zip(self.fields()) {
            for (n, &v) in from.iter().enumerate() {
                to[combo.reflect(n, self.width, self.height)] = v;
            }
        }
        r
    }

    /// The cover DAG of `combo` (edges point along its two directions) with
    /// these gates placed on it.
    pub fn to_dag_gates(&self, combo: DirectionCombo) -> (Dag, Gates<f64>) {
        let dag = cover_dag(self.width, self.height, combo);
        let w = self.width;
        let horizontal = |e: usize| dag.source_of(e) / w == dag.target_of(e) / w;
        let gates = Gates::from_fn(
            &dag,
            |n, j| {
                if horizontal(dag.out_edges(n)[j]) {
                    self.source_right[n]
                } else {
                    self.source_down[n]
                }
            },
            |n, i, j| match (horizontal(dag.in_edges(n)[i]), horizontal(dag.out_edges(n)[j])) {
                (true, true) => self.t_rr[n],
                (true, false) => self.t_rd[n],
                (false, true) => self.t_dr[n],
                (false, false) => self.t_dd[n],
            },
            |n, i| {
                if horizontal(dag.in_edges(n)[i]) {
                    self.mark_right[n]
                } else {
                    self.mark_down[n]
                }
            },
            |n| self.direct[n],
        );
        (dag, gates)
    }
}

impl GridGates {
    /// Adjoint of [`GridGates::to_dag_gates`]: sums per-slot values (for
    /// example gradients) on the cover DAG back into the grid fields.
    pub fn from_dag_slots(width: usize, height: usize, combo: DirectionCombo, slots: &Gates<f64>) -> Self {
        let dag = cover_dag(width, height, combo);
        let horizontal = |e: usize| dag.source_of(e) / width == dag.target_of(e) / width;
        let mut g = GridGates::constant(width, height, 0.0);
        for n in 0..width * height {
            for (j, &eo) in dag.out_edges(n).iter().enumerate() {
                let s = slots.source[n][j];
                if horizontal(eo) {
                    g.source_right[n] += s;
                } else {
                    g.source_down[n] += s;
                }
                for (i, &ei) in dag.in_edges(n).iter().enumerate() {
                    let t = slots.transition[n][i][j];
                    match (horizontal(ei), horizontal(eo)) {
                        (true, true) => g.t_rr[n] += t,
                        (true, false) => g.t_rd[n] += t,
                        (false, true) => g.t_dr[n] += t,
                        (false, false) => g.t_dd[n] += t,
                    }
                }
            }
            for (i, &ei) in dag.in_edges(n).iter().enumerate() {
                if horizontal(ei) {
                    g.mark_right[n] += slots.mark[n][i];
                } else {
                    g.mark_down[n] += slots.mark[n][i];
                }
            }
            g.direct[n] = slots.direct[n];
        }
        g
    }
}

/// Grid DAG whose edges follow the directions of `combo`. For
/// [`DirectionCombo::DownRight`] this is [`Dag::grid`].
pub fn cover_dag(width: usize, height: usize, combo: DirectionCombo) -> Dag {
    let (fx, fy) = combo.flips();
    let id = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                let (a, b) = (id(x, y), id(x + 1, y));
                edges.push(if fx { (b, a) } else { (a, b) });
            }
            if y + 1 < height {
                let (a, b) = (id(x, y), id(x, y + 1));
                edges.push(if fy { (b, a) } else { (a, b) });
            }
        }
    }
    Dag::new(width * height, edges).expect("monotone cover is acyclic")
}
