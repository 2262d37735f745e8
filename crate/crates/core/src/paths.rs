//! Exact path combinatorics on DAGs and their line graphs.

use num_bigint::BigUint;
use num_traits::One;

use crate::dag::{Dag, EdgeId, LineGraph};
use crate::error::{Error, Result};

/// Default upper bound on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Paths through the line graph, each an ordered list of base edge ids
/// where consecutive edges share a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub first: EdgeId,
    pub last: EdgeId,
    pub paths: Vec<Vec<EdgeId>>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// All paths from `first` to `last` in the line graph of `dag`.
pub fn enumerate_paths(dag: &Dag, first: EdgeId, last: EdgeId) -> Result<PathSet> {
    enumerate_line_paths(&LineGraph::new(dag), first, last, DEFAULT_PATH_CAP)
}

/// Depth-first enumeration in sorted (lexicographic) order. Branches that
/// cannot reach `last` are pruned, so the work is proportional to the output.
pub fn enumerate_line_paths(lg: &LineGraph<'_>, first: EdgeId, last: EdgeId, cap: usize) -> Result<PathSet> {
    let n = lg.node_count();
    if first >= n || last >= n {
        return Err(Error::InvalidGraph(format!("edge id out of range (have {n} edges)")));
    }
    let reaches = reaches_target(lg, last);
    let mut paths = Vec::new();
    if reaches[first] {
        let mut stack = vec![first];
        dfs(lg, last, &reaches, &mut stack, &mut paths, cap)?;
    }
    Ok(PathSet { first, last, paths })
}

fn dfs(
    lg: &LineGraph<'_>,
    last: EdgeId,
    reaches: &[bool],
    stack: &mut Vec<EdgeId>,
    out: &mut Vec<Vec<EdgeId>>,
    cap: usize,
) -> Result<()> {
    let cur = *stack.last().expect("non-empty path");
    if cur == last {
        if out.len() >= cap {
            return Err(Error::PathExplosion { cap });
        }
        out.push(stack.clone());
        return Ok(());
    }
    for &next in lg.successors(cur) {
        if reaches[next] {
            stack.push(next);
            dfs(lg, last, reaches, stack, out, cap)?;
            stack.pop();
        }
    }
    Ok(())
}

/// `r[e]` is true iff `target` is reachable from `e` (inclusive).
fn reaches_target(lg: &LineGraph<'_>, target: EdgeId) -> Vec<bool> {
    let n = lg.node_count();
    let mut pred = vec![Vec::new(); n];
    for &(a, b) in lg.line_edges() {
        pred[b].push(a);
    }
    let mut r = vec![false; n];
    let mut stack = vec![target];
    r[target] = true;
    while let Some(e) = stack.pop() {
        for &p in &pred[e] {
            if !r[p] {
                r[p] = true;
                stack.push(p);
            }
        }
    }
    r
}

/// Number of monotone lattice paths covering an offset `(dx, dy)`:
/// `binomial(dx + dy, dx)`, exact.
pub fn count_paths_2d(dx: u64, dy: u64) -> BigUint {
    binomial(dx + dy, dx.min(dy))
}

/// Exact binomial coefficient by the multiplicative formula; every
/// intermediate quotient is an integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Stirling approximation of [`count_paths_2d`]; `None` when an offset is zero.
pub fn stirling_path_count(dx: u64, dy: u64) -> Option<f64> {
    if dx == 0 || dy == 0 {
        return None;
    }
    let (x, y) = (dx as f64, dy as f64);
    let s = x + y;
    let log = 0.5 * (s / (2.0 * std::f64::consts::PI * x * y)).ln() + s * s.ln() - x * x.ln() - y * y.ln();
    Some(log.exp())
}

/// Natural log of a big integer, valid far beyond the `f64` range.
pub fn ln_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return num_traits::ToPrimitive::to_f64(v).expect("fits f64").ln();
    }
    let shift = bits - 64;
    let top: BigUint = v >> shift;
    num_traits::ToPrimitive::to_f64(&top).expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Smallest `P` with `Tᴾ⁺¹ = 0` for the line-graph adjacency `T`, i.e. the
/// number of line edges on the longest line-graph path.
pub fn nilpotency_index(lg: &LineGraph<'_>) -> usize {
    let dag = lg.as_dag();
    let mut longest = vec![0usize; dag.node_count()];
    let mut best = 0;
    for &e in dag.topological_order() {
        for &le in dag.in_edges(e) {
            let p = dag.source_of(le);
            longest[e] = longest[e].max(longest[p] + 1);
        }
        best = best.max(longest[e]);
    }
    best
}

/// True iff every ordered pair of line-graph nodes is joined by at most one
/// directed path. Path counts are propagated exactly, saturating at 2.
pub fn is_multitree(lg: &LineGraph<'_>) -> bool {
    let dag = lg.as_dag();
    let n = dag.node_count();
    let order = dag.topological_order();
    let mut count = vec![0u8; n];
    for start in 0..n {
        count.iter_mut().for_each(|c| *c = 0);
        count[start] = 1;
        for &e in order {
            if count[e] == 0 {
                continue;
            }
            for &le in dag.out_edges(e) {
                let t = dag.target_of(le);
                count[t] = (count[t] + count[e]).min(2);
                if count[t] > 1 {
                    return false;
                }
            }
        }
    }
    true
}
