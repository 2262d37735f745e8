//! Named oracle-equivalence and invariant suites with a uniform report.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dag::{Dag, LineGraph};
use crate::decompose::{decompose, Strategy};
use crate::error::{Error, Result};
use crate::grid::{
    chunkwise_1d, chunkwise_2d, cover_gating, gating_1d, gating_2d, levels_for, multidirectional_2d,
    multidirectional_gating, DirectionCombo, GridGates, SeqGates,
};
use crate::kernel::{
    apply_gating, backward_recurrent, forward_recurrent, gating_matrix_hierarchical, gating_matrix_paths,
    gating_matrix_recurrent, GatingMatrix, Qkv, StmParams,
};
use crate::linalg::{spectral_norm, Mat};
use crate::paths::{is_multitree, nilpotency_index, DEFAULT_PATH_CAP};
use crate::stability::{
    dmode_critical, set_critical_grid, st_transition_build, support_line_graph, DModeMask, Orthogonal, SigmaMap,
    StTransition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Dag,
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
    Chunkwise,
    Gradients,
    Stability,
    DMode,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Dag, Suite::OneD, Suite::TwoD, Suite::Chunkwise, Suite::Gradients, Suite::Stability, Suite::DMode];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Dag => "dag",
            Suite::OneD => "1d",
            Suite::TwoD => "2d",
            Suite::Chunkwise => "chunkwise",
            Suite::Gradients => "gradients",
            Suite::Stability => "stability",
            Suite::DMode => "dmode",
        }
    }

    /// Sizes used when none are given: node counts for `dag` and
    /// `gradients`, sequence lengths for `1d`, grid sides otherwise.
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            Suite::Dag => vec![12],
            Suite::OneD => vec![8, 64, 256],
            Suite::TwoD => vec![2, 4, 8, 16],
            Suite::Chunkwise => vec![8, 16],
            Suite::Gradients => vec![6, 10],
            Suite::Stability => vec![16],
            Suite::DMode => (2..=8).collect(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// Which error a case is judged on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: usize,
    pub label: String,
    pub size: usize,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub suite: Suite,
    pub cases_run: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    #[serde(serialize_with = "as_nanos")]
    pub wall_time: Duration,
    pub cases: Vec<CaseResult>,
}

fn as_nanos<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_nanos())
}

impl RunReport {
    /// `case,label,size,abs_err,rel_err,tolerance,passed`, one row per case.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "case,label,size,abs_err,rel_err,tolerance,passed")?;
        for c in &self.cases {
            let tol = match c.tolerance {
                Tolerance::Abs(t) => format!("abs:{t:e}"),
                Tolerance::Rel(t) => format!("rel:{t:e}"),
            };
            writeln!(out, "{},{},{},{:e},{:e},{},{}", c.case, c.label, c.size, c.abs_err, c.rel_err, tol, c.passed)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: {} cases, max abs err {:.3e}, max rel err {:.3e}, {:.3}s",
            self.suite,
            if self.passed { "PASS" } else { "FAIL" },
            self.cases_run,
            self.max_abs_error,
            self.max_rel_error,
            self.wall_time.as_secs_f64()
        )
    }
}

/// Runs `suite` at `sizes`. Cases are evaluated in parallel and reported in case order.
pub fn run_suite(suite: Suite, sizes: &[usize], seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Range("sizes must be a non-empty list of positive integers".into()));
    }
    let specs: Vec<(usize, usize)> = match suite {
        Suite::Dag => sizes.iter().flat_map(|&s| std::iter::repeat_n(s, DAG_CASES)).enumerate().collect(),
        _ => sizes.iter().copied().enumerate().collect(),
    };
    let nested: Vec<Vec<Case>> = specs
        .par_iter()
        .map(|&(i, size)| {
            let case_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            match suite {
                Suite::Dag => dag_case(size, case_seed),
                Suite::OneD => one_d_case(size, case_seed),
                Suite::TwoD => two_d_case(size, case_seed),
                Suite::Chunkwise => chunkwise_case(size, case_seed),
                Suite::Gradients => gradient_case(size, case_seed),
                Suite::Stability => stability_case(size, case_seed),
                Suite::DMode => dmode_case(size),
            }
        })
        .collect::<Result<_>>()?;
    let cases: Vec<CaseResult> = nested
        .into_iter()
        .zip(&specs)
        .flat_map(|(cs, &(_, size))| cs.into_iter().map(move |c| (size, c)))
        .enumerate()
        .map(|(case, (size, c))| {
            let passed = match c.tolerance {
                Tolerance::Abs(t) => c.abs_err <= t,
                Tolerance::Rel(t) => c.rel_err <= t,
            };
            CaseResult { case, label: c.label, size, abs_err: c.abs_err, rel_err: c.rel_err, tolerance: c.tolerance, passed }
        })
        .collect();
    Ok(RunReport {
        suite,
        cases_run: cases.len(),
        max_abs_error: cases.iter().map(|c| c.abs_err).fold(0.0, f64::max),
        max_rel_error: cases.iter().map(|c| c.rel_err).fold(0.0, f64::max),
        passed: cases.iter().all(|c| c.passed),
        wall_time: start.elapsed(),
        cases,
    })
}

/// Random DAGs per requested size in the `dag` suite.
pub const DAG_CASES: usize = 50;

struct Case {
    label: String,
    abs_err: f64,
    rel_err: f64,
    tolerance: Tolerance,
}

impl Case {
    fn compare(label: impl Into<String>, got: &Mat, want: &Mat, tolerance: Tolerance) -> Case {
        let abs_err = got.max_abs_diff(want);
        let scale = want.max_abs();
        let rel_err = if scale > 0.0 { abs_err / scale } else { abs_err };
        Case { label: label.into(), abs_err, rel_err, tolerance }
    }

    /// `value ≤ bound`; errors are the excess over the bound.
    fn bound(label: impl Into<String>, value: f64, bound: f64) -> Case {
        let abs_err = (value - bound).max(0.0);
        let rel_err = if bound > 0.0 { abs_err / bound } else { abs_err };
        Case { label: label.into(), abs_err, rel_err, tolerance: Tolerance::Abs(0.0) }
    }

    fn holds(label: impl Into<String>, ok: bool) -> Case {
        let e = if ok { 0.0 } else { 1.0 };
        Case { label: label.into(), abs_err: e, rel_err: e, tolerance: Tolerance::Abs(0.0) }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG with `2..=max_nodes` nodes.
fn dag_case(max_nodes: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let n = r.gen_range(2.min(max_nodes)..=max_nodes);
    let p = r.gen_range(0.2..0.6);
    let dag = Dag::random(n, p, &mut r);
    let params = StmParams::random(&dag, 3, 2, &mut r);
    let paths = gating_matrix_paths(&dag, &params.gates, DEFAULT_PATH_CAP)?;
    let rec = gating_matrix_recurrent(&dag, &params.gates)?;
    let d = decompose(&dag, Strategy::TopologicalBisection)?;
    let hier = gating_matrix_hierarchical(&dag, &d, &params.gates)?;
    let (_, h) = forward_recurrent(&dag, &params)?;
    let tol = Tolerance::Abs(1e-12);
    Ok(vec![
        Case::compare(format!("hidden n={n}"), &h, &apply_gating(&paths, &params.qkv)?, tol),
        Case::compare(format!("recurrent-gating n={n}"), &rec.to_mat(), &paths.to_mat(), tol),
        Case::compare(format!("hierarchical-gating n={n}"), &hier.to_mat(), &paths.to_mat(), tol),
    ])
}

fn one_d_case(len: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let gates = SeqGates::random(len, &mut r);
    let qkv = Qkv::random(len, 3, 2, &mut r);
    let (dag, g) = gates.to_dag_gates();
    let rec = gating_matrix_recurrent(&dag, &g)?.to_mat();
    let scan = gating_1d(&gates)?.gating;
    let (_, h) = forward_recurrent(&dag, &StmParams { gates: g, qkv: qkv.clone() })?;
    let hs = apply_gating(&GatingMatrix::from_mat(&scan), &qkv)?;
    let tol = Tolerance::Abs(1e-12);
    Ok(vec![Case::compare("gating", &scan, &rec, tol), Case::compare("hidden", &hs, &h, tol)])
}

/// Random grid gates with transitions halved so that long paths stay finite.
fn contracting_grid(w: usize, h: usize, r: &mut ChaCha8Rng) -> GridGates {
    let mut g = GridGates::random(w, h, r);
    for t in [&mut g.t_rr, &mut g.t_rd, &mut g.t_dr, &mut g.t_dd] {
        t.iter_mut().for_each(|v| *v *= 0.5);
    }
    g
}

fn two_d_case(side: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let gates = contracting_grid(side, side, &mut r);
    let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
    let rec = gating_matrix_recurrent(&dag, &g)?.to_mat();
    let mut cases = vec![Case::compare("scan-vs-recurrent", &gating_2d(&gates)?.gating, &rec, Tolerance::Abs(1e-10))];

    let covers: Vec<_> = DirectionCombo::ALL.iter().map(|&c| (c, contracting_grid(side, side, &mut r))).collect();
    let qkv = Qkv::random(side * side, 3, 2, &mut r);
    let mut summed = cover_gating(&covers[0].1, covers[0].0)?;
    for (c, g) in &covers[1..] {
        summed.accumulate(&cover_gating(g, *c)?);
    }
    let joint = multidirectional_gating(&covers)?;
    cases.push(Case::compare("sum-of-gating-matrices", &joint.to_mat(), &summed.to_mat(), Tolerance::Abs(0.0)));
    let mut passes = Mat::zeros(side * side, 2);
    for (c, g) in &covers {
        let (dag, dg) = g.to_dag_gates(*c);
        passes.add_assign(&forward_recurrent(&dag, &StmParams { gates: dg, qkv: qkv.clone() })?.1);
    }
    cases.push(Case::compare("four-passes", &multidirectional_2d(&covers, &qkv)?, &passes, Tolerance::Abs(1e-10)));
    Ok(cases)
}

fn chunkwise_case(size: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let tol = Tolerance::Abs(1e-12);
    let mut cases = Vec::new();
    let seq = SeqGates::random(size, &mut r);
    let qkv = Qkv::random(size, 3, 2, &mut r);
    let (dag, g) = seq.to_dag_gates();
    let (_, want) = forward_recurrent(&dag, &StmParams { gates: g, qkv: qkv.clone() })?;
    for c in 0..=levels_for(size) {
        cases.push(Case::compare(format!("1d chunk-level {c}"), &chunkwise_1d(&seq, &qkv, c)?, &want, tol));
    }
    let grid = contracting_grid(size, size, &mut r);
    let qkv = Qkv::random(size * size, 2, 3, &mut r);
    let (dag, g) = grid.to_dag_gates(DirectionCombo::DownRight);
    let (_, want) = forward_recurrent(&dag, &StmParams { gates: g, qkv: qkv.clone() })?;
    for c in 0..=levels_for(size) {
        cases.push(Case::compare(format!("2d chunk-level {c}"), &chunkwise_2d(&grid, &qkv, c)?, &want, tol));
    }
    Ok(cases)
}

/// `|a − b| / max(|a|, |b|)`, or the absolute difference when both are below `1e-7`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central differences (step `1e-5`) of `⟨H, R⟩` at 20 random parameters.
fn gradient_case(nodes: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let dag = Dag::random(nodes, r.gen_range(0.2..0.6), &mut r);
    let params = StmParams::random(&dag, 3, 2, &mut r);
    let gh = Mat::from_fn(nodes, 2, |_, _| r.gen_range(-1.0..1.0));
    let loss = |p: &StmParams| -> Result<f64> {
        let (_, h) = forward_recurrent(&dag, p)?;
        Ok(h.as_slice().iter().zip(gh.as_slice()).map(|(a, b)| a * b).sum())
    };
    let analytic: Vec<f64> = backward_recurrent(&dag, &params, &gh)?.params.values().collect();
    let step = 1e-5;
    let mut cases = Vec::new();
    for _ in 0..20 {
        let idx = r.gen_range(0..analytic.len());
        let shifted = |delta: f64| {
            let mut p = params.clone();
            let mut k = 0;
            p.for_each_mut(|v| {
                if k == idx {
                    *v += delta;
                }
                k += 1;
            });
            p
        };
        let numeric = (loss(&shifted(step))? - loss(&shifted(-step))?) / (2.0 * step);
        cases.push(Case {
            label: format!("param {idx}"),
            abs_err: (analytic[idx] - numeric).abs(),
            rel_err: relative_error(analytic[idx], numeric),
            tolerance: Tolerance::Rel(1e-6),
        });
    }
    Ok(cases)
}

/// Critical P-mode mass and cotangent bounds on a `side × side` grid, plus
/// spectral norms of random state-tracking transitions.
fn stability_case(side: usize, seed: u64) -> Result<Vec<Case>> {
    let mut r = rng(seed);
    let mut cases = Vec::new();
    for alpha in [0.5, 0.2] {
        let mut g = GridGates::constant(side, side, 1.0);
        set_critical_grid(&mut g, alpha, 1.0)?;
        let (dag, gates) = g.to_dag_gates(DirectionCombo::DownRight);
        let n = side * side;
        let ones = Mat::from_fn(n, 1, |_, _| 1.0);
        let params = StmParams { gates, qkv: Qkv { query: ones.clone(), key: ones.clone(), value: ones } };
        let p = nilpotency_index(&LineGraph::new(&dag)) as f64;
        let source_mass: f64 = params.gates.source.iter().flatten().map(|s| s.abs()).sum();
        let (cells, _) = forward_recurrent(&dag, &params)?;
        let total: f64 = cells.cells.iter().map(|c| c.as_slice().iter().map(|v| v.abs()).sum::<f64>()).sum();
        cases.push(Case::bound(format!("cell-mass alpha={alpha}"), total, (p + 1.0) * source_mass));
        let gh = Mat::from_fn(n, 1, |_, _| r.gen_range(-1.0..1.0));
        let grads = backward_recurrent(&dag, &params, &gh)?;
        let worst = grads.cells.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        cases.push(Case::bound(format!("cotangent alpha={alpha}"), worst, (p + 1.0) * gh.max_abs()));
    }
    for i in 0..20 {
        let dim = 2 + i % 5;
        let spec = random_st_transition(&mut r, dim, i % 2 == 0);
        let m = st_transition_build(&spec)?;
        cases.push(Case::bound(format!("spectral-norm J={dim}"), spectral_norm(&m, 500), 1.0 + 1e-10));
    }
    Ok(cases)
}

/// Random Householder or skew-exponential transition of dimension `dim`.
pub fn random_st_transition(r: &mut impl Rng, dim: usize, skew: bool) -> StTransition {
    let mut vec = || (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (u, v) = if skew {
        let a1 = Mat::from_vec(dim, dim, (0..dim).flat_map(|_| vec()).collect());
        let a2 = Mat::from_vec(dim, dim, (0..dim).flat_map(|_| vec()).collect());
        (Orthogonal::SkewExp(a1), Orthogonal::SkewExp(a2))
    } else {
        (Orthogonal::Householder(vec![vec(), vec()]), Orthogonal::Householder(vec![vec(), vec()]))
    };
    let sigma = (0..dim).map(|_| r.gen_range(-4.0..4.0)).collect();
    let sigma_map = if r.gen_bool(0.5) { SigmaMap::Tanh } else { SigmaMap::Sign };
    StTransition { dim, u, v, sigma, sigma_map }
}

fn dmode_case(side: usize) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for mask in [DModeMask::RightToDown, DModeMask::DownToRight] {
        let g = dmode_critical(side, side, mask);
        let (dag, gates) = g.to_dag_gates(DirectionCombo::DownRight);
        cases.push(Case::holds(format!("multitree {mask:?}"), is_multitree(&support_line_graph(&dag, &gates))));
        let n = side * side;
        let quadrant = Mat::from_fn(n, n, |src, dst| {
            let reach = dst % side >= src % side && dst / side >= src / side;
            if reach {
                1.0
            } else {
                0.0
            }
        });
        cases.push(Case::compare(format!("quadrant {mask:?}"), &gating_2d(&g)?.gating, &quadrant, Tolerance::Abs(1e-12)));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!(matches!("3d".parse::<Suite>(), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn small_suites_pass() {
        for (suite, sizes) in [
            (Suite::Dag, vec![6]),
            (Suite::OneD, vec![8]),
            (Suite::TwoD, vec![4]),
            (Suite::Chunkwise, vec![4]),
            (Suite::Gradients, vec![5]),
            (Suite::Stability, vec![4]),
            (Suite::DMode, vec![3]),
        ] {
            let r = run_suite(suite, &sizes, 1).unwrap();
            assert!(r.passed, "{}", r.summary());
        }
    }

    #[test]
    fn csv_has_one_row_per_case() {
        let r = run_suite(Suite::OneD, &[4], 0).unwrap();
        assert!(r.passed && r.cases_run == 2);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn empty_sizes_rejected() {
        assert!(run_suite(Suite::Dag, &[], 0).is_err());
    }
}
