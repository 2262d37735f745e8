use plstm_core::kernel::{
    apply_gating, backward_recurrent, forward_recurrent, gating_matrix_hierarchical, gating_matrix_paths,
    gating_matrix_recurrent, Gates, StmParams,
};
use plstm_core::paths::{nilpotency_index, DEFAULT_PATH_CAP};
use plstm_core::{decompose, Dag, LineGraph, Mat, Strategy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, nodes: usize) -> (Dag, StmParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(0.2..0.6);
    let dag = Dag::random(nodes, p, &mut rng);
    let params = StmParams::random(&dag, 3, 2, &mut rng);
    (dag, params)
}

#[test]
fn recurrent_matches_path_oracle_on_eight_nodes() {
    for seed in 0..10 {
        let (dag, params) = instance(seed, 8);
        let (_, h) = forward_recurrent(&dag, &params).unwrap();
        let g = gating_matrix_paths(&dag, &params.gates, DEFAULT_PATH_CAP).unwrap();
        let hp = apply_gating(&g, &params.qkv).unwrap();
        assert!(h.max_abs_diff(&hp) < 1e-12, "seed {seed}");
    }
}

#[test]
fn hierarchical_matches_paths_on_ten_nodes() {
    for seed in 100..110 {
        let (dag, params) = instance(seed, 10);
        let d = decompose(&dag, Strategy::TopologicalBisection).unwrap();
        let gh = gating_matrix_hierarchical(&dag, &d, &params.gates).unwrap();
        let gp = gating_matrix_paths(&dag, &params.gates, DEFAULT_PATH_CAP).unwrap();
        let gr = gating_matrix_recurrent(&dag, &params.gates).unwrap();
        assert!(gh.max_abs_diff(&gp) < 1e-12, "seed {seed}");
        assert!(gr.max_abs_diff(&gp) < 1e-12, "seed {seed}");
    }
}

#[test]
fn diagonal_holds_direct_and_non_ancestors_vanish() {
    let (dag, params) = instance(7, 9);
    let g = gating_matrix_recurrent(&dag, &params.gates).unwrap();
    let anc = dag.ancestor_matrix();
    for n in 0..9 {
        assert_eq!(*g.get(n, n), params.gates.direct[n]);
        for src in 0..9 {
            if !anc[n][src] {
                assert_eq!(*g.get(src, n), 0.0);
            }
        }
    }
}

#[test]
fn non_ancestor_values_do_not_leak() {
    let (dag, params) = instance(11, 10);
    let anc = dag.ancestor_matrix();
    let (_, base) = forward_recurrent(&dag, &params).unwrap();
    for src in 0..10 {
        let mut p = params.clone();
        p.qkv.value.as_mut_slice()[src * 2] += 3.0;
        let (_, h) = forward_recurrent(&dag, &p).unwrap();
        for n in 0..10 {
            if !anc[n][src] {
                assert_eq!(h.row(n), base.row(n));
            }
        }
    }
}

#[test]
fn superposition_in_source_mark_direct_value() {
    let (dag, params) = instance(21, 8);
    let (_, h) = forward_recurrent(&dag, &params).unwrap();
    let c = 1.7;
    // Every path carries exactly one source and one mark, so scaling either
    // field scales the off-diagonal part; direct and value are handled alike.
    let split = |p: &StmParams| {
        let mut off = p.clone();
        off.gates.direct.iter_mut().for_each(|d| *d = 0.0);
        let (_, h_off) = forward_recurrent(&dag, &off).unwrap();
        h_off
    };
    let base_off = split(&params);
    for field in 0..2 {
        let mut p = params.clone();
        match field {
            0 => p.gates.source.iter_mut().flatten().for_each(|s| *s *= c),
            _ => p.gates.mark.iter_mut().flatten().for_each(|m| *m *= c),
        }
        let scaled = split(&p);
        let mut want = base_off.clone();
        want.scale(c);
        assert!(scaled.max_abs_diff(&want) < 1e-12);
    }
    let mut p = params.clone();
    p.qkv.value.scale(c);
    let (_, hv) = forward_recurrent(&dag, &p).unwrap();
    let mut want = h.clone();
    want.scale(c);
    assert!(hv.max_abs_diff(&want) < 1e-12);
    let mut p = params.clone();
    p.gates.direct.iter_mut().for_each(|d| *d *= c);
    let (_, hd) = forward_recurrent(&dag, &p).unwrap();
    let mut diag = h.clone();
    diag.add_assign(&{
        let mut b = base_off.clone();
        b.scale(-1.0);
        b
    });
    diag.scale(c);
    diag.add_assign(&base_off);
    assert!(hd.max_abs_diff(&diag) < 1e-12);
}

#[test]
fn cell_mass_bounded_by_nilpotency_under_column_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let dag = Dag::random(10, 0.4, &mut rng);
        let mut params = StmParams::random(&dag, 2, 2, &mut rng);
        for n in 0..10 {
            for row in params.gates.transition[n].iter_mut() {
                let total: f64 = row.iter().map(|t| t.abs()).sum();
                if total > 1.0 {
                    row.iter_mut().for_each(|t| *t /= total);
                }
            }
        }
        params.qkv.key = Mat::from_fn(10, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        params.qkv.value = Mat::from_fn(10, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let source_mass = params.gates.source.iter().flatten().map(|s| s.abs()).fold(0.0, f64::max);
        let p = nilpotency_index(&LineGraph::new(&dag));
        let (cells, _) = forward_recurrent(&dag, &params).unwrap();
        for c in &cells.cells {
            let l1: f64 = c.as_slice().iter().map(|v| v.abs()).sum();
            assert!(l1 <= (p + 1) as f64 * source_mass + 1e-12);
        }
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn backward_matches_central_differences() {
    let (dag, params) = instance(31, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let gh = Mat::from_fn(8, 2, |_, _| rng.gen_range(-1.0..1.0));
    let loss = |p: &StmParams| {
        let (_, h) = forward_recurrent(&dag, p).unwrap();
        h.as_slice().iter().zip(gh.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    };
    let grads = backward_recurrent(&dag, &params, &gh).unwrap();
    let analytic: Vec<f64> = grads.params.values().collect();
    let step = 1e-5;
    for idx in 0..params.len() {
        let mut plus = params.clone();
        let mut minus = params.clone();
        let mut k = 0;
        plus.for_each_mut(|v| {
            if k == idx {
                *v += step
            }
            k += 1
        });
        k = 0;
        minus.for_each_mut(|v| {
            if k == idx {
                *v -= step
            }
            k += 1
        });
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
        assert!(relative_error(analytic[idx], numeric) <= 1e-6, "param {idx}: {} vs {numeric}", analytic[idx]);
    }
}

#[test]
fn recurrent_gating_generic_over_matrix_gates_matches_hierarchical() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let dag = Dag::random(7, 0.5, &mut rng);
    let rng = std::cell::RefCell::new(rng);
    let m = |r, c| Mat::from_fn(r, c, |_, _| rng.borrow_mut().gen_range(-0.7..0.7));
    let gates: Gates<Mat> = Gates::from_fn(&dag, |_, _| m(2, 3), |_, _, _| m(3, 3), |_, _| m(3, 2), |_| m(2, 2));
    let gr = gating_matrix_recurrent(&dag, &gates).unwrap();
    let gp = gating_matrix_paths(&dag, &gates, DEFAULT_PATH_CAP).unwrap();
    let d = decompose(&dag, Strategy::TopologicalBisection).unwrap();
    let gh = gating_matrix_hierarchical(&dag, &d, &gates).unwrap();
    for s in 0..7 {
        for t in 0..7 {
            assert!(gr.get(s, t).max_abs_diff(gp.get(s, t)) < 1e-12);
            assert!(gh.get(s, t).max_abs_diff(gp.get(s, t)) < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_triangle_holds(seed in any::<u64>(), nodes in 1usize..=12) {
        let (dag, params) = instance(seed, nodes);
        let (_, h) = forward_recurrent(&dag, &params).unwrap();
        let gp = gating_matrix_paths(&dag, &params.gates, DEFAULT_PATH_CAP).unwrap();
        let d = decompose(&dag, Strategy::TopologicalBisection).unwrap();
        let gh = gating_matrix_hierarchical(&dag, &d, &params.gates).unwrap();
        prop_assert!(h.max_abs_diff(&apply_gating(&gp, &params.qkv).unwrap()) <= 1e-12);
        prop_assert!(h.max_abs_diff(&apply_gating(&gh, &params.qkv).unwrap()) <= 1e-12);
    }
}
