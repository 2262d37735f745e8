use plstm_core::grid::{gating_2d, DirectionCombo, GridGates};
use plstm_core::kernel::{
    apply_gating, apply_gating_st, backward_recurrent, forward_recurrent, gating_matrix_recurrent, Gates, Qkv, StmParams,
};
use plstm_core::linalg::spectral_norm;
use plstm_core::paths::{is_multitree, nilpotency_index};
use plstm_core::stability::{
    anti_diagonal_mass, decay_profile, dmode_critical, leading_direction, set_critical_grid, st_transition_build,
    support_line_graph, t_full, DModeMask, Orthogonal, SigmaMap, StTransition,
};
use plstm_core::{Dag, LineGraph, Mat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_qkv(n: usize) -> Qkv {
    let ones = Mat::from_fn(n, 1, |_, _| 1.0);
    Qkv { query: ones.clone(), key: ones.clone(), value: ones }
}

fn critical_grid(side: usize, alpha: f64) -> (Dag, StmParams) {
    let mut g = GridGates::constant(side, side, 1.0);
    set_critical_grid(&mut g, alpha, 1.0).unwrap();
    let (dag, gates) = g.to_dag_gates(DirectionCombo::DownRight);
    (dag, StmParams { gates, qkv: unit_qkv(side * side) })
}

#[test]
fn critical_pmode_cell_mass_is_bounded() {
    for alpha in [0.5, 0.2] {
        let (dag, params) = critical_grid(16, alpha);
        let p = nilpotency_index(&LineGraph::new(&dag));
        let source_mass: f64 = params.gates.source.iter().flatten().map(|s| s.abs()).sum();
        let (cells, _) = forward_recurrent(&dag, &params).unwrap();
        let total: f64 = cells.cells.iter().map(|c| c.as_slice().iter().map(|v| v.abs()).sum::<f64>()).sum();
        assert!(total <= (p + 1) as f64 * source_mass);
        let max_cell = cells.cells.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        assert!(max_cell <= (p + 1) as f64 * source_mass);
    }
}

#[test]
fn critical_pmode_cotangents_are_linf_bounded() {
    let (dag, params) = critical_grid(16, 0.35);
    let p = nilpotency_index(&LineGraph::new(&dag));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gh = Mat::from_fn(256, 1, |_, _| rng.gen_range(-1.0..1.0));
    let grads = backward_recurrent(&dag, &params, &gh).unwrap();
    let bound = gh.max_abs() * (p + 1) as f64;
    assert!(grads.cells.iter().all(|c| c.max_abs() <= bound));
}

#[test]
fn dmode_reaches_quadrant_with_unit_magnitude() {
    for side in 2..=8 {
        for mask in [DModeMask::RightToDown, DModeMask::DownToRight] {
            let g = dmode_critical(side, side, mask);
            let (dag, gates) = g.to_dag_gates(DirectionCombo::DownRight);
            assert!(is_multitree(&support_line_graph(&dag, &gates)), "{side} {mask:?}");
            let gm = gating_2d(&g).unwrap().gating;
            for src in 0..side * side {
                let (sx, sy) = (src % side, src / side);
                for dst in 0..side * side {
                    let (x, y) = (dst % side, dst / side);
                    let want = if x >= sx && y >= sy { 1.0 } else { 0.0 };
                    assert!((gm[(src, dst)] - want).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn critical_grid_transmission_is_binomial() {
    let (side, alpha) = (12, 0.3);
    let mut g = GridGates::constant(side, side, 1.0);
    set_critical_grid(&mut g, alpha, 1.0).unwrap();
    g.source_right.iter_mut().for_each(|s| *s = alpha);
    g.source_down.iter_mut().for_each(|s| *s = 1.0 - alpha);
    let gm = gating_2d(&g).unwrap().gating;
    for y in 0..side {
        for x in 0..side {
            if x + y == 0 {
                continue;
            }
            let want = t_full(alpha, (x + y) as u64, x as u64).unwrap();
            assert!((gm[(0, y * side + x)] - want).abs() <= 1e-12, "({x},{y})");
        }
    }
}

#[test]
fn decay_law_ratios() {
    let rows = decay_profile(0.5, 200).unwrap();
    assert!((rows[49].ratio - 1.0).abs() <= 0.05);
    assert!((rows[199].ratio - 1.0).abs() <= 0.01);
    let even: Vec<f64> = rows.iter().filter(|r| r.delta % 2 == 0).map(|r| r.ratio).collect();
    assert!(even.windows(2).all(|w| w[1] >= w[0]));
    for d in 1..=64 {
        assert!((anti_diagonal_mass(0.5, d).unwrap() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn leading_direction_tracks_alpha() {
    for alpha in [0.25, 0.5, 0.75] {
        let beta = leading_direction(alpha, 400).unwrap();
        assert!((beta - alpha).abs() <= 1.0 / 400.0);
    }
}

#[test]
fn t_full_matches_pascal_probabilities() {
    // Row Δ of the binomial distribution built by repeated convolution.
    let alpha = 0.37;
    let mut row = vec![1.0];
    for delta in 1..=30u64 {
        let mut next = vec![0.0; row.len() + 1];
        for (k, &p) in row.iter().enumerate() {
            next[k] += p * (1.0 - alpha);
            next[k + 1] += p * alpha;
        }
        row = next;
        for (dx, &p) in row.iter().enumerate() {
            assert!((t_full(alpha, delta, dx as u64).unwrap() - p).abs() <= 1e-13);
        }
    }
}

fn nalgebra_norm(m: &Mat) -> f64 {
    let d = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    d.singular_values().max()
}

fn random_spec(rng: &mut ChaCha8Rng, dim: usize, skew: bool) -> StTransition {
    let mut vec = || (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (u, v) = if skew {
        let a = Mat::from_vec(dim, dim, (0..dim * dim).map(|_| 0.0).collect());
        let mut a1 = a.clone();
        let mut a2 = a;
        a1.as_mut_slice().iter_mut().zip(vec().into_iter().cycle()).for_each(|(x, y)| *x = y);
        a2.as_mut_slice().iter_mut().zip(vec().into_iter().cycle()).for_each(|(x, y)| *x = 2.0 * y);
        (Orthogonal::SkewExp(a1), Orthogonal::SkewExp(a2))
    } else {
        (Orthogonal::Householder(vec![vec(), vec()]), Orthogonal::Householder(vec![vec(), vec()]))
    };
    let sigma = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
    StTransition { dim, u, v, sigma, sigma_map: if rng.gen_bool(0.5) { SigmaMap::Tanh } else { SigmaMap::Sign } }
}

#[test]
fn st_transitions_have_bounded_spectral_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..200 {
        let spec = random_spec(&mut rng, 2 + i % 5, i % 2 == 0);
        let m = st_transition_build(&spec).unwrap();
        assert!(spectral_norm(&m, 500) <= 1.0 + 1e-10);
        assert!(nalgebra_norm(&m) <= 1.0 + 1e-10);
    }
}

#[test]
fn scalar_mode_bit_agrees_with_one_by_one_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let dag = Dag::random(10, 0.35, &mut rng);
        let params = StmParams::random(&dag, 3, 2, &mut rng);
        let gs = gating_matrix_recurrent(&dag, &params.gates).unwrap();
        let gm = gating_matrix_recurrent(&dag, &params.gates.to_mat_gates()).unwrap();
        for s in 0..10 {
            for t in 0..10 {
                assert!(*gs.get(s, t) == gm.get(s, t)[(0, 0)]);
            }
        }
        let hs = apply_gating(&gs, &params.qkv).unwrap();
        let values: Vec<Mat> = (0..10).map(|n| Mat::from_vec(1, 2, params.qkv.value.row(n).to_vec())).collect();
        let hm = apply_gating_st(&gm, &params.qkv.query, &params.qkv.key, &values).unwrap();
        for n in 0..10 {
            for b in 0..2 {
                assert!(hs[(n, b)] == hm[n][(0, b)]);
            }
        }
    }
}

#[test]
fn multitree_products_of_st_transitions_stay_contractive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dag = Dag::chain(12);
    let j = 3;
    let id = Mat::identity(j);
    let transitions: Vec<Mat> = (0..12).map(|_| st_transition_build(&random_spec(&mut rng, j, false)).unwrap()).collect();
    let gates: Gates<Mat> =
        Gates::from_fn(&dag, |_, _| id.clone(), |n, _, _| transitions[n].clone(), |_, _| id.clone(), |_| Mat::zeros(j, j));
    let g = gating_matrix_recurrent(&dag, &gates).unwrap();
    for s in 0..12 {
        for t in s + 1..12 {
            assert!(nalgebra_norm(g.get(s, t)) <= 1.0 + 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn householder_transitions_never_expand(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = st_transition_build(&random_spec(&mut rng, dim, false)).unwrap();
        prop_assert!(nalgebra_norm(&m) <= 1.0 + 1e-10);
    }

    #[test]
    fn subcritical_columns_sum_below_one(vals in proptest::collection::vec(-5.0f64..5.0, 1..6)) {
        let mut c = vals.clone();
        plstm_core::stability::normalize_column(&mut c, plstm_core::stability::PMode::SubCritical);
        prop_assert!(c.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-12);
    }
}
