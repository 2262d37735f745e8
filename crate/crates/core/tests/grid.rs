use plstm_core::grid::{
    chunkwise_1d, chunkwise_2d, cover_dag, cover_gating, gating_1d, gating_2d, levels_for, multidirectional_2d,
    multidirectional_gating, scan_1d, DirectionCombo, GridGates, SeqGates,
};
use plstm_core::kernel::{apply_gating, forward_recurrent, gating_matrix_paths, gating_matrix_recurrent, Qkv, StmParams};
use plstm_core::paths::DEFAULT_PATH_CAP;
use plstm_core::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random grid gates with contracting transitions so that long paths stay finite.
fn grid_gates(w: usize, h: usize, seed: u64) -> GridGates {
    let mut g = GridGates::random(w, h, &mut rng(seed));
    for t in [&mut g.t_rr, &mut g.t_rd, &mut g.t_dr, &mut g.t_dd] {
        t.iter_mut().for_each(|v| *v *= 0.5);
    }
    g
}

#[test]
fn scan_1d_matches_chain_recurrence() {
    for (len, seed) in [(8usize, 1u64), (64, 2), (256, 3)] {
        let gates = SeqGates::random(len, &mut rng(seed));
        let out = scan_1d(&gates, levels_for(len)).unwrap();
        assert_eq!(out.merge_levels, levels_for(len));
        let (dag, g) = gates.to_dag_gates();
        let rec = gating_matrix_recurrent(&dag, &g).unwrap().to_mat();
        assert!(out.gating.max_abs_diff(&rec) <= 1e-12, "len {len}");
        let qkv = Qkv::random(len, 3, 2, &mut rng(seed + 10));
        let (_, h) = forward_recurrent(&dag, &StmParams { gates: g, qkv: qkv.clone() }).unwrap();
        let hs = apply_gating(&plstm_core::kernel::GatingMatrix::from_mat(&out.gating), &qkv).unwrap();
        assert!(h.max_abs_diff(&hs) <= 1e-12);
        for c in 0..=levels_for(len) {
            assert!(chunkwise_1d(&gates, &qkv, c).unwrap().max_abs_diff(&h) <= 1e-12, "len {len} chunk {c}");
        }
    }
}

#[test]
fn padding_is_neutral() {
    let gates = SeqGates::random(5, &mut rng(4));
    let (dag, g) = gates.to_dag_gates();
    let rec = gating_matrix_recurrent(&dag, &g).unwrap().to_mat();
    let out = gating_1d(&gates).unwrap();
    assert!(out.gating.max_abs_diff(&rec) <= 1e-12);
    assert_eq!(out.merge_levels, 3);
}

#[test]
fn scan_2d_matches_grid_recurrence() {
    for (side, seed) in [(2usize, 5u64), (4, 6), (8, 7), (16, 8)] {
        let gates = grid_gates(side, side, seed);
        let out = gating_2d(&gates).unwrap();
        assert_eq!(out.merge_levels, levels_for(side));
        let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
        let rec = gating_matrix_recurrent(&dag, &g).unwrap().to_mat();
        assert!(out.gating.max_abs_diff(&rec) <= 1e-10, "side {side}");
    }
}

#[test]
fn scan_2d_matches_paths_on_small_grid() {
    let gates = grid_gates(4, 4, 9);
    let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
    let p = gating_matrix_paths(&dag, &g, DEFAULT_PATH_CAP).unwrap().to_mat();
    assert!(gating_2d(&gates).unwrap().gating.max_abs_diff(&p) <= 1e-12);
}

#[test]
fn non_square_grids_are_padded() {
    for (w, h) in [(3, 5), (1, 7), (6, 2)] {
        let gates = grid_gates(w, h, 10);
        let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
        let rec = gating_matrix_recurrent(&dag, &g).unwrap().to_mat();
        assert!(gating_2d(&gates).unwrap().gating.max_abs_diff(&rec) <= 1e-12, "{w}×{h}");
    }
}

#[test]
fn one_by_n_grid_is_the_1d_scan() {
    let seq = SeqGates::random(8, &mut rng(11));
    let mut grid = GridGates::constant(8, 1, 0.0);
    grid.source_right = seq.source.clone();
    grid.t_rr = seq.transition.clone();
    grid.mark_right = seq.mark.clone();
    grid.direct = seq.direct.clone();
    grid.source_down = vec![0.7; 8];
    grid.t_dd = vec![0.3; 8];
    let a = gating_2d(&grid).unwrap().gating;
    let b = gating_1d(&seq).unwrap().gating;
    assert!(a.max_abs_diff(&b) <= 1e-15);
}

#[test]
fn chunkwise_2d_matches_recurrence_at_every_level() {
    for (w, h) in [(8, 8), (5, 3)] {
        let gates = grid_gates(w, h, 12);
        let qkv = Qkv::random(w * h, 2, 3, &mut rng(13));
        let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
        let (_, want) = forward_recurrent(&dag, &StmParams { gates: g, qkv: qkv.clone() }).unwrap();
        for c in 0..=levels_for(w.max(h)) {
            let got = chunkwise_2d(&gates, &qkv, c).unwrap();
            assert!(got.max_abs_diff(&want) <= 1e-12, "{w}×{h} chunk {c}");
        }
    }
}

#[test]
fn covers_match_directly_built_dags() {
    let (w, h) = (4, 3);
    for (i, combo) in DirectionCombo::ALL.into_iter().enumerate() {
        let gates = grid_gates(w, h, 20 + i as u64);
        let g = cover_gating(&gates, combo).unwrap();
        let (dag, dg) = gates.to_dag_gates(combo);
        let p = gating_matrix_paths(&dag, &dg, DEFAULT_PATH_CAP).unwrap();
        assert!(g.max_abs_diff(&p) <= 1e-12, "{combo:?}");
    }
}

#[test]
fn multidirectional_equals_four_passes() {
    let (w, h) = (6, 5);
    let covers: Vec<_> = DirectionCombo::ALL.iter().enumerate().map(|(i, &c)| (c, grid_gates(w, h, 30 + i as u64))).collect();
    let qkv = Qkv::random(w * h, 3, 2, &mut rng(40));
    let mut summed = cover_gating(&covers[0].1, covers[0].0).unwrap();
    for (c, g) in &covers[1..] {
        summed.accumulate(&cover_gating(g, *c).unwrap());
    }
    assert_eq!(multidirectional_gating(&covers).unwrap(), summed);
    let mut passes = Mat::zeros(w * h, 2);
    for (c, g) in &covers {
        let (dag, dg) = g.to_dag_gates(*c);
        passes.add_assign(&forward_recurrent(&dag, &StmParams { gates: dg, qkv: qkv.clone() }).unwrap().1);
    }
    assert!(multidirectional_2d(&covers, &qkv).unwrap().max_abs_diff(&passes) <= 1e-10);
}

#[test]
fn down_right_only_equals_scan() {
    let gates = grid_gates(4, 4, 50);
    let covers = [(DirectionCombo::DownRight, gates.clone())];
    assert_eq!(multidirectional_gating(&covers).unwrap().to_mat(), gating_2d(&gates).unwrap().gating);
}

#[test]
fn flip_equivariance() {
    let (w, h) = (5, 4);
    let gates = grid_gates(w, h, 60);
    for combo in DirectionCombo::ALL {
        // The reflected gates under the mirrored cover give the same G up to the index map.
        let mirrored = gates.reflected(combo);
        let a = cover_gating(&gates, DirectionCombo::DownRight).unwrap();
        let b = cover_gating(&mirrored, combo).unwrap();
        let r = |v| combo.reflect(v, w, h);
        for s in 0..w * h {
            for t in 0..w * h {
                assert!((a.get(s, t) - b.get(r(s), r(t))).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn all_ones_two_by_two_counts_paths_per_cover() {
    for combo in DirectionCombo::ALL {
        let g = cover_gating(&GridGates::constant(2, 2, 1.0), combo).unwrap();
        let dag = cover_dag(2, 2, combo);
        for s in 0..4 {
            for t in 0..4 {
                if s == t {
                    continue;
                }
                let count: usize = dag
                    .out_edges(s)
                    .iter()
                    .flat_map(|&f| dag.in_edges(t).iter().map(move |&l| (f, l)))
                    .map(|(f, l)| plstm_core::paths::enumerate_paths(&dag, f, l).unwrap().len())
                    .sum();
                assert_eq!(*g.get(s, t), count as f64, "{combo:?} {s}->{t}");
            }
        }
    }
}
