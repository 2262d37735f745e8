use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plstm_core::grid::{chunkwise_1d, gating_2d, levels_for, multidirectional_2d, scan_1d, DirectionCombo, GridGates, SeqGates};
use plstm_core::kernel::{apply_gating, forward_recurrent, gating_matrix_recurrent, GatingMatrix, Qkv, StmParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_d(c: &mut Criterion) {
    let mut group = c.benchmark_group("1d");
    for size in [64usize, 256, 1024] {
        let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
        let gates = SeqGates::random(size, &mut rng);
        let qkv = Qkv::random(size, 4, 4, &mut rng);
        let (dag, g) = gates.to_dag_gates();
        let params = StmParams { gates: g, qkv: qkv.clone() };
        group.bench_with_input(BenchmarkId::new("recurrent", size), &size, |b, _| {
            b.iter(|| forward_recurrent(&dag, &params).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", size), &size, |b, _| {
            b.iter(|| {
                let out = scan_1d(&gates, levels_for(size)).unwrap();
                apply_gating(&GatingMatrix::from_mat(&out.gating), &qkv).unwrap()
            })
        });
        let chunk = levels_for(size) / 2;
        group.bench_with_input(BenchmarkId::new("chunkwise", size), &size, |b, _| {
            b.iter(|| chunkwise_1d(&gates, &qkv, chunk).unwrap())
        });
    }
    group.finish();
}

fn two_d(c: &mut Criterion) {
    let mut group = c.benchmark_group("2d");
    for side in [4usize, 8, 16] {
        let gates = GridGates::random(side, side, &mut ChaCha8Rng::seed_from_u64(side as u64));
        let (dag, g) = gates.to_dag_gates(DirectionCombo::DownRight);
        group.bench_with_input(BenchmarkId::new("gating_scan", side), &side, |b, _| b.iter(|| gating_2d(&gates).unwrap()));
        group.bench_with_input(BenchmarkId::new("gating_recurrent", side), &side, |b, _| {
            b.iter(|| gating_matrix_recurrent(&dag, &g).unwrap())
        });
        let covers: Vec<_> = DirectionCombo::ALL.iter().map(|&c| (c, gates.clone())).collect();
        let qkv = Qkv::random(side * side, 4, 4, &mut ChaCha8Rng::seed_from_u64(0));
        group.bench_with_input(BenchmarkId::new("multidirectional", side), &side, |b, _| {
            b.iter(|| multidirectional_2d(&covers, &qkv).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, one_d, two_d);
criterion_main!(benches);
