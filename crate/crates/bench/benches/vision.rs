use criterion::{criterion_group, criterion_main, Criterion};
use plstm_core::vision::{layer_backward, layer_forward, BlockMode, LayerConfig, LayerParams};
use plstm_core::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block(c: &mut Criterion) {
    let cfg = LayerConfig::new(16, 2, 4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Mat::from_fn(16, 16, |_, _| rng.gen_range(-1.0..1.0));
    for mode in [BlockMode::P, BlockMode::D] {
        let params = LayerParams::init(&cfg, mode, &mut rng);
        let cache = layer_forward(&cfg, mode, &params, &x, 4, 4).unwrap();
        let dy = Mat::from_fn(16, 16, |_, _| rng.gen_range(-1.0..1.0));
        c.bench_function(&format!("layer_forward_{mode:?}_4x4"), |b| {
            b.iter(|| layer_forward(&cfg, mode, &params, &x, 4, 4).unwrap())
        });
        c.bench_function(&format!("layer_backward_{mode:?}_4x4"), |b| {
            b.iter(|| layer_backward(&cfg, &params, &cache, &dy).unwrap())
        });
    }
}

criterion_group!(benches, block);
criterion_main!(benches);
