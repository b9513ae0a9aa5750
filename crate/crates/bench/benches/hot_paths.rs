use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use imrl_core::geometry::{boundary_distance, local_density, optimal_scoop_point};
use imrl_core::numeric::{init_params, mlp_backward_batch, mlp_forward_batch};
use imrl_core::pipeline::{encode, Encoder, EncoderConfig, EncodeOptions, ObservationWindow};
use imrl_core::simworld::{expert_action, make_env, render, BowlSpec, FoodSpec};

fn mlp(c: &mut Criterion) {
    let params = init_params(&[3072, 256, 64, 32], 1).unwrap();
    let batch = 32;
    let x: Vec<f64> = (0..batch * 3072).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
    c.bench_function("trunk_forward_b32", |b| b.iter(|| mlp_forward_batch(&params, black_box(&x), batch).unwrap()));
    let (_, cache) = mlp_forward_batch(&params, &x, batch).unwrap();
    let dy = vec![0.01; batch * 32];
    c.bench_function("trunk_backward_b32", |b| {
        b.iter(|| mlp_backward_batch(&params, &cache, black_box(&dy)).unwrap())
    });
}

fn geometry(c: &mut Criterion) {
    let state = make_env(BowlSpec::white_circular(), FoodSpec::by_name("cereals").unwrap(), 0.7, 3).unwrap();
    let mask = state.food_mask();
    c.bench_function("local_density_64", |b| b.iter(|| local_density(black_box(&mask), 9).unwrap()));
    c.bench_function("boundary_distance_64", |b| b.iter(|| boundary_distance(black_box(&mask))));
    c.bench_function("optimal_scoop_point_64", |b| {
        b.iter(|| optimal_scoop_point(black_box(&mask), 9, 3.0).unwrap())
    });
}

fn simulator(c: &mut Criterion) {
    let state = make_env(BowlSpec::white_circular(), FoodSpec::by_name("water").unwrap(), 0.8, 4).unwrap();
    c.bench_function("render", |b| b.iter(|| render(black_box(&state))));
    c.bench_function("expert_step", |b| {
        b.iter_batched(
            || state.clone(),
            |s| {
                let a = expert_action(&s).unwrap();
                s.step(&a).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn integration(c: &mut Criterion) {
    let enc = Encoder::new(EncoderConfig::default(), 2).unwrap();
    let state = make_env(BowlSpec::white_circular(), FoodSpec::by_name("jello").unwrap(), 0.6, 5).unwrap();
    let obs = render(&state);
    let window = ObservationWindow {
        env: obs.env.clone(),
        hands: vec![obs.hand.clone(); 4],
    };
    let opts = EncodeOptions::default();
    c.bench_function("encode", |b| b.iter(|| encode(&enc, black_box(&window), &obs.mask, &opts).unwrap()));
}

criterion_group!(benches, mlp, geometry, simulator, integration);
criterion_main!(benches);
