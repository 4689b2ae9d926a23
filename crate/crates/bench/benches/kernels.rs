use std::hint::black_box;

use avoidnet_bench::{crowd, rewind};
use avoidnet_core::canet::{CaNet, Mode};
use avoidnet_core::orca::orca_velocity;
use avoidnet_core::sensing::{estimate_flow_ego, perturb_scan, raycast_scan, CpdConfig};
use avoidnet_core::{Obstacle, Vec2, CYCLE_PERIOD};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn orca(c: &mut Criterion) {
    let (agent, neighbors) = crowd(10, 1);
    c.bench_function("orca_velocity/10_neighbors", |b| {
        b.iter(|| {
            orca_velocity(
                black_box(&agent),
                black_box(&neighbors),
                &[],
                agent.goal,
                CYCLE_PERIOD,
            )
            .unwrap()
        })
    });
}

fn raycast(c: &mut Criterion) {
    let (agent, neighbors) = crowd(10, 2);
    let obstacles = vec![Obstacle::rectangle(Vec2::new(0.0, -2.5), 1.0, 0.3).unwrap()];
    c.bench_function("raycast/10_agents_1_obstacle", |b| {
        b.iter(|| raycast_scan(black_box(&agent), black_box(&neighbors), &obstacles))
    });
}

fn cpd(c: &mut Criterion) {
    let (agent, neighbors) = crowd(8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prev_agent = rewind(std::slice::from_ref(&agent), CYCLE_PERIOD).remove(0);
    let scan = perturb_scan(&raycast_scan(&agent, &neighbors, &[]), 0.03, &mut rng);
    let prev = perturb_scan(
        &raycast_scan(&prev_agent, &rewind(&neighbors, CYCLE_PERIOD), &[]),
        0.03,
        &mut rng,
    );
    let cfg = CpdConfig::default();
    let offset = prev_agent.position - agent.position;
    c.bench_function("cpd_flow/8_agents", |b| {
        b.iter(|| {
            estimate_flow_ego(
                black_box(&prev),
                black_box(&scan),
                offset,
                CYCLE_PERIOD,
                &cfg,
            )
        })
    });
}

fn forward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net32 = CaNet::<f32>::new(&mut rng);
    let net64 = CaNet::<f64>::new(&mut rng);
    let x32 = vec![0.1f32; net32.input_dim()];
    let x64 = vec![0.1f64; net64.input_dim()];
    c.bench_function("canet_forward/f32", |b| {
        b.iter(|| {
            net32
                .forward(black_box(&x32), Mode::Eval, &mut rng)
                .unwrap()
        })
    });
    c.bench_function("canet_forward/f64", |b| {
        b.iter(|| {
            net64
                .forward(black_box(&x64), Mode::Eval, &mut rng)
                .unwrap()
        })
    });
}

criterion_group!(benches, orca, raycast, cpd, forward);
criterion_main!(benches);
