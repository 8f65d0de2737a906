use std::hint::black_box;

use consensus_core::gains::design_t5_switched_b;
use consensus_core::{
    scalar_settling_oracle, simulate, DisturbanceModel, RhoParams, SimOptions, SwitchedNetwork,
    WeightedGraph,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rho() -> RhoParams {
    RhoParams::new(1.0, 2.0, 1.5, 3.0, 0.5).unwrap()
}

fn eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("algebraic_connectivity");
    for n in [10, 30, 60] {
        let g = WeightedGraph::random_connected(n, 0.2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| black_box(g).algebraic_connectivity().unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let rho = rho();
    c.bench_function("scalar_oracle x0=1e3 h=1e-5", |b| {
        b.iter(|| scalar_settling_oracle(&rho, black_box(1e3), 1e-5).unwrap())
    });
}

fn switched_simulation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let graphs: Vec<_> = (0..4)
        .map(|_| WeightedGraph::random_connected(10, 0.2, &mut rng).unwrap())
        .collect();
    let cert = design_t5_switched_b(&graphs, rho(), 1.0, 10f64.sqrt(), 1.0).unwrap();
    let net = SwitchedNetwork::random_schedule(graphs, 0.1, 0.2, &mut rng).unwrap();
    let x0: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 40.0).collect();
    let dist = DisturbanceModel::benchmark(10);
    let opts = SimOptions {
        h: 1e-5,
        t_end: 0.2,
        record_every: 100,
        record_controls: false,
    };
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("protocol B, 10 agents, 2e4 steps", |b| {
        b.iter(|| simulate(&net, black_box(&x0), &cert.gains, &dist, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eigensolver, oracle, switched_simulation);
criterion_main!(benches);
