use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use invnet_core::{
    simulate, solve_config_exact, solve_theta_recursive, theta_unit_base_stock, NetworkConfig,
    SimulationOptions,
};

fn network(j: usize, b: usize) -> NetworkConfig {
    let lambda: Vec<f64> = (0..j).map(|i| 0.8 + 0.3 * i as f64).collect();
    let mu = lambda.iter().map(|l| 2.0 * l).collect();
    NetworkConfig::with_constant_service(lambda, mu, vec![b; j], 1.7).unwrap()
}

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    for (j, b) in [(2, 3), (3, 3), (4, 2), (4, 3)] {
        let cfg = network(j, b);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("J{j}_b{b}")),
            &cfg,
            |bench, cfg| bench.iter(|| solve_config_exact(black_box(cfg)).unwrap()),
        );
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let mut group = c.benchmark_group("closed_form");
    for j in [2, 4, 6, 10] {
        let cfg = network(j, 1);
        group.bench_with_input(BenchmarkId::from_parameter(j), &cfg, |bench, cfg| {
            bench.iter(|| theta_unit_base_stock(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn recursive(c: &mut Criterion) {
    let mut group = c.benchmark_group("recursive_vs_exact");
    for b1 in [4, 8, 16] {
        let cfg =
            NetworkConfig::with_constant_service(vec![1.0, 1.4], vec![3.0, 3.0], vec![b1, 3], 1.2)
                .unwrap();
        group.bench_with_input(BenchmarkId::new("recursive", b1), &cfg, |bench, cfg| {
            bench.iter(|| solve_theta_recursive(black_box(cfg)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("exact", b1), &cfg, |bench, cfg| {
            bench.iter(|| solve_config_exact(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = NetworkConfig::with_constant_service(vec![1.0, 1.0], vec![2.0, 2.0], vec![1, 1], 1.0)
        .unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("1e5_events", |bench| {
        bench.iter(|| simulate(black_box(&cfg), &SimulationOptions::new(100_000, 3)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, exact, closed_form, recursive, simulation);
criterion_main!(benches);
