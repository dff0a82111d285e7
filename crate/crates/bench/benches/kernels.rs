use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ensel_core::copula::{sample, sample_equicorrelated};
use ensel_core::information::{smoothed_conditional_mi, DiscreteSequence};
use ensel_core::numerics::bivariate_normal_cdf;
use ensel_core::selection::{greedy_mi_select, GreedyMode};
use ensel_core::EquicorrelatedSpec;

fn bvn(c: &mut Criterion) {
    let mut group = c.benchmark_group("bivariate_normal_cdf");
    for rho in [0.3, 0.8, 0.99] {
        group.bench_with_input(BenchmarkId::from_parameter(rho), &rho, |b, &rho| {
            b.iter(|| bivariate_normal_cdf(black_box(-0.7), black_box(0.4), rho).unwrap())
        });
    }
    group.finish();
}

fn cmi(c: &mut Criterion) {
    let n = 10_000u64;
    let seq = |mult: u64, size: u64| {
        DiscreteSequence::new((0..n).map(|i| (i * mult / 7) % size).collect(), size).unwrap()
    };
    let y = seq(3, 2);
    let x = seq(5, 2);
    let z = seq(11, 64);
    c.bench_function("smoothed_cmi_n10000_z64", |b| {
        b.iter(|| smoothed_conditional_mi(&y, &x, black_box(&z), 1.0).unwrap())
    });
}

fn greedy(c: &mut Criterion) {
    let spec = EquicorrelatedSpec::new(16, 0.3, 0.75).unwrap();
    let data = sample_equicorrelated(&spec, 5_000, 1).unwrap();
    let mut group = c.benchmark_group("greedy_mi_select_m16_n5000");
    for k in [4, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| greedy_mi_select(&data, k, GreedyMode::DirectCmi, 1.0).unwrap())
        });
    }
    group.finish();
}

fn copula_sampling(c: &mut Criterion) {
    let model = EquicorrelatedSpec::new(10, 0.4, 0.8).unwrap().to_copula_model().unwrap();
    c.bench_function("copula_sample_m10_n10000", |b| {
        b.iter(|| sample(&model, 10_000, black_box(7)).unwrap())
    });
}

criterion_group!(benches, bvn, cmi, greedy, copula_sampling);
criterion_main!(benches);
