use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use microvol::functionals::covariance_cn;
use microvol::moments::{moment_value, MomentModel, MomentParams, QuadratureOptions};
use microvol::{simulate_events, GaussianVariant, KernelSpec, MarkLaw, SeedStream};

fn kernels(c: &mut Criterion) {
    let k = KernelSpec::optimized(0.15, 256).unwrap();
    let ts: Vec<f64> = (0..1024).map(|i| i as f64 / 1024.0).collect();
    c.bench_function("kernel_value_1024", |b| {
        b.iter(|| ts.iter().map(|t| k.value(black_box(*t))).sum::<f64>())
    });
}

fn paths(c: &mut Criterion) {
    let law = MarkLaw::gaussian(1.0, 0.05, -1.0).unwrap();
    let seeds = SeedStream::new(1);
    let mut group = c.benchmark_group("terminal_price");
    for n in [64u64, 256] {
        let k = KernelSpec::optimized(0.15, n).unwrap();
        group.bench_function(format!("n{n}"), |b| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                let mut rng = seeds.rng(r);
                let ev = simulate_events(n, 1.0, 0.0, &law, &mut rng).unwrap();
                ev.terminal_price(&k).unwrap()
            })
        });
    }
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let k = KernelSpec::optimized(0.15, 256).unwrap();
    c.bench_function("covariance_cn", |b| {
        b.iter(|| covariance_cn(&k, black_box(0.7), black_box(0.4), false).unwrap())
    });
}

fn moments(c: &mut Criterion) {
    let law = MarkLaw::gaussian(1.0, 0.05, -1.0).unwrap();
    let params = MomentParams::from_law(&law, 1.0);
    let model = MomentModel::Limit {
        hurst: 0.15,
        variant: GaussianVariant::RiemannLiouville,
    };
    let opts = QuadratureOptions::default();
    let mut group = c.benchmark_group("moment_value");
    group.sample_size(10);
    group.bench_function("limit_N4", |b| b.iter(|| moment_value(4, &model, &params, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, paths, covariance, moments);
criterion_main!(benches);
