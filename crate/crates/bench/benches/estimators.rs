use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tebc::maxent::{self, BoxSpec, MaxentVariant};
use tebc::smoothing::{self, SmoothingMethod};
use tebc::teb::{self, BootstrapConfig};
use tebc::SolverConfig;
use tebc_bench::{certain, fixture};

fn bias(c: &mut Criterion) {
    let (_, s) = fixture(100, 1000, 1);
    c.bench_function("teb/naive", |b| b.iter(|| teb::frequentist_teb_naive(black_box(&s))));
    let cfg = BootstrapConfig::default_for(s.n(), 7);
    c.bench_function("teb/bootstrap", |b| {
        b.iter(|| teb::frequentist_teb_bootstrap(black_box(&s), &cfg))
    });
}

fn smoothing(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoothing");
    for m in [100, 1000] {
        let (_, s) = fixture(m, 10 * m as u64, 2);
        let bias = teb::frequentist_teb_naive(&s).unwrap();
        group.bench_with_input(BenchmarkId::new("teb-lidstone-f", m), &s, |b, s| {
            b.iter(|| smoothing::solve_teb_lidstone_f(black_box(s), &bias))
        });
        for method in [SmoothingMethod::SebLidstone, SmoothingMethod::Sgt] {
            group.bench_with_input(BenchmarkId::new(method.name(), m), &s, |b, s| {
                b.iter(|| method.estimate(black_box(s)))
            });
        }
    }
    group.finish();
}

fn maxent_models(c: &mut Criterion) {
    let mut group = c.benchmark_group("maxent");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    let (real, s) = fixture(50, 500, 3);
    let cons = certain(&real, 10, 3);
    let tsallis = teb::frequentist_teb_naive(&s).unwrap();
    let shannon = teb::seb(s.m(), s.n()).unwrap();
    for variant in MaxentVariant::ALL {
        let bias = if variant.is_tebc() {
            Some(&tsallis)
        } else if variant.is_seb() {
            Some(&shannon)
        } else {
            None
        };
        let boxes = (variant == MaxentVariant::Sme).then(BoxSpec::default);
        group.bench_function(variant.name(), |b| {
            b.iter(|| maxent::estimate(black_box(&s), variant, bias, &cons, boxes.as_ref(), &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, bias, smoothing, maxent_models);
criterion_main!(benches);
