use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfkg_bench::model;
use mfkg_core::{default_omega_grid, sigma_curve, step, Integrator, ManifoldSampler, RandomData, SeminormSpec};

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    for (dim, n, length) in [(1, 2048, 128.0), (2, 128, 32.0), (3, 32, 16.0)] {
        let m = model(dim, n, length);
        let state = RandomData::default().generate(m.grid(), 1.0).unwrap();
        let integ = Integrator::new(0.01, 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{dim}d_n{n}")), &state, |b, s| {
            b.iter(|| step(black_box(s), &m, &integ).unwrap())
        });
    }
    group.finish();
}

fn bench_sigma(c: &mut Criterion) {
    let m = model(1, 2048, 128.0);
    let omegas = default_omega_grid(1.0, 199);
    c.bench_function("sigma_curve_199", |b| {
        b.iter(|| sigma_curve(&m.rho, 1.0, black_box(&omegas)).unwrap())
    });
}

fn bench_distance(c: &mut Criterion) {
    let m = model(1, 2048, 128.0);
    let spec = SeminormSpec::with_default_width(m.grid(), 0.0, 8.0);
    let omegas = default_omega_grid(1.0, 201);
    let state = RandomData::default().generate(m.grid(), 1.0).unwrap();
    c.bench_function("manifold_sampler_build", |b| {
        b.iter(|| ManifoldSampler::new(&m, spec, black_box(&omegas)).unwrap())
    });
    let sampler = ManifoldSampler::new(&m, spec, &omegas).unwrap();
    c.bench_function("manifold_distance", |b| {
        b.iter(|| sampler.distance(black_box(&state)).unwrap())
    });
}

criterion_group!(benches, bench_step, bench_sigma, bench_distance);
criterion_main!(benches);
