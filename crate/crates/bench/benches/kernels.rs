// cargo bench -p sheq-bench
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sheq_bench::{path, StepFixture, SEED};
use sheq_core::adaptive::{step_vbar, SolverSettings};
use sheq_core::grid::TimeGrid;
use sheq_core::linear::{run_linear, spectral_discrete_reference};
use sheq_core::noise::{CovarianceSpec, NoisePath};
use sheq_core::spectral::{spectral_backward_euler, ModelParams, Nonlinearity, SpectralField};
use sheq_core::wavelet::{analyze, synthesize, WaveletCoeffs};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwt");
    for j in [6u32, 9, 12] {
        let v: Vec<f64> = (1..1usize << j).map(|i| (i as f64 * 0.37).sin()).collect();
        group.bench_with_input(BenchmarkId::new("analyze", j), &v, |b, v| {
            b.iter(|| analyze(j, black_box(v)).unwrap())
        });
        let d = analyze(j, &v).unwrap();
        group.bench_with_input(BenchmarkId::new("synthesize", j), &d, |b, d| {
            b.iter(|| synthesize(j, black_box(d)).unwrap())
        });
    }
    group.finish();
}

fn noise(c: &mut Criterion) {
    let spec = CovarianceSpec::new(1.2, 512, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 128).unwrap();
    c.bench_function("noise/sample 512 modes x 128 steps", |b| {
        b.iter(|| NoisePath::sample(&spec, &grid, black_box(SEED)))
    });
    let p = NoisePath::sample(&spec, &grid, SEED);
    c.bench_function("noise/refine x16", |b| b.iter(|| p.refine(16).unwrap()));
}

fn linear(c: &mut Criterion) {
    let p = path(512, 64, 1.0).unwrap();
    let mut group = c.benchmark_group("linear");
    for j in [5u32, 7, 9] {
        group.bench_function(BenchmarkId::new("run_linear", j), |b| {
            b.iter(|| run_linear(p.grid(), &p, j).unwrap())
        });
    }
    group.bench_function("spectral_reference", |b| {
        b.iter(|| spectral_discrete_reference(p.grid(), &p).unwrap())
    });
    group.finish();
}

fn nonlinear(c: &mut Criterion) {
    let p = path(512, 64, 1.0).unwrap();
    let params = ModelParams::new(512, Nonlinearity::Sine).unwrap();
    c.bench_function("spectral_euler/512 modes x 64 steps", |b| {
        b.iter(|| spectral_backward_euler(&params, p.grid(), &p, &SpectralField::zeros(512)).unwrap())
    });

    let fx = StepFixture::new(8, 32).unwrap();
    let settings = SolverSettings::default();
    let mut group = c.benchmark_group("step");
    for eps in [1e-2, 1e-4] {
        group.bench_with_input(BenchmarkId::new("adaptive", eps), &eps, |b, &eps| {
            b.iter(|| {
                step_vbar(
                    &fx.op,
                    Nonlinearity::Sine,
                    &fx.v_prev,
                    &fx.w,
                    eps,
                    &WaveletCoeffs::new_tree(),
                    0.8,
                    &settings,
                )
                .unwrap()
            })
        });
    }
    group.bench_function("dense", |b| {
        b.iter(|| fx.dense.step(&fx.v_prev, &fx.w, &fx.v_prev).unwrap())
    });
    group.finish();
}

criterion_group!(benches, transforms, noise, linear, nonlinear);
criterion_main!(benches);
