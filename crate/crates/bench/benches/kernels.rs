use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use bardina_bench::fixture;
use bardina_core::nudging::NudgedModel;
use bardina_core::recovery::{update_integrand, NodeData, UpdateParams};
use bardina_core::spectral::fft::Fft3;
use bardina_core::spectral::{bilinear_b, low_mode_project, ModeRule};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_round_trip");
    for n in [16, 32, 64] {
        let plan = Fft3::cached(n);
        let mut data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new(i as f64, 0.0))
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                plan.forward(black_box(&mut data));
                plan.inverse(black_box(&mut data));
            })
        });
    }
    group.finish();
}

fn bilinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("bilinear_b");
    for n in [16, 32] {
        let f = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| bilinear_b(black_box(&f.u), black_box(&f.v)).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let f = fixture(32);
    let dt = 0.01;
    c.bench_function("truth_step_32", |b| {
        b.iter(|| f.model.step(black_box(&f.u), dt).unwrap())
    });

    let cutoff = 8;
    let obs = low_mode_project(&f.v, cutoff);
    let observer =
        NudgedModel::new(&f.grid, f.params.nu, 0.04, 20.0, cutoff, f.model.forcing()).unwrap();
    let mut stepper = observer.stepper(f.u.clone(), &obs, dt).unwrap();
    c.bench_function("observer_step_32", |b| {
        b.iter(|| stepper.advance(black_box(&obs)).unwrap())
    });
}

fn integrand(c: &mut Criterion) {
    let f = fixture(32);
    let cutoff = 8;
    let obs_u = low_mode_project(&f.v, cutoff);
    let obs_ut = low_mode_project(&f.u, cutoff);
    let prm = UpdateParams {
        beta_sq: 0.04,
        eta: 20.0,
        cutoff,
        rule: ModeRule::Strict,
        nu: f.params.nu,
    };
    let node = NodeData {
        w: &f.u,
        w_t: &f.v,
        obs_u: &obs_u,
        obs_ut: &obs_ut,
    };
    c.bench_function("update_integrand_32", |b| {
        b.iter(|| update_integrand(black_box(&node), &prm).unwrap())
    });
}

criterion_group!(benches, fft, bilinear, steps, integrand);
criterion_main!(benches);
