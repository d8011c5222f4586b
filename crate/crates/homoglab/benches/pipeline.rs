//! Benchmarks of the hot kernels: field synthesis, spectral transforms,
//! heterogeneous solves and full corrector assembly.
//!
//! Run `cargo bench` for the rayon-parallel build and
//! `cargo bench --no-default-features` for the sequential fallback; the two
//! reports compare the data-parallel speedup on identical work.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use homoglab::corrector::compute_corrector;
use homoglab::lattice::{fourier_multiplier_apply, make_grid, solve_poisson};
use homoglab::media::{
    lipschitz_transform, sample_gaussian_field, SpectrumSpec, TransformShape, TransformSpec,
};
use homoglab::solver::{solve_divform, DivFormOperator, SolveOptions};

fn bench_sampling(c: &mut Criterion) {
    let grid = make_grid(2, 256, 1.0).unwrap();
    let spec = SpectrumSpec::power_law(1.0);
    c.bench_function("sample_gaussian_field_256", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(sample_gaussian_field(&spec, &grid, seed).unwrap())
        })
    });
}

fn bench_multiplier(c: &mut Criterion) {
    let grid = make_grid(2, 256, 1.0).unwrap();
    let spec = SpectrumSpec::white_noise();
    let u = sample_gaussian_field(&spec, &grid, 7).unwrap();
    c.bench_function("fourier_multiplier_256", |b| {
        b.iter(|| {
            black_box(
                fourier_multiplier_apply(&u, |k| 1.0 / (1.0 + grid.laplace_symbol(k)), 1.0)
                    .unwrap(),
            )
        })
    });
    c.bench_function("poisson_256", |b| {
        b.iter(|| black_box(solve_poisson(&u)))
    });
}

fn medium(
    l: usize,
) -> (
    homoglab::TorusGrid,
    homoglab::CoefficientField,
) {
    let grid = make_grid(2, l, 1.0).unwrap();
    let omega = sample_gaussian_field(&SpectrumSpec::power_law(1.0), &grid, 42).unwrap();
    let a = lipschitz_transform(
        &omega,
        &TransformSpec::new(0.2, 0.8, TransformShape::Clamp),
    )
    .unwrap();
    (grid, a)
}

fn bench_solver(c: &mut Criterion) {
    let (_, a) = medium(128);
    let op = DivFormOperator::new(&a);
    let g = op.flux_of_unit(0);
    let opts = SolveOptions::default();
    c.bench_function("solve_divform_128", |b| {
        b.iter(|| black_box(solve_divform(&a, &g, &opts).unwrap()))
    });
}

fn bench_corrector(c: &mut Criterion) {
    let (_, a) = medium(64);
    let opts = SolveOptions::default();
    c.bench_function("compute_corrector_64", |b| {
        b.iter(|| black_box(compute_corrector(&a, &opts).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_sampling,
    bench_multiplier,
    bench_solver,
    bench_corrector
);
criterion_main!(benches);
