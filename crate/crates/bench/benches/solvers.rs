use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shapeopt_bench::{relaxed_problem, unit_ball, unit_disk};
use shapeopt_core::{
    solve_radial_state_adjoint, stability_verdict, NonlinearitySpec, SourceSpec,
};

fn semilinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("semilinear_solve");
    group.sample_size(10);
    for n in [32, 64, 128] {
        let p = relaxed_problem(n, 0.05);
        let a = unit_disk(&p);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| p.value(black_box(&a), None).unwrap())
        });
    }
    group.finish();
}

fn objective_and_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("objective_gradient");
    group.sample_size(10);
    for n in [32, 64] {
        let p = relaxed_problem(n, 0.05);
        let a = unit_disk(&p);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| p.evaluate(black_box(&a)).unwrap().cell_gradient())
        });
    }
    group.finish();
}

fn radial_spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("radial_spectrum");
    let f = NonlinearitySpec::one_minus_two_x(1.0);
    let g = SourceSpec::constant(1.0);
    for points in [1024, 4096] {
        let rs = solve_radial_state_adjoint(&unit_ball(points), 1e-2, &f, &g).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(points), &points, |b, _| {
            b.iter(|| stability_verdict(black_box(&rs), 20).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, semilinear, objective_and_gradient, radial_spectrum);
criterion_main!(benches);
