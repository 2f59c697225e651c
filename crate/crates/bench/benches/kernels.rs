use std::hint::black_box;

use biflab_bench::{spread_poly, BASILICA};
use biflab_core::currents::{discrete_ddc, field_eval, ComplexGrid, FieldKind};
use biflab_core::lyapunov::lyap_green_quadratic_poly;
use biflab_core::mandelbrot::center_poly;
use biflab_core::moduli2::{per_curve_samples, Slice};
use biflab_core::ratmap::RationalMap;
use biflab_core::{roots, Complex64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn polynomial_roots(c: &mut Criterion) {
    let mut group = c.benchmark_group("roots");
    for d in [16, 64, 256] {
        let p = spread_poly(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &p, |b, p| b.iter(|| roots(black_box(p), 1e-12).unwrap()));
    }
    group.finish();
}

fn periodic_points(c: &mut Criterion) {
    let f = RationalMap::quadratic(BASILICA);
    let mut group = c.benchmark_group("periodic_points");
    group.sample_size(10);
    for n in [6, 8, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| f.periodic_points(black_box(n)).unwrap()));
    }
    group.finish();
}

fn centers(c: &mut Criterion) {
    let mut group = c.benchmark_group("center_poly");
    group.sample_size(10);
    for n in [6, 8, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| center_poly(black_box(n)).unwrap()));
    }
    group.finish();
}

fn green_and_fields(c: &mut Criterion) {
    c.bench_function("green_critical", |b| {
        b.iter(|| lyap_green_quadratic_poly(black_box(Complex64::new(-0.75, 0.1)), 400))
    });
    let grid = ComplexGrid::new(Complex64::new(-2.5, -1.5), 0.04, 88, 76).unwrap();
    let slice = Slice::polynomial_line();
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("field_ln0_n8", |b| b.iter(|| field_eval(&slice, 8, FieldKind::Ln0, black_box(&grid))));
    let field = field_eval(&slice, 8, FieldKind::L, &grid);
    group.bench_function("discrete_ddc", |b| b.iter(|| discrete_ddc(black_box(&field)).unwrap()));
    group.finish();
}

fn per_curve(c: &mut Criterion) {
    let mut group = c.benchmark_group("per_curve_samples");
    group.sample_size(10);
    group.bench_function("n4", |b| {
        b.iter(|| per_curve_samples(4, black_box(Complex64::new(0.2, 0.0)), Complex64::new(0.1, 0.0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, polynomial_roots, periodic_points, centers, green_and_fields, per_curve);
criterion_main!(benches);
