use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dvcm::distlike::DistanceKind;
use dvcm::estimators::{build_field, estimate_from_field, EstimatorParams};
use dvcm::exec::Execution;
use dvcm::geom::Vec3;
use dvcm::synth::{Sampler, Shape};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ellipsoid(n: usize) -> Vec<Vec3> {
    Shape::Ellipsoid { a: 2.0, b: 1.5, c: 1.0 }
        .with_diameter(1.0)
        .sample(n, 7, Sampler::Random)
        .unwrap()
        .points
}

fn params(exec: Execution) -> EstimatorParams {
    EstimatorParams::new(0.05, 0.05)
        .with_distance(DistanceKind::Witnessed, 10)
        .with_execution(exec)
}

fn field(c: &mut Criterion) {
    let points = ellipsoid(5000);
    let mut group = c.benchmark_group("build_field");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_field(&points, &params(exec)).unwrap())
        });
    }
    group.finish();
}

fn estimates(c: &mut Criterion) {
    let points = ellipsoid(5000);
    let field = build_field(&points, &params(Execution::Sequential)).unwrap();
    let mut group = c.benchmark_group("estimate_from_field");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| estimate_from_field(&field, &points, &params(exec)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, field, estimates);
criterion_main!(benches);
