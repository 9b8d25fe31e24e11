use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cgolab_bench::{grid, phase, potential};
use cgolab_core::cgo::{solve_cgo, CgoOptions};
use cgolab_core::recovery::recover_fourier;
use cgolab_core::stats::OrthogonalSample;

fn cgo(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_cgo");
    group.sample_size(10);
    for size in [16, 32] {
        let q = potential(&grid(size));
        group.bench_with_input(BenchmarkId::from_parameter(size), &q, |b, q| {
            b.iter(|| solve_cgo(q, &phase(6.0), &CgoOptions::default()).unwrap())
        });
    }
    group.finish();

    let q = potential(&grid(32));
    let u = OrthogonalSample::identity(3);
    c.bench_function("recover_fourier_32", |b| {
        b.iter(|| recover_fourier(&q, 10.0, 1.0, &u, &CgoOptions::default()).unwrap())
    });
}

criterion_group!(benches, cgo);
criterion_main!(benches);
