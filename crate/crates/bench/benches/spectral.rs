use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cgolab_bench::{grid, phase, potential};
use cgolab_core::phase::SymbolTable;
use cgolab_core::spaces::x_norm_with;
use cgolab_core::spectral::{dealiased_product, forward_transform, inverse_transform};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform");
    for size in [16, 32, 64] {
        let q = potential(&grid(size));
        group.bench_with_input(BenchmarkId::new("round_trip", size), &q, |b, q| {
            b.iter(|| inverse_transform(&forward_transform(q)))
        });
        group.bench_with_input(BenchmarkId::new("dealiased_product", size), &q, |b, q| {
            b.iter(|| dealiased_product(q, q).unwrap())
        });
    }
    group.finish();
}

fn norms(c: &mut Criterion) {
    let g = grid(32);
    let qh = forward_transform(&potential(&g));
    let table = SymbolTable::new(&g, &phase(8.0), 1.0).unwrap();
    c.bench_function("symbol_table_32", |b| b.iter(|| SymbolTable::new(&g, &phase(8.0), 1.0).unwrap()));
    c.bench_function("x_norm_32", |b| b.iter(|| x_norm_with(&qh, &table, -0.5, false).unwrap()));
}

criterion_group!(benches, transforms, norms);
criterion_main!(benches);
