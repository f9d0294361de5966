use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subnyquist::harness::estimate_from_sequences;
use subnyquist::subspace::estimate_covariances;
use subnyquist::{esprit_estimate, expand_aliases, screen, PipelineOptions, Selection};
use subnyquist_bench::{channels, scheme};

fn covariances(c: &mut Criterion) {
    let (first, _) = channels(1000);
    let mut group = c.benchmark_group("covariances");
    for m in [8usize, 32, 128] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| estimate_covariances(black_box(&first), m).unwrap())
        });
    }
    group.finish();
}

fn esprit(c: &mut Criterion) {
    let (first, _) = channels(1000);
    let mut group = c.benchmark_group("esprit");
    for m in [8usize, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| esprit_estimate(black_box(&first), 3, Some(m)).unwrap())
        });
    }
    group.finish();
}

fn screening(c: &mut Criterion) {
    let (first, second) = channels(1000);
    let base = esprit_estimate(&first, 3, None).unwrap().base_freqs;
    let sets: Vec<_> = base
        .iter()
        .map(|&f| expand_aliases(f, 5, 100.0).unwrap())
        .collect();
    c.bench_function("screen", |b| {
        b.iter(|| screen(black_box(&second), &sets, 7, 3, 10, Selection::TopK).unwrap())
    });
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    for n in [250usize, 1000, 4000] {
        let (first, second) = channels(n);
        let s = scheme(n);
        let opts = PipelineOptions::new(3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| estimate_from_sequences(black_box(&first), &second, &s, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, covariances, esprit, screening, pipeline);
criterion_main!(benches);
