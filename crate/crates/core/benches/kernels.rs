//! Serial versus rayon-backed execution of the hot kernels.
//!
//! Build with `--no-default-features` to see the sequential fallback; with the
//! `parallel` feature `Exec::Auto` uses the global pool (all cores by default).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cumi::info::{gaussian_gram, gaussian_kernel_with, median_bandwidth, total_correlation};
use cumi::par::{self, Exec};
use cumi::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("auto", Exec::Auto)];

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 256] {
        let (a, b) = (random_matrix(n, n, 1), random_matrix(n, n, 2));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |bench, _| {
                bench.iter(|| black_box(a.matmul_with(&b, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("gaussian_kernel");
    for n in [128usize, 512] {
        let x = random_matrix(n, 20, 3);
        let sigma = median_bandwidth(&x).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |bench, _| {
                bench.iter(|| black_box(gaussian_kernel_with(&x, sigma, exec).unwrap()))
            });
        }
    }
    group.finish();
}

/// Independent total-correlation estimates, one per minibatch.
fn batched_tc(c: &mut Criterion) {
    let batches: Vec<[Matrix; 3]> = (0..16u64)
        .map(|k| {
            [
                random_matrix(32, 1, 3 * k),
                random_matrix(32, 1, 3 * k + 1),
                random_matrix(32, 1, 3 * k + 2),
            ]
        })
        .collect();
    let tc = |b: &[Matrix; 3]| {
        let grams: Vec<_> = b
            .iter()
            .map(|m| gaussian_gram(m, median_bandwidth(m).unwrap()).unwrap())
            .collect();
        total_correlation(&grams.iter().collect::<Vec<_>>(), 1.01).unwrap()
    };
    let mut group = c.benchmark_group("total_correlation_x16");
    for (name, exec) in MODES {
        group.bench_function(name, |bench| {
            bench.iter(|| black_box(par::map(exec, &batches, tc)))
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, kernel, batched_tc);
criterion_main!(benches);
