// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pgfdb_bench::{aggregate_plan, random_table, run};
use pgfdb_core::pgf::{poly_mul, DEFAULT_FFT_THRESHOLD};
use pgfdb_core::DenseCountPgf;

fn exact_aggregates(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact");
    g.sample_size(10);
    for n in [1_000, 10_000, 100_000] {
        let data = random_table(n, 20, 1);
        for kind in ["count", "sum", "min", "max"] {
            let plan = aggregate_plan(kind, "exact");
            g.bench_with_input(BenchmarkId::new(kind, n), &n, |b, _| b.iter(|| black_box(run(&plan, &data, 1))));
        }
    }
    g.finish();
}

fn approximations(c: &mut Criterion) {
    let mut g = c.benchmark_group("approx");
    g.sample_size(10);
    for n in [10_000, 100_000, 1_000_000] {
        let data = random_table(n, 20, 2);
        for (kind, method) in [("count", "normal"), ("count", "moments"), ("sum", "moments"), ("max", "topk")] {
            let plan = aggregate_plan(kind, method);
            let id = BenchmarkId::new(format!("{kind}-{method}"), n);
            g.bench_with_input(id, &n, |b, _| b.iter(|| black_box(run(&plan, &data, 1))));
        }
    }
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("convolution");
    for n in [1_000, 4_999, 5_000, 20_000] {
        let a = DenseCountPgf::from_coeffs(vec![1.0 / n as f64; n]).unwrap();
        g.bench_with_input(BenchmarkId::new("schoolbook", n), &n, |b, _| {
            b.iter(|| black_box(poly_mul(&a, &a, usize::MAX).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("fft", n), &n, |b, _| b.iter(|| black_box(poly_mul(&a, &a, 0).unwrap())));
        g.bench_with_input(BenchmarkId::new("default", n), &n, |b, _| {
            b.iter(|| black_box(poly_mul(&a, &a, DEFAULT_FFT_THRESHOLD).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, exact_aggregates, approximations, convolution);
criterion_main!(benches);
