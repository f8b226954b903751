use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use periocular_bench::score_clouds;
use periocular_core::metrics::{auc, roc_curve, ScoreSet};

fn bench_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for &n in &[10_000usize, 100_000, 1_000_000] {
        let (genuine, impostor) = score_clouds(n / 100, n, 7);
        let set = ScoreSet::new(genuine, impostor).unwrap();
        group.bench_with_input(BenchmarkId::new("auc", n), &set, |b, s| {
            b.iter(|| auc(black_box(s)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("roc_curve", n), &set, |b, s| {
            b.iter(|| roc_curve(black_box(s)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_metrics);
criterion_main!(benches);
