use criterion::{black_box, criterion_group, criterion_main, Criterion};

use periocular_bench::textured_image;
use periocular_core::features::{
    extract_hog, extract_lbp, extract_lpq, extract_mbtlbp, extract_sift,
};
use periocular_core::imaging::tile_patches;

fn bench_descriptors(c: &mut Criterion) {
    let img = textured_image(256, 42);
    let grid = tile_patches(&img, 4, 4).unwrap();

    c.bench_function("lbp_256", |b| {
        b.iter(|| extract_lbp(black_box(&grid)).unwrap())
    });
    c.bench_function("lpq_256", |b| {
        b.iter(|| extract_lpq(black_box(&grid)).unwrap())
    });
    c.bench_function("hog_256", |b| {
        b.iter(|| extract_hog(black_box(&img)).unwrap())
    });
    c.bench_function("mbtlbp_256", |b| {
        b.iter(|| extract_mbtlbp(black_box(&img), 3).unwrap())
    });
}

fn bench_sift(c: &mut Criterion) {
    let img = textured_image(256, 43);
    let mut group = c.benchmark_group("sift");
    group.sample_size(10);
    group.bench_function("sift_256", |b| {
        b.iter(|| extract_sift(black_box(&img)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_descriptors, bench_sift);
criterion_main!(benches);
