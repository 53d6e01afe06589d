use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shapclust_core::cluster::{hdbscan, HdbscanParams};
use shapclust_core::embed::{neighbor_embed, pca_embed, NeighborConfig};
use shapclust_core::gbt::fit;
use shapclust_core::shap::{cv_shap, shap_single, BackgroundSet, CvShapConfig};
use shapclust_core::simgen::simulate;
use shapclust_core::{GbtConfig, RngStream};

fn boosting(c: &mut Criterion) {
    let mut group = c.benchmark_group("gbt_fit");
    group.sample_size(10);
    for n in [300, 1000] {
        let d = simulate(n, 1).unwrap().data;
        let cfg = GbtConfig {
            rounds: 30,
            ..GbtConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| fit(black_box(d), &cfg).unwrap())
        });
    }
    group.finish();
}

fn tree_shap(c: &mut Criterion) {
    let d = simulate(600, 2).unwrap().data;
    let model = fit(&d, &GbtConfig::default()).unwrap();
    let mut group = c.benchmark_group("shap_single");
    for bg_rows in [32, 256] {
        let rows: Vec<usize> = (0..bg_rows).collect();
        let bg = BackgroundSet::new(d.subset(&rows).features().clone()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(bg_rows), &bg, |b, bg| {
            b.iter(|| shap_single(&model, black_box(d.row(599)), bg).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("cv_shap");
    group.sample_size(10);
    let small = simulate(200, 3).unwrap().data;
    let gbt = GbtConfig {
        rounds: 20,
        ..GbtConfig::default()
    };
    let cv = CvShapConfig {
        folds: 5,
        repeats: 1,
        background: 64,
    };
    group.bench_function("n200_r1", |b| {
        b.iter(|| cv_shap(black_box(&small), &gbt, &cv, &RngStream::new(4, 0x30)).unwrap())
    });
    group.finish();
}

fn embedding(c: &mut Criterion) {
    let d = simulate(800, 5).unwrap().data;
    let mut group = c.benchmark_group("embed");
    group.sample_size(10);
    group.bench_function("pca_n800", |b| b.iter(|| pca_embed(black_box(d.features())).unwrap()));
    let cfg = NeighborConfig {
        epochs: 100,
        ..NeighborConfig::default()
    };
    group.bench_function("neighbor_n800", |b| {
        b.iter(|| neighbor_embed(black_box(d.features()), &cfg, &mut RngStream::new(6, 0x40)).unwrap())
    });
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let mut group = c.benchmark_group("hdbscan");
    group.sample_size(10);
    for n in [500, 1500] {
        let d = simulate(n, 7).unwrap().data;
        group.bench_with_input(BenchmarkId::from_parameter(n), d.features(), |b, m| {
            b.iter(|| hdbscan(black_box(m), &HdbscanParams::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, boosting, tree_shap, embedding, clustering);
criterion_main!(benches);
