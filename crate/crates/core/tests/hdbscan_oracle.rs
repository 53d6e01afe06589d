use std::collections::BTreeMap;

use ndarray::Array2;

use shapclust_core::cluster::{
    core_distances, hdbscan, mutual_reachability_mst, reference_hdbscan, reference_mst, HdbscanParams, Selection,
};
use shapclust_core::distance::euclidean;
use shapclust_core::RngStream;

fn dataset(seed: u64) -> (Array2<f64>, HdbscanParams) {
    let mut rng = RngStream::new(seed, 0xD8);
    let n = 10 + rng.below(51);
    let dims = 1 + rng.below(4);
    let blobs = 1 + rng.below(4);
    let centers: Vec<Vec<f64>> = (0..blobs)
        .map(|_| (0..dims).map(|_| rng.uniform(-10.0, 10.0)).collect())
        .collect();
    let spread = rng.uniform(0.2, 2.5);
    let snap = seed.is_multiple_of(5);
    let m = Array2::from_shape_fn((n, dims), |(i, j)| {
        let v = if i % 9 == 8 {
            rng.uniform(-12.0, 12.0)
        } else {
            centers[i % blobs][j] + spread * rng.standard_normal()
        };
        // coarse rounding produces duplicate points and tied distances
        if snap {
            v.round()
        } else {
            v
        }
    });
    let params = HdbscanParams {
        min_cluster_size: 2 + rng.below(8),
        min_samples: 1 + rng.below(6).min(n - 2),
        selection: if rng.below(2) == 0 {
            Selection::Eom
        } else {
            Selection::Leaf
        },
    };
    (m, params)
}

fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut ab = BTreeMap::new();
    let mut ba = BTreeMap::new();
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(&x, &y)| (x < 0) == (y < 0) && *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

#[test]
fn fast_matches_reference_on_fifty_datasets() {
    for seed in 0..50 {
        let (m, params) = dataset(seed);
        let fast = hdbscan(&m, &params).unwrap();
        let slow = reference_hdbscan(&m, &params).unwrap();
        assert!(
            same_partition(&fast.labels, &slow.labels),
            "seed {seed}: {:?} vs {:?}",
            fast.labels,
            slow.labels
        );
    }
}

#[test]
fn mst_weight_matches_exhaustive_oracle() {
    for seed in 0..50 {
        let (m, params) = dataset(seed);
        let fast: f64 = mutual_reachability_mst(&m, params.min_samples)
            .unwrap()
            .iter()
            .map(|e| e.2)
            .sum();
        let slow: f64 = reference_mst(&m, params.min_samples).unwrap().iter().map(|e| e.2).sum();
        assert!((fast - slow).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn mst_edges_dominate_distances() {
    for seed in 0..20 {
        let (m, params) = dataset(seed);
        let core = core_distances(&m, params.min_samples).unwrap();
        for (a, b, w) in mutual_reachability_mst(&m, params.min_samples).unwrap() {
            let d = euclidean(m.row(a), m.row(b));
            assert!(w >= d && w >= core[a] && w >= core[b]);
        }
    }
}

#[test]
fn leaf_never_has_fewer_clusters() {
    for seed in 0..50 {
        let (m, params) = dataset(seed);
        let eom = hdbscan(
            &m,
            &HdbscanParams {
                selection: Selection::Eom,
                ..params.clone()
            },
        )
        .unwrap();
        let leaf = hdbscan(
            &m,
            &HdbscanParams {
                selection: Selection::Leaf,
                ..params
            },
        )
        .unwrap();
        assert!(leaf.n_clusters() >= eom.n_clusters(), "seed {seed}");
    }
}
