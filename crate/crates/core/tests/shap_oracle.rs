use ndarray::{Array1, Array2};

use shapclust_core::gbt::{RegressionTree, TreeNode};
use shapclust_core::shap::{brute_force_shapley, cv_shap, shap_single, BackgroundSet, CvShapConfig};
use shapclust_core::simgen::simulate;
use shapclust_core::{Ensemble, GbtConfig, RngStream};

/// Values on a coarse grid so that inputs regularly land exactly on split
/// thresholds.
fn grid(rng: &mut RngStream) -> f64 {
    [-1.0, -0.5, 0.0, 0.5, 1.0][rng.below(5)]
}

fn random_tree(rng: &mut RngStream, used: usize, depth: usize) -> RegressionTree {
    fn grow(rng: &mut RngStream, used: usize, depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::leaf(rng.uniform(-2.0, 2.0), 1.0));
        if depth > 0 && rng.next_f64() < 0.8 {
            nodes[id].split_feature = rng.below(used);
            nodes[id].threshold = if rng.below(2) == 0 {
                grid(rng)
            } else {
                rng.uniform(-1.0, 1.0)
            };
            let l = grow(rng, used, depth - 1, nodes);
            let r = grow(rng, used, depth - 1, nodes);
            nodes[id].left = Some(l);
            nodes[id].right = Some(r);
        }
        id
    }
    let mut nodes = Vec::new();
    grow(rng, used, depth, &mut nodes);
    RegressionTree::from_nodes(nodes).unwrap()
}

struct Case {
    model: Ensemble,
    bg: BackgroundSet,
    xs: Vec<Array1<f64>>,
    used: usize,
}

fn case(seed: u64) -> Case {
    let mut rng = RngStream::new(seed, 0x5A);
    let p = 1 + rng.below(8);
    let used = 1 + rng.below(p);
    let depth = 1 + rng.below(3);
    let n_trees = 1 + rng.below(10);
    let k = if rng.below(2) == 0 { 1 } else { 3 };
    let trees = (0..n_trees)
        .map(|_| (0..k).map(|_| random_tree(&mut rng, used, depth)).collect())
        .collect();
    let base = (0..k).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let model = Ensemble::new(base, rng.uniform(0.05, 1.0), p, trees).unwrap();
    let n_bg = 1 + rng.below(32);
    let bg = BackgroundSet::new(Array2::from_shape_fn((n_bg, p), |_| grid(&mut rng))).unwrap();
    let xs = (0..4).map(|_| Array1::from_shape_fn(p, |_| grid(&mut rng))).collect();
    Case { model, bg, xs, used }
}

#[test]
fn tree_shap_matches_enumeration_on_random_ensembles() {
    let mut worst: f64 = 0.0;
    for seed in 0..40 {
        let c = case(seed);
        for x in &c.xs {
            let fast = shap_single(&c.model, x.view(), &c.bg).unwrap();
            let slow = brute_force_shapley(|r| c.model.predict_margins(r).unwrap(), x.view(), &c.bg).unwrap();
            worst = (&fast - &slow).iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    assert!(worst <= 1e-9, "max deviation {worst:e}");
}

#[test]
fn random_ensembles_are_additive() {
    for seed in 100..140 {
        let c = case(seed);
        let k = c.model.n_classes();
        let mut expected = vec![0.0; k];
        for row in c.bg.rows().outer_iter() {
            for (e, m) in expected.iter_mut().zip(c.model.predict_margins(&row.to_vec()).unwrap()) {
                *e += m / c.bg.len() as f64;
            }
        }
        for x in &c.xs {
            let phi = shap_single(&c.model, x.view(), &c.bg).unwrap();
            let fx = c.model.predict_margins(x.as_slice().unwrap()).unwrap();
            for class in 0..k {
                let total: f64 = phi.column(class).sum();
                assert!((total - (fx[class] - expected[class])).abs() <= 1e-9, "seed {seed}");
            }
        }
    }
}

#[test]
fn unused_features_get_exactly_zero() {
    for seed in 200..240 {
        let c = case(seed);
        for x in &c.xs {
            let phi = shap_single(&c.model, x.view(), &c.bg).unwrap();
            for f in c.used..phi.nrows() {
                assert!(phi.row(f).iter().all(|&v| v == 0.0), "seed {seed} feature {f}");
            }
        }
    }
}

#[test]
fn out_of_fold_tensor_is_additive() {
    let d = simulate(150, 9).unwrap().data;
    let gbt = GbtConfig {
        rounds: 15,
        ..GbtConfig::default()
    };
    let cv = CvShapConfig {
        folds: 5,
        repeats: 2,
        background: 40,
    };
    let out = cv_shap(&d, &gbt, &cv, &RngStream::new(9, 0x30)).unwrap();
    for run in &out.runs {
        assert!(run.max_additivity_error() <= 1e-6);
    }
    let margins = out.mean_oof_margins();
    for s in 0..d.n_samples() {
        for (c, r) in out.tensor.reconstructed(s).iter().enumerate() {
            assert!((r - margins[[s, c]]).abs() <= 1e-6);
        }
    }
}
