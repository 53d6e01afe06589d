//! Second-order boosting with exact greedy split search.

use std::cmp::Ordering;

use ndarray::Array2;

use super::tree::{RegressionTree, TreeNode};
use super::{softmax, Ensemble, GbtConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

const PRIOR_FLOOR: f64 = 1e-12;

/// Gradient and diagonal hessian of the softmax cross-entropy with respect to
/// the class-`class` margin.
pub fn softmax_grad_hess(margins: &[f64], label: usize, class: usize) -> (f64, f64) {
    let p = softmax(margins)[class];
    let target = if label == class { 1.0 } else { 0.0 };
    (p - target, p * (1.0 - p))
}

/// `-log softmax(margins)[label]`, computed with a log-sum-exp shift.
pub fn softmax_cross_entropy(margins: &[f64], label: usize) -> f64 {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + margins.iter().map(|m| (m - max).exp()).sum::<f64>().ln();
    lse - margins[label]
}

/// Optimal leaf weight `-G / (H + λ)`.
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, lambda: f64) -> f64 {
    if hess_sum + lambda == 0.0 {
        0.0
    } else {
        -grad_sum / (hess_sum + lambda)
    }
}

/// Second-order objective of assigning weight `w` to a node.
pub fn leaf_objective(grad_sum: f64, hess_sum: f64, lambda: f64, w: f64) -> f64 {
    grad_sum * w + 0.5 * (hess_sum + lambda) * w * w
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

pub fn fit(train: &Dataset, cfg: &GbtConfig) -> Result<Ensemble> {
    fit_traced(train, cfg).map(|(e, _)| e)
}

/// Fits and also returns the mean training log-loss before the first round
/// and after every round.
pub fn fit_traced(train: &Dataset, cfg: &GbtConfig) -> Result<(Ensemble, Vec<f64>)> {
    cfg.validate()?;
    let labels = train.require_labels()?;
    let n = train.n_samples();
    let k = train.n_classes();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n < 2 || k < 2 {
        return Err(Error::SingleClass);
    }
    let mut counts = vec![0usize; k];
    for &y in labels {
        counts[y] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }

    let base_score: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();

    let x = train.features();
    let presorted = presort(x);
    let mut margins = Array2::from_shape_fn((n, k), |(_, c)| base_score[c]);
    let mut trace = vec![mean_loss(&margins, labels)];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..cfg.rounds {
        let probs: Vec<Vec<f64>> = margins
            .outer_iter()
            .map(|row| softmax(row.as_slice().expect("contiguous")))
            .collect();
        let mut round = Vec::with_capacity(k);
        let mut updates = Array2::zeros((n, k));
        for c in 0..k {
            for i in 0..n {
                let p = probs[i][c];
                grad[i] = p - if labels[i] == c { 1.0 } else { 0.0 };
                hess[i] = p * (1.0 - p);
            }
            let mut grower = Grower {
                x,
                grad: &grad,
                hess: &hess,
                cfg,
                nodes: Vec::new(),
                output: vec![0.0; n],
            };
            grower.grow(presorted.clone(), 0);
            for i in 0..n {
                updates[[i, c]] = grower.output[i];
            }
            round.push(RegressionTree::from_nodes(grower.nodes)?);
        }
        margins.scaled_add(cfg.eta, &updates);
        if margins.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("training margins diverged".into()));
        }
        trace.push(mean_loss(&margins, labels));
        trees.push(round);
    }

    let ensemble = Ensemble::new(base_score, cfg.eta, train.n_features(), trees)?
        .with_names(train.feature_names().to_vec(), train.class_names().to_vec());
    Ok((ensemble, trace))
}

fn mean_loss(margins: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = margins
        .outer_iter()
        .zip(labels)
        .map(|(row, &y)| softmax_cross_entropy(row.as_slice().expect("contiguous"), y))
        .sum();
    total / labels.len() as f64
}

/// Per-feature row orders, ascending by value then by row index.
fn presort(x: &Array2<f64>) -> Vec<Vec<usize>> {
    (0..x.ncols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.nrows()).collect();
            idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: &'a Array2<f64>,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbtConfig,
    nodes: Vec<TreeNode>,
    /// Leaf weight reached by every training row.
    output: Vec<f64>,
}

impl Grower<'_> {
    /// Grows the subtree over the rows in `sorted` (one ordering per feature,
    /// all holding the same row set) and returns its node index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let (g, h) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));
        let weight = leaf_weight(g, h, self.cfg.lambda);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::leaf(weight, h));

        let split = if depth < self.cfg.max_depth {
            self.best_split(&sorted, g, h)
        } else {
            None
        };
        let Some(split) = split else {
            for &i in rows {
                self.output[i] = weight;
            }
            return id;
        };

        let goes_left: Vec<bool> = {
            let mut mask = vec![false; self.x.nrows()];
            for &i in rows {
                mask[i] = self.x[[i, split.feature]] < split.threshold;
            }
            mask
        };
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|order| order.into_iter().partition(|&i| goes_left[i]))
            .unzip();
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        let node = &mut self.nodes[id];
        node.split_feature = split.feature;
        node.threshold = split.threshold;
        node.left = Some(l);
        node.right = Some(r);
        id
    }

    /// Exact greedy search. Candidates are midpoints between consecutive
    /// distinct values; the first strictly best candidate in
    /// (feature, threshold) order wins.
    fn best_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<Split> {
        let lambda = self.cfg.lambda;
        let parent = score(g, h, lambda);
        let mut best: Option<Split> = None;
        for (f, order) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..order.len().saturating_sub(1) {
                let i = order[w];
                gl += self.grad[i];
                hl += self.hess[i];
                let a = self.x[[i, f]];
                let b = self.x[[order[w + 1], f]];
                if a.total_cmp(&b) != Ordering::Less {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent) - self.cfg.gamma;
                if gain > 0.0 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mut threshold = 0.5 * (a + b);
                    if !(a < threshold) {
                        threshold = b;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_class_names;
    use crate::rng::RngStream;
    use ndarray::Array2;

    fn labeled(x: Array2<f64>, y: Vec<usize>, k: usize) -> Dataset {
        let p = x.ncols();
        Dataset::new(
            x,
            Some(y),
            crate::data::default_feature_names(p),
            default_class_names(k),
        )
        .unwrap()
    }

    fn accuracy(e: &Ensemble, d: &Dataset) -> f64 {
        let y = d.labels().unwrap();
        let hits = (0..d.n_samples())
            .filter(|&i| e.predict_class(d.row(i).as_slice().unwrap()).unwrap() == y[i])
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn separable_threshold() {
        let mut rng = RngStream::new(1, 0);
        let n = 60;
        let x = Array2::from_shape_fn((n, 3), |_| rng.uniform(-1.0, 1.0));
        let y: Vec<usize> = (0..n).map(|i| (x[[i, 1]] > 0.2) as usize).collect();
        let d = labeled(x, y, 2);
        let cfg = GbtConfig {
            rounds: 5,
            ..Default::default()
        };
        let e = fit(&d, &cfg).unwrap();
        assert_eq!(accuracy(&e, &d), 1.0);
        assert!(e.trees[0][0].uses_feature(1));
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        // class 1 removed: every label is 0
        let d = labeled(x, vec![0; 6], 2);
        assert!(matches!(fit(&d, &GbtConfig::default()), Err(Error::SingleClass)));
        let unlabeled = Dataset::from_matrix(Array2::zeros((4, 2))).unwrap();
        assert!(matches!(
            fit(&unlabeled, &GbtConfig::default()),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn base_score_is_log_prior() {
        let x = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
        let d = labeled(x, vec![0, 0, 0, 1], 3);
        let e = fit(
            &d,
            &GbtConfig {
                rounds: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(e.base_score[0], 0.75f64.ln());
        assert_eq!(e.base_score[1], 0.25f64.ln());
        assert_eq!(e.base_score[2], 1e-12f64.ln());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(12, 0);
        let step = 1e-4;
        for _ in 0..500 {
            let m: Vec<f64> = (0..3).map(|_| rng.uniform(-4.0, 4.0)).collect();
            let y = rng.below(3);
            for c in 0..3 {
                let (g, h) = softmax_grad_hess(&m, y, c);
                let at = |d: f64| {
                    let mut mm = m.clone();
                    mm[c] += d;
                    softmax_cross_entropy(&mm, y)
                };
                let fd_g = (at(step) - at(-step)) / (2.0 * step);
                let fd_h = (at(step) - 2.0 * at(0.0) + at(-step)) / (step * step);
                assert!((g - fd_g).abs() < 1e-6, "g {g} vs {fd_g}");
                assert!((h - fd_h).abs() < 1e-6, "h {h} vs {fd_h}");
            }
        }
    }

    #[test]
    fn leaf_weight_minimizes_objective() {
        let mut rng = RngStream::new(13, 0);
        for _ in 0..200 {
            let g = rng.uniform(-50.0, 50.0);
            let h = rng.uniform(0.0, 30.0);
            let lambda = rng.uniform(0.0, 2.0);
            let w = leaf_weight(g, h, lambda);
            let best = leaf_objective(g, h, lambda, w);
            for eps in [1e-3, -1e-3] {
                assert!(leaf_objective(g, h, lambda, w + eps) > best);
            }
        }
    }

    #[test]
    fn training_loss_non_increasing() {
        let sim = crate::simgen::simulate(400, 21).unwrap();
        let cfg = GbtConfig {
            rounds: 30,
            ..Default::default()
        };
        let (_, trace) = fit_traced(&sim.data, &cfg).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let sim = crate::simgen::simulate(200, 5).unwrap();
        let cfg = GbtConfig {
            rounds: 10,
            ..Default::default()
        };
        assert_eq!(fit(&sim.data, &cfg).unwrap(), fit(&sim.data, &cfg).unwrap());
    }

    #[test]
    fn depth_and_cover_respected() {
        let sim = crate::simgen::simulate(300, 6).unwrap();
        let cfg = GbtConfig {
            rounds: 3,
            max_depth: 2,
            min_child_weight: 5.0,
            ..Default::default()
        };
        let e = fit(&sim.data, &cfg).unwrap();
        for (_, t) in e.class_trees() {
            assert!(t.depth() <= 2);
            assert!(t.nodes().iter().all(|n| n.cover >= 5.0 - 1e-9));
        }
    }

    #[test]
    fn threshold_between_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = Array2::from_shape_vec((4, 1), vec![a, a, b, b]).unwrap();
        let d = labeled(x, vec![0, 0, 1, 1], 2);
        let cfg = GbtConfig {
            rounds: 3,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let e = fit(&d, &cfg).unwrap();
        assert_eq!(accuracy(&e, &d), 1.0);
    }
}
