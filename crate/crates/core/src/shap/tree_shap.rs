//! Exact interventional TreeSHAP.
//!
//! For a foreground row `x` and one background row `r`, the coalition game
//! `v(S) = f(x on S, r off S)` is a sum over leaves. A leaf is reached by the
//! hybrid row exactly when every feature in `A` (splits where the leaf lies on
//! `x`'s side but not `r`'s) comes from `x` and every feature in `B` (the
//! reverse) comes from `r`. Such a leaf contributes
//!
//! ```text
//! +v · (|A|-1)! |B|! / (|A|+|B|)!   to each feature in A
//! −v · |A|! (|B|-1)! / (|A|+|B|)!   to each feature in B
//! ```
//!
//! and nothing when `A ∪ B` is empty. A single traversal that follows both
//! rows and forks only where they disagree enumerates exactly those leaves.

use ndarray::{Array2, ArrayView1};

use super::BackgroundSet;
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, RegressionTree};

/// `(a-1)! b! / (a+b)!` and `a! (b-1)! / (a+b)!` for all `a + b <= depth`.
struct Weights {
    factorial: Vec<f64>,
}

impl Weights {
    fn new(max_depth: usize) -> Self {
        let mut factorial = vec![1.0; max_depth + 2];
        for i in 1..factorial.len() {
            factorial[i] = factorial[i - 1] * i as f64;
        }
        Self { factorial }
    }

    fn positive(&self, a: usize, b: usize) -> f64 {
        self.factorial[a - 1] * self.factorial[b] / self.factorial[a + b]
    }

    fn negative(&self, a: usize, b: usize) -> f64 {
        self.factorial[a] * self.factorial[b - 1] / self.factorial[a + b]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Foreground,
    Background,
}

struct PairWalk<'a> {
    tree: &'a RegressionTree,
    x: &'a [f64],
    r: &'a [f64],
    weights: &'a Weights,
    /// Features pinned to one row along the current path.
    pinned: Vec<(usize, Side)>,
}

impl PairWalk<'_> {
    fn walk(&mut self, node: usize, scale: f64, phi: &mut [f64]) {
        let n = self.tree.node(node);
        let (Some(left), Some(right)) = (n.left, n.right) else {
            self.credit(n.leaf_value * scale, phi);
            return;
        };
        let f = n.split_feature;
        let x_child = if self.x[f] < n.threshold { left } else { right };
        let r_child = if self.r[f] < n.threshold { left } else { right };
        match self.pinned.iter().find(|(g, _)| *g == f).map(|p| p.1) {
            Some(Side::Foreground) => self.walk(x_child, scale, phi),
            Some(Side::Background) => self.walk(r_child, scale, phi),
            None if x_child == r_child => self.walk(x_child, scale, phi),
            None => {
                self.pinned.push((f, Side::Foreground));
                self.walk(x_child, scale, phi);
                self.pinned.last_mut().expect("pushed").1 = Side::Background;
                self.walk(r_child, scale, phi);
                self.pinned.pop();
            }
        }
    }

    fn credit(&self, value: f64, phi: &mut [f64]) {
        if self.pinned.is_empty() || value == 0.0 {
            return;
        }
        let a = self.pinned.iter().filter(|p| p.1 == Side::Foreground).count();
        let b = self.pinned.len() - a;
        let pos = if a > 0 {
            value * self.weights.positive(a, b)
        } else {
            0.0
        };
        let neg = if b > 0 {
            value * self.weights.negative(a, b)
        } else {
            0.0
        };
        for &(f, side) in &self.pinned {
            match side {
                Side::Foreground => phi[f] += pos,
                Side::Background => phi[f] -= neg,
            }
        }
    }
}

/// Interventional SHAP values of every class margin for one row, as a
/// `p × k` matrix. For each class `c`, the column sums to
/// `margin_c(x) − mean_r margin_c(r)`; base scores contribute nothing.
pub fn shap_single(e: &Ensemble, x: ArrayView1<'_, f64>, bg: &BackgroundSet) -> Result<Array2<f64>> {
    let p = e.n_features;
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.len(),
        });
    }
    if bg.n_features() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bg.n_features(),
        });
    }
    let x = x.to_vec();
    let k = e.n_classes();
    let depth = e.class_trees().map(|(_, t)| t.depth()).max().unwrap_or(0);
    let weights = Weights::new(depth);
    let scale = e.eta / bg.len() as f64;
    let mut columns = vec![vec![0.0; p]; k];
    let bg_rows: Vec<Vec<f64>> = bg.rows().outer_iter().map(|r| r.to_vec()).collect();
    for (c, tree) in e.class_trees() {
        for r in &bg_rows {
            let mut walk = PairWalk {
                tree,
                x: &x,
                r,
                weights: &weights,
                pinned: Vec::with_capacity(depth),
            };
            walk.walk(0, scale, &mut columns[c]);
        }
    }
    Ok(Array2::from_shape_fn((p, k), |(i, c)| columns[c][i]))
}
