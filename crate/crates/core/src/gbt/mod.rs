//! Multi-class gradient-boosted trees with a softmax objective.

mod fit;
mod metrics;
mod tree;

pub use fit::{fit, fit_traced, leaf_objective, leaf_weight, softmax_cross_entropy, softmax_grad_hess};
pub use metrics::{classification_report, ClassMetrics, ClassificationReport};
pub use tree::{RegressionTree, TreeNode};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub rounds: usize,
    pub eta: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            eta: 0.3,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

pub const MODEL_FORMAT: &str = "shapclust-ensemble/1";

/// A trained model: per-class base margins plus `rounds × k` trees.
///
/// `margin_c(x) = base_score[c] + eta · Σ_r trees[r][c](x)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub format: String,
    pub base_score: Vec<f64>,
    pub eta: f64,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub trees: Vec<Vec<RegressionTree>>,
}

impl Ensemble {
    pub fn new(base_score: Vec<f64>, eta: f64, n_features: usize, trees: Vec<Vec<RegressionTree>>) -> Result<Self> {
        let k = base_score.len();
        if k == 0 {
            return Err(Error::InvalidParameter("ensemble with no classes".into()));
        }
        for round in &trees {
            if round.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: round.len(),
                });
            }
            for tree in round {
                if tree.max_feature().is_some_and(|f| f >= n_features) {
                    return Err(Error::InvalidParameter(
                        "tree splits on a feature beyond n_features".into(),
                    ));
                }
            }
        }
        Ok(Self {
            format: MODEL_FORMAT.into(),
            base_score,
            eta,
            n_features,
            feature_names: crate::data::default_feature_names(n_features),
            class_names: crate::data::default_class_names(k),
            trees,
        })
    }

    pub fn with_names(mut self, features: Vec<String>, classes: Vec<String>) -> Self {
        self.feature_names = features;
        self.class_names = classes;
        self
    }

    pub fn n_classes(&self) -> usize {
        self.base_score.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    /// `(class, tree)` pairs in round-major order.
    pub fn class_trees(&self) -> impl Iterator<Item = (usize, &RegressionTree)> {
        self.trees.iter().flat_map(|round| round.iter().enumerate())
    }

    pub fn predict_margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.margins_unchecked(x))
    }

    pub(crate) fn margins_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_classes()];
        for (c, tree) in self.class_trees() {
            sums[c] += tree.predict(x);
        }
        self.base_score
            .iter()
            .zip(sums)
            .map(|(b, s)| b + self.eta * s)
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_margins(x)?))
    }

    /// Argmax of the margins; ties go to the lowest class index.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_margins(x)?))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Ensemble = serde_json::from_str(&text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format {:?}",
                model.format
            )));
        }
        let checked = Ensemble::new(
            model.base_score.clone(),
            model.eta,
            model.n_features,
            model.trees.clone(),
        )?;
        for round in &model.trees {
            for tree in round {
                RegressionTree::from_nodes(tree.nodes().to_vec())?;
            }
        }
        Ok(checked.with_names(model.feature_names, model.class_names))
    }
}

pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
