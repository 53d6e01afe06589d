use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One node record. Leaves have neither child; internal nodes have both.
/// `leaf_value` on an internal node is the weight the node would carry as a
/// leaf and is kept for inspection only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub split_feature: usize,
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_value: f64,
    /// Sum of hessians of the training rows reaching this node.
    pub cover: f64,
}

impl TreeNode {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self {
            split_feature: 0,
            threshold: 0.0,
            left: None,
            right: None,
            leaf_value: value,
            cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }
}

/// A binary regression tree rooted at node 0. Rows with `x[f] < threshold`
/// go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("tree with no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match (node.left, node.right) {
                (None, None) => {
                    if !node.leaf_value.is_finite() {
                        return Err(Error::InvalidParameter(format!("leaf {i} has a non-finite value")));
                    }
                }
                (Some(l), Some(r)) => {
                    for child in [l, r] {
                        if child <= i || child >= nodes.len() {
                            return Err(Error::InvalidParameter(format!("node {i} has invalid child {child}")));
                        }
                        parents[child] += 1;
                    }
                }
                _ => return Err(Error::InvalidParameter(format!("node {i} has exactly one child"))),
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err(Error::InvalidParameter("nodes do not form a tree".into()));
        }
        Ok(Self { nodes })
    }

    /// A single-leaf tree.
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::leaf(value, 0.0)],
        }
    }

    /// A depth-one tree.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                TreeNode {
                    split_feature: feature,
                    threshold,
                    left: Some(1),
                    right: Some(2),
                    leaf_value: 0.0,
                    cover: 0.0,
                },
                TreeNode::leaf(left, 0.0),
                TreeNode::leaf(right, 0.0),
            ],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match (node.left, node.right) {
                (Some(l), Some(r)) => {
                    i = if x[node.split_feature] < node.threshold { l } else { r };
                }
                _ => return i,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].leaf_value
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + go(t, l).max(go(t, r)),
                _ => 0,
            }
        }
        go(self, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.split_feature)
            .max()
    }

    /// Features used by any internal node.
    pub fn uses_feature(&self, f: usize) -> bool {
        self.nodes.iter().any(|n| !n.is_leaf() && n.split_feature == f)
    }
}
