use super::{ClusterLabels, Selection};
use crate::error::{Error, Result};

/// One cluster of the condensed tree. Cluster 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedCluster {
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    /// λ at which the cluster split into sub-clusters or dissolved.
    pub lambda_death: f64,
    /// Points present at birth.
    pub size: usize,
    pub children: Vec<usize>,
    /// `Σ_p (λ_p − λ_birth)` over the points present at birth, where `λ_p` is
    /// the level at which `p` left this cluster.
    pub stability: f64,
}

/// Condensed cluster hierarchy. Clusters are stored parents-first.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedTree {
    pub clusters: Vec<CondensedCluster>,
    /// Innermost cluster each point belonged to.
    pub point_cluster: Vec<usize>,
    /// λ at which each point left that cluster.
    pub point_lambda: Vec<f64>,
}

impl CondensedTree {
    pub fn n_points(&self) -> usize {
        self.point_cluster.len()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&c| self.clusters[c].children.is_empty())
            .collect()
    }

    /// Clusters chosen by `selection`. The root is never chosen.
    pub fn select(&self, selection: Selection) -> Vec<usize> {
        let mut selected = match selection {
            Selection::Leaf => self.leaves(),
            Selection::Eom => {
                let count = self.clusters.len();
                let mut best = vec![0.0; count];
                let mut chosen = vec![false; count];
                for c in (0..count).rev() {
                    let node = &self.clusters[c];
                    let below: f64 = node.children.iter().map(|&ch| best[ch]).sum();
                    if node.children.is_empty() || node.stability >= below {
                        best[c] = node.stability;
                        chosen[c] = true;
                    } else {
                        best[c] = below;
                    }
                }
                // keep only the topmost chosen cluster on each root-to-leaf path
                let mut out = Vec::new();
                let mut stack: Vec<usize> = self.clusters[0].children.clone();
                while let Some(c) = stack.pop() {
                    if chosen[c] {
                        out.push(c);
                    } else {
                        stack.extend(self.clusters[c].children.iter().copied());
                    }
                }
                out
            }
        };
        selected.retain(|&c| c != 0);
        selected.sort_unstable();
        selected
    }

    /// Labels points by the selected cluster (if any) containing them.
    pub fn labels(&self, selected: &[usize]) -> ClusterLabels {
        let mut owner: Vec<Option<usize>> = vec![None; self.clusters.len()];
        for c in 0..self.clusters.len() {
            owner[c] = if selected.contains(&c) {
                Some(c)
            } else {
                self.clusters[c].parent.and_then(|p| owner[p])
            };
        }
        let raw: Vec<Option<usize>> = self.point_cluster.iter().map(|&c| owner[c]).collect();
        ClusterLabels::from_raw(&raw, |c| self.clusters[c].stability)
    }

    /// Structural checks: one root, parents listed before children, child
    /// sizes within the parent's, λ non-decreasing from root to leaf.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Numeric(format!("inconsistent condensed tree: {msg}")));
        if self.clusters.is_empty() || self.clusters[0].parent.is_some() {
            return bad("missing root".into());
        }
        for (c, node) in self.clusters.iter().enumerate() {
            if c > 0 {
                match node.parent {
                    Some(p) if p < c => {
                        if !self.clusters[p].children.contains(&c) {
                            return bad(format!("cluster {c} missing from its parent"));
                        }
                        if node.lambda_birth < self.clusters[p].lambda_birth {
                            return bad(format!("cluster {c} born before its parent"));
                        }
                    }
                    _ => return bad(format!("cluster {c} has no earlier parent")),
                }
            }
            if !(node.lambda_birth >= 0.0) || node.lambda_death < node.lambda_birth {
                return bad(format!("cluster {c} has invalid λ range"));
            }
            let inner: usize = node.children.iter().map(|&ch| self.clusters[ch].size).sum();
            if inner > node.size {
                return bad(format!("children of cluster {c} exceed its size"));
            }
            let direct = self.point_cluster.iter().filter(|&&pc| pc == c).count();
            if inner + direct != node.size {
                return bad(format!("points of cluster {c} do not add up"));
            }
        }
        for (p, (&c, &l)) in self.point_cluster.iter().zip(&self.point_lambda).enumerate() {
            if l < self.clusters[c].lambda_birth {
                return bad(format!("point {p} leaves before its cluster forms"));
            }
        }
        Ok(())
    }
}

/// Builds a condensed tree from a multi-way dendrogram.
///
/// `children[v]` lists the sub-nodes that merge at `height[v]`; nodes
/// `0..n_points` are the points. `root` spans every point.
pub(crate) fn condense(
    n_points: usize,
    children: &[Vec<usize>],
    height: &[f64],
    size: &[usize],
    root: usize,
    min_cluster_size: usize,
) -> CondensedTree {
    let mut clusters = vec![CondensedCluster {
        parent: None,
        lambda_birth: 0.0,
        lambda_death: 0.0,
        size: size[root],
        children: Vec::new(),
        stability: 0.0,
    }];
    let mut point_cluster = vec![0; n_points];
    let mut point_lambda = vec![0.0; n_points];

    let points_under = |node: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v < n_points {
                out.push(v);
            } else {
                stack.extend(children[v].iter().copied());
            }
        }
        out
    };

    if size[root] < min_cluster_size || root < n_points {
        for p in points_under(root) {
            point_lambda[p] = if root < n_points {
                0.0
            } else {
                super::lambda_of(height[root])
            };
        }
        return CondensedTree {
            clusters,
            point_cluster,
            point_lambda,
        };
    }

    let mut work = vec![(root, 0usize)];
    while let Some((node, cluster)) = work.pop() {
        let lambda = super::lambda_of(height[node]);
        let big: Vec<usize> = children[node]
            .iter()
            .copied()
            .filter(|&ch| size[ch] >= min_cluster_size)
            .collect();
        let splits = big.len() >= 2;
        for &ch in &children[node] {
            if size[ch] >= min_cluster_size {
                if splits {
                    let id = clusters.len();
                    clusters.push(CondensedCluster {
                        parent: Some(cluster),
                        lambda_birth: lambda,
                        lambda_death: lambda,
                        size: size[ch],
                        children: Vec::new(),
                        stability: 0.0,
                    });
                    clusters[cluster].children.push(id);
                    work.push((ch, id));
                } else {
                    work.push((ch, cluster));
                }
            } else {
                for p in points_under(ch) {
                    point_cluster[p] = cluster;
                    point_lambda[p] = lambda;
                }
            }
        }
        if big.len() != 1 {
            clusters[cluster].lambda_death = lambda;
        }
    }

    let mut stability = vec![0.0; clusters.len()];
    for p in 0..n_points {
        let c = point_cluster[p];
        stability[c] += point_lambda[p] - clusters[c].lambda_birth;
    }
    for c in 1..clusters.len() {
        let parent = clusters[c].parent.expect("non-root");
        stability[parent] += clusters[c].size as f64 * (clusters[c].lambda_birth - clusters[parent].lambda_birth);
    }
    for (node, s) in clusters.iter_mut().zip(stability) {
        node.stability = s;
    }
    CondensedTree {
        clusters,
        point_cluster,
        point_lambda,
    }
}
