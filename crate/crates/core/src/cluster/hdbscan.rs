use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rayon::prelude::*;

use super::condensed::{condense, CondensedTree};
use super::{ClusterLabels, HdbscanParams};
use crate::distance::{euclidean, knn};
use crate::error::{Error, Result};

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances(m: &Array2<f64>, min_samples: usize) -> Result<Vec<f64>> {
    let nb = knn(m, min_samples)?;
    Ok(nb.distances.into_iter().map(|d| d[min_samples - 1]).collect())
}

/// Minimum spanning tree of the mutual-reachability graph by Prim's
/// algorithm, returned as `(low, high, weight)` sorted by weight then index.
pub fn mutual_reachability_mst(m: &Array2<f64>, min_samples: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in clustering input".into()));
    }
    let core = core_distances(m, min_samples)?;
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let row = m.row(current);
        let reach: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|v| {
                if in_tree[v] {
                    f64::INFINITY
                } else {
                    euclidean(row, m.row(v)).max(core[current]).max(core[v])
                }
            })
            .collect();
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            if reach[v] < best[v] || (reach[v] == best[v] && current < from[v]) {
                best[v] = reach[v];
                from[v] = current;
            }
            if next == usize::MAX || best[v] < best[next] {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((from[next].min(next), from[next].max(next), best[next]));
        current = next;
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    Ok(edges)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Condensed tree of the data under `params.min_cluster_size`.
pub fn condensed_tree(m: &Array2<f64>, params: &HdbscanParams) -> Result<CondensedTree> {
    let n = m.nrows();
    params.validate(n)?;
    let edges = mutual_reachability_mst(m, params.min_samples)?;

    // Multi-way single-linkage dendrogram: all edges of equal weight merge at once.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut height = vec![0.0; n];
    let mut size = vec![1usize; n];
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut uf = UnionFind::new(n);
    let mut start = 0;
    while start < edges.len() {
        let w = edges[start].2;
        let end = start + edges[start..].iter().take_while(|e| e.2 == w).count();
        let group = &edges[start..end];
        let before: Vec<(usize, usize)> = group
            .iter()
            .map(|&(a, b, _)| (node_of[uf.find(a)], node_of[uf.find(b)]))
            .collect();
        for &(a, b, _) in group {
            uf.union(a, b);
        }
        let mut merged: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (&(a, _, _), &(na, nb)) in group.iter().zip(&before) {
            let set = merged.entry(uf.find(a)).or_default();
            set.insert(na);
            set.insert(nb);
        }
        for (root, parts) in merged {
            let id = children.len();
            size.push(parts.iter().map(|&p| size[p]).sum());
            children.push(parts.into_iter().collect());
            height.push(w);
            node_of[root] = id;
        }
        start = end;
    }
    let root = children.len() - 1;
    Ok(condense(n, &children, &height, &size, root, params.min_cluster_size))
}

/// HDBSCAN labels and the condensed tree they were selected from.
pub fn hdbscan_with_tree(m: &Array2<f64>, params: &HdbscanParams) -> Result<(ClusterLabels, CondensedTree)> {
    let tree = condensed_tree(m, params)?;
    let selected = tree.select(params.selection);
    Ok((tree.labels(&selected), tree))
}

pub fn hdbscan(m: &Array2<f64>, params: &HdbscanParams) -> Result<ClusterLabels> {
    hdbscan_with_tree(m, params).map(|(labels, _)| labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Selection;
    use crate::rng::RngStream;
    use ndarray::array;

    fn params(mcs: usize, ms: usize) -> HdbscanParams {
        HdbscanParams {
            min_cluster_size: mcs,
            min_samples: ms,
            selection: Selection::Eom,
        }
    }

    /// Two tight blobs plus scattered outliers.
    fn blobs_with_outliers(seed: u64) -> Array2<f64> {
        let mut rng = RngStream::new(seed, 0);
        let mut m = Array2::zeros((65, 2));
        for i in 0..60 {
            let cx = if i < 30 { 0.0 } else { 50.0 };
            m[[i, 0]] = cx + rng.standard_normal();
            m[[i, 1]] = rng.standard_normal();
        }
        // outliers well away from both blobs
        let spots = [(25.0, 30.0), (-30.0, -25.0), (80.0, 30.0), (25.0, -35.0), (-25.0, 35.0)];
        for (j, (x, y)) in spots.iter().enumerate() {
            m[[60 + j, 0]] = *x;
            m[[60 + j, 1]] = *y;
        }
        m
    }

    #[test]
    fn too_few_points_are_noise() {
        let m = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let l = hdbscan(&m, &params(5, 1)).unwrap();
        assert_eq!(l.labels, vec![-1, -1, -1]);
    }

    #[test]
    fn two_blobs_and_outliers() {
        let m = blobs_with_outliers(3);
        let (l, tree) = hdbscan_with_tree(&m, &params(10, 5)).unwrap();
        tree.validate().unwrap();
        assert_eq!(l.n_clusters(), 2);
        assert!(l.labels[..30].iter().all(|&x| x == l.labels[0] && x >= 0));
        assert!(l.labels[30..60].iter().all(|&x| x == l.labels[30] && x >= 0));
        assert_ne!(l.labels[0], l.labels[30]);
        assert!(l.labels[60..].iter().all(|&x| x == -1));
    }

    #[test]
    fn equilateral_triple() {
        let h = 3f64.sqrt() / 2.0;
        let m = array![[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let mst = mutual_reachability_mst(&m, 1).unwrap();
        assert!(mst.iter().all(|e| (e.2 - 1.0).abs() < 1e-12));
        let l = hdbscan(&m, &params(2, 1)).unwrap();
        assert_eq!(l.labels, vec![-1, -1, -1]);
    }

    #[test]
    fn mutual_reachability_dominates_distance() {
        let mut rng = RngStream::new(4, 0);
        let m = Array2::from_shape_fn((40, 3), |_| rng.standard_normal());
        let core = core_distances(&m, 4).unwrap();
        for (a, b, w) in mutual_reachability_mst(&m, 4).unwrap() {
            assert!(w >= euclidean(m.row(a), m.row(b)));
            assert!(w >= core[a] && w >= core[b]);
        }
    }

    #[test]
    fn duplicates_form_clusters() {
        let mut m = Array2::zeros((40, 2));
        for i in 20..40 {
            m[[i, 0]] = 10.0;
        }
        let l = hdbscan(&m, &params(15, 5)).unwrap();
        assert_eq!(l.n_clusters(), 2);
        assert!(l.labels[..20].iter().all(|&x| x == 0));
        assert!(l.labels[20..].iter().all(|&x| x == 1));
    }

    #[test]
    fn leaf_never_fewer_than_eom() {
        for seed in 0..10 {
            let mut rng = RngStream::new(seed, 7);
            let m = Array2::from_shape_fn((80, 2), |(i, _)| (i % 4) as f64 * 6.0 + rng.standard_normal());
            let tree = condensed_tree(&m, &params(5, 3)).unwrap();
            tree.validate().unwrap();
            assert!(tree.select(Selection::Leaf).len() >= tree.select(Selection::Eom).len());
        }
    }

    #[test]
    fn errors() {
        let m = Array2::zeros((5, 2));
        assert!(hdbscan(&m, &params(2, 5)).is_err());
        assert!(hdbscan(&m, &params(1, 2)).is_err());
    }
}
