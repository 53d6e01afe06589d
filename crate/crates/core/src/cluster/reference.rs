//! Naive HDBSCAN used as a test oracle.
//!
//! Builds the full distance matrix, runs Kruskal over every pair, then
//! constructs the cluster hierarchy top-down: a cluster's point set is cut by
//! deleting its heaviest spanning-tree edges and relabeling the pieces.

use ndarray::Array2;

use super::{lambda_of, ClusterLabels, HdbscanParams, Selection};
use crate::error::{Error, Result};

pub const REFERENCE_MAX_POINTS: usize = 200;

fn check_size(n: usize) -> Result<()> {
    if n > REFERENCE_MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "reference clustering is limited to {REFERENCE_MAX_POINTS} points, got {n}"
        )));
    }
    Ok(())
}

fn reachability_matrix(m: &Array2<f64>, min_samples: usize) -> Result<Array2<f64>> {
    let n = m.nrows();
    if min_samples < 1 || min_samples >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= min_samples < n, got min_samples = {min_samples}, n = {n}"
        )));
    }
    let dist = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut s = 0.0;
        for c in 0..m.ncols() {
            let d = m[[i, c]] - m[[j, c]];
            s += d * d;
        }
        s.sqrt()
    });
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[[i, j]]).collect();
            row.sort_by(f64::total_cmp);
            row[min_samples - 1]
        })
        .collect();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        dist[[i, j]].max(core[i]).max(core[j])
    }))
}

/// Kruskal's algorithm over all `n(n−1)/2` mutual-reachability edges.
pub fn reference_mst(m: &Array2<f64>, min_samples: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = m.nrows();
    check_size(n)?;
    let reach = reachability_matrix(m, min_samples)?;
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            all.push((i, j, reach[[i, j]]));
        }
    }
    all.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut component: Vec<usize> = (0..n).collect();
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (i, j, w) in all {
        let (ci, cj) = (component[i], component[j]);
        if ci != cj {
            for c in component.iter_mut() {
                if *c == cj {
                    *c = ci;
                }
            }
            tree.push((i, j, w));
        }
    }
    Ok(tree)
}

struct RefCluster {
    parent: Option<usize>,
    birth: f64,
    members: Vec<usize>,
    children: Vec<usize>,
    /// `(point, λ at which it left this cluster)`.
    exits: Vec<(usize, f64)>,
}

/// Connected pieces of `points` using only `edges` among them.
fn pieces(points: &[usize], edges: &[(usize, usize, f64)], n: usize) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; n];
    for &p in points {
        label[p] = p;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b, _) in edges {
            if label[a] == usize::MAX || label[b] == usize::MAX || label[a] == label[b] {
                continue;
            }
            let low = label[a].min(label[b]);
            label[a] = low;
            label[b] = low;
            changed = true;
        }
    }
    let mut roots: Vec<usize> = points.iter().map(|&p| label[p]).collect();
    roots.sort_unstable();
    roots.dedup();
    roots
        .into_iter()
        .map(|r| points.iter().copied().filter(|&p| label[p] == r).collect())
        .collect()
}

/// The same clustering as [`hdbscan`](super::hdbscan), computed naively.
/// Limited to [`REFERENCE_MAX_POINTS`] points.
pub fn reference_hdbscan(m: &Array2<f64>, params: &HdbscanParams) -> Result<ClusterLabels> {
    let n = m.nrows();
    check_size(n)?;
    params.validate(n)?;
    let mst = reference_mst(m, params.min_samples)?;
    let mcs = params.min_cluster_size;

    let mut clusters = vec![RefCluster {
        parent: None,
        birth: 0.0,
        members: (0..n).collect(),
        children: Vec::new(),
        exits: Vec::new(),
    }];
    if n >= mcs {
        let mut todo = vec![(0usize, (0..n).collect::<Vec<usize>>())];
        while let Some((c, mut set)) = todo.pop() {
            loop {
                let inside: Vec<(usize, usize, f64)> = mst
                    .iter()
                    .copied()
                    .filter(|&(a, b, _)| set.contains(&a) && set.contains(&b))
                    .collect();
                let top = inside.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
                let lambda = lambda_of(top);
                let kept: Vec<_> = inside.iter().copied().filter(|e| e.2 < top).collect();
                let parts = pieces(&set, &kept, n);
                let big: Vec<&Vec<usize>> = parts.iter().filter(|p| p.len() >= mcs).collect();
                for part in parts.iter().filter(|p| p.len() < mcs) {
                    clusters[c].exits.extend(part.iter().map(|&p| (p, lambda)));
                }
                match big.len() {
                    0 => break,
                    1 => set = big[0].clone(),
                    _ => {
                        for part in big {
                            clusters[c].exits.extend(part.iter().map(|&p| (p, lambda)));
                            let id = clusters.len();
                            clusters.push(RefCluster {
                                parent: Some(c),
                                birth: lambda,
                                members: part.clone(),
                                children: Vec::new(),
                                exits: Vec::new(),
                            });
                            clusters[c].children.push(id);
                            todo.push((id, part.clone()));
                        }
                        break;
                    }
                }
            }
        }
    }

    let stability: Vec<f64> = clusters
        .iter()
        .map(|c| c.exits.iter().map(|&(_, l)| l - c.birth).sum())
        .collect();

    fn eom(c: usize, clusters: &[RefCluster], stability: &[f64]) -> (f64, Vec<usize>) {
        if clusters[c].children.is_empty() {
            return (stability[c], vec![c]);
        }
        let mut total = 0.0;
        let mut picked = Vec::new();
        for &ch in &clusters[c].children {
            let (s, p) = eom(ch, clusters, stability);
            total += s;
            picked.extend(p);
        }
        if total > stability[c] {
            (total, picked)
        } else {
            (stability[c], vec![c])
        }
    }
    let selected: Vec<usize> = match params.selection {
        Selection::Eom => clusters[0]
            .children
            .iter()
            .flat_map(|&ch| eom(ch, &clusters, &stability).1)
            .collect(),
        Selection::Leaf => (1..clusters.len())
            .filter(|&c| clusters[c].children.is_empty())
            .collect(),
    };

    let mut raw: Vec<Option<usize>> = vec![None; n];
    for &c in &selected {
        debug_assert!(clusters[c].parent.is_some());
        for &p in &clusters[c].members {
            raw[p] = Some(c);
        }
    }
    Ok(ClusterLabels::from_raw(&raw, |c| stability[c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::hdbscan;
    use crate::rng::RngStream;

    #[test]
    fn size_limit() {
        let m = Array2::zeros((201, 2));
        assert!(reference_hdbscan(&m, &HdbscanParams::default()).is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let mut m = Array2::zeros((36, 2));
        for i in 18..36 {
            m[[i, 1]] = 5.0;
        }
        let p = HdbscanParams {
            min_cluster_size: 15,
            min_samples: 4,
            selection: Selection::Eom,
        };
        let l = reference_hdbscan(&m, &p).unwrap();
        assert_eq!(l.n_clusters(), 2);
        assert!(l.labels[..18].iter().all(|&x| x == 0));
        assert_eq!(l, hdbscan(&m, &p).unwrap());
    }

    #[test]
    fn agrees_with_fast_version() {
        for seed in 0..10 {
            let mut rng = RngStream::new(seed, 3);
            let m = Array2::from_shape_fn((50, 2), |(i, _)| (i % 3) as f64 * 4.0 + rng.standard_normal());
            let p = HdbscanParams {
                min_cluster_size: 5,
                min_samples: 3,
                selection: Selection::Eom,
            };
            assert_eq!(
                reference_hdbscan(&m, &p).unwrap().labels,
                hdbscan(&m, &p).unwrap().labels
            );
        }
    }
}
