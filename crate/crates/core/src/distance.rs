//! Euclidean distances and exact nearest neighbors.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Euclidean distance, summed in index order.
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The `k` nearest other rows of every row, nearest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

/// Exact k-NN by brute force. The query row is excluded from its own list and
/// equal distances are ordered by row index.
pub fn knn(m: &Array2<f64>, k: usize) -> Result<Neighbors> {
    let n = m.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= neighbors < n, got neighbors = {k}, n = {n}"
        )));
    }
    let lists: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = m.row(i);
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(xi, m.row(j)), j))
                .collect();
            let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            all.select_nth_unstable_by(k - 1, by);
            all.truncate(k);
            all.sort_unstable_by(by);
            all.into_iter().map(|(d, j)| (j, d)).unzip()
        })
        .collect();
    let (indices, distances) = lists.into_iter().unzip();
    Ok(Neighbors { indices, distances })
}
