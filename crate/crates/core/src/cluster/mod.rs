//! HDBSCAN density clustering, a naive reference implementation, and the
//! adjusted Rand index.
//!
//! Equal merge heights are handled as a single multi-way split, so the
//! cluster hierarchy depends only on the thresholded mutual-reachability
//! graph and not on which of several tied spanning trees was found.

mod ari;
mod condensed;
mod hdbscan;
mod reference;

pub use ari::adjusted_rand_index;
pub use condensed::{CondensedCluster, CondensedTree};
pub use hdbscan::{condensed_tree, core_distances, hdbscan, hdbscan_with_tree, mutual_reachability_mst};
pub use reference::{reference_hdbscan, reference_mst, REFERENCE_MAX_POINTS};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Heights are converted to `λ = 1 / max(d, LAMBDA_DISTANCE_FLOOR)`.
pub const LAMBDA_DISTANCE_FLOOR: f64 = 1e-12;

pub(crate) fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(LAMBDA_DISTANCE_FLOOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Excess of mass: the set of non-overlapping clusters with the largest
    /// total stability.
    Eom,
    /// Every leaf of the condensed tree.
    Leaf,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Eom => "eom",
            Selection::Leaf => "leaf",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eom" => Ok(Selection::Eom),
            "leaf" => Ok(Selection::Leaf),
            other => Err(Error::InvalidParameter(format!(
                "unknown cluster selection {other:?} (expected eom or leaf)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub selection: Selection,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 15,
            min_samples: 10,
            selection: Selection::Eom,
        }
    }
}

impl HdbscanParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "min_cluster_size must be at least 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.min_samples < 1 {
            return Err(Error::InvalidParameter("min_samples must be at least 1".into()));
        }
        if n <= self.min_samples {
            return Err(Error::InvalidParameter(format!(
                "need more points ({n}) than min_samples ({})",
                self.min_samples
            )));
        }
        Ok(())
    }
}

/// Per-sample cluster ids, `-1` for noise, clusters numbered `0..c` by
/// decreasing size.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    /// Stability of each selected cluster, indexed by cluster id.
    pub persistence: Vec<f64>,
}

impl ClusterLabels {
    /// Renumbers raw cluster ids by decreasing size (ties: the cluster holding
    /// the lowest sample index first). `stability[raw]` follows its cluster.
    pub(crate) fn from_raw(raw: &[Option<usize>], stability: impl Fn(usize) -> f64) -> Self {
        let mut ids: Vec<usize> = raw.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let size = |id: usize| raw.iter().filter(|r| **r == Some(id)).count();
        let first = |id: usize| raw.iter().position(|r| *r == Some(id)).unwrap_or(usize::MAX);
        ids.sort_by(|&a, &b| size(b).cmp(&size(a)).then(first(a).cmp(&first(b))));
        let labels = raw
            .iter()
            .map(|r| match r {
                Some(id) => ids.iter().position(|x| x == id).expect("known id") as i64,
                None => -1,
            })
            .collect();
        let persistence = ids.iter().map(|&id| stability(id)).collect();
        Self { labels, persistence }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l < 0).count() as f64 / self.labels.len() as f64
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster as i64)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Writes `sample,cluster` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["sample", "cluster"]).map_err(csv_err)?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`ClusterLabels::write_csv`]. Persistence is
    /// not stored and comes back as zeros.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = r.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        let col = headers
            .iter()
            .position(|h| h == "cluster")
            .ok_or_else(|| Error::MissingLabelColumn("cluster".into()))?;
        let mut labels = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let field = rec.get(col).unwrap_or("");
            let l: i64 = field.parse().map_err(|_| Error::NonNumeric {
                row: row + 1,
                column: "cluster".into(),
                value: field.to_owned(),
            })?;
            if l < -1 {
                return Err(Error::Csv(format!("cluster id {l} below -1 at row {}", row + 1)));
            }
            labels.push(l);
        }
        let c = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
        for id in 0..c as i64 {
            if !labels.contains(&id) {
                return Err(Error::Csv(format!("cluster ids are not contiguous: {id} is missing")));
            }
        }
        Ok(Self {
            labels,
            persistence: vec![0.0; c],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renumber_by_size() {
        let raw = [Some(7), None, Some(3), Some(3), Some(7), Some(3), Some(9)];
        let l = ClusterLabels::from_raw(&raw, |id| id as f64);
        assert_eq!(l.labels, vec![1, -1, 0, 0, 1, 0, 2]);
        assert_eq!(l.persistence, vec![3.0, 7.0, 9.0]);
        assert_eq!(l.sizes(), vec![3, 2, 1]);
        assert_eq!(l.n_clusters(), 3);
        assert!((l.noise_fraction() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let l = ClusterLabels {
            labels: vec![0, -1, 1, 0],
            persistence: vec![0.0, 0.0],
        };
        l.write_csv(dir.path().join("c.csv")).unwrap();
        assert_eq!(ClusterLabels::read_csv(dir.path().join("c.csv")).unwrap(), l);
    }

    #[test]
    fn read_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "sample,cluster\n0,0\n1,2\n").unwrap();
        assert!(ClusterLabels::read_csv(&p).is_err());
    }

    #[test]
    fn params_validated() {
        let p = HdbscanParams::default();
        assert!(p.validate(10).is_err());
        assert!(p.validate(11).is_ok());
        let small = HdbscanParams {
            min_cluster_size: 1,
            ..p
        };
        assert!(small.validate(100).is_err());
        assert_eq!("leaf".parse::<Selection>().unwrap(), Selection::Leaf);
    }
}
