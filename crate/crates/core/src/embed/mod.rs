//! Two-dimensional embeddings: deterministic PCA and a UMAP-style neighbor
//! embedding.

mod neighbor;

pub use neighbor::{fit_ab, neighbor_embed, NeighborConfig, DEFAULT_AB};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::shap::{read_matrix_csv, write_matrix_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMethod {
    Pca,
    Neighbor,
}

impl fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedMethod::Pca => "pca",
            EmbedMethod::Neighbor => "neighbor",
        })
    }
}

impl FromStr for EmbedMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(EmbedMethod::Pca),
            "neighbor" | "umap" => Ok(EmbedMethod::Neighbor),
            other => Err(Error::InvalidParameter(format!(
                "unknown embedding method {other:?} (expected pca or neighbor)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding2D {
    /// `n × 2`.
    pub coords: Array2<f64>,
    pub method: EmbedMethod,
    /// Variance along each component (PCA only).
    pub explained_variance: Option<[f64; 2]>,
    /// `q × 2` unit loading vectors (PCA only).
    pub loadings: Option<Array2<f64>>,
}

impl Embedding2D {
    pub fn n_samples(&self) -> usize {
        self.coords.nrows()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, &["x".to_owned(), "y".to_owned()], &self.coords)
    }

    /// Reads `x,y` coordinates written by [`Embedding2D::write_csv`].
    pub fn read_csv(path: impl AsRef<Path>, method: EmbedMethod) -> Result<Self> {
        let (header, coords) = read_matrix_csv(path)?;
        if header != ["x", "y"] {
            return Err(Error::Csv(format!("expected columns x,y, found {header:?}")));
        }
        Ok(Self {
            coords,
            method,
            explained_variance: None,
            loadings: None,
        })
    }
}

/// Leading two eigenpairs of a second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAxes {
    /// `q × 2`, columns orthonormal, largest-magnitude entry of each positive.
    pub loadings: Array2<f64>,
    pub variances: [f64; 2],
    /// Trace of the second-moment matrix.
    pub total: f64,
}

impl PrincipalAxes {
    /// Fits axes to the rows of `m` about the origin, dividing by `denom`.
    /// No centering is applied.
    pub fn about_origin(m: &Array2<f64>, denom: f64) -> Result<Self> {
        let (n, q) = m.dim();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if q < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 columns for a 2-D projection, got {q}"
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value in projection input".into()));
        }
        let cov = m.t().dot(m) / denom;
        let total = cov.diag().sum();
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(total > (1e-12 * scale).powi(2) * q as f64) {
            return Err(Error::Degenerate(
                "all rows are identical; no direction carries variance".into(),
            ));
        }

        let sym = DMatrix::from_fn(q, q, |i, j| cov[[i, j]]);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut loadings = Array2::zeros((q, 2));
        let mut variances = [0.0; 2];
        for (slot, &idx) in order.iter().take(2).enumerate() {
            let v = eig.eigenvectors.column(idx);
            let norm = v.norm();
            let mut pivot = 0;
            for j in 1..q {
                if v[j].abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..q {
                loadings[[j, slot]] = sign * v[j] / norm;
            }
            variances[slot] = eig.eigenvalues[idx].max(0.0);
        }
        Ok(Self {
            loadings,
            variances,
            total,
        })
    }

    pub fn project(&self, m: &Array2<f64>) -> Array2<f64> {
        m.dot(&self.loadings)
    }
}

/// Column means of `m`.
pub fn column_means(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(m.ncols()))
}

/// PCA onto the top two principal directions of the column-centered matrix.
pub fn pca_embed(m: &Array2<f64>) -> Result<Embedding2D> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    let centered = m - &column_means(m);
    let axes = PrincipalAxes::about_origin(&centered, (n - 1) as f64)?;
    Ok(Embedding2D {
        coords: axes.project(&centered),
        method: EmbedMethod::Pca,
        explained_variance: Some(axes.variances),
        loadings: Some(axes.loadings),
    })
}
