//! SHAP attribution: interventional TreeSHAP, a brute-force reference, and
//! the repeated out-of-fold protocol that produces an `n × p × k` tensor.

mod brute;
mod cv;
mod tree_shap;

pub use brute::{brute_force_shapley, MAX_ENUMERATED_FEATURES};
pub use cv::{average_runs, cv_shap, shap_run, CvShap, CvShapConfig, ShapRun};
pub use tree_shap::shap_single;

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Rows standing in for "absent" features.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSet {
    rows: Array2<f64>,
}

impl BackgroundSet {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::InvalidParameter("empty background set".into()));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }
}

/// SHAP values in margin units, `values[[sample, feature, class]]`.
///
/// `base_values` is the per-class anchor shared by every sample. Out-of-fold
/// values come from several models whose expected outputs differ slightly,
/// so `sample_base` keeps the exact per-sample anchor: `sample_base[s] + Σᵢ
/// values[s, i, ·]` reproduces the averaged out-of-fold margins.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapTensor {
    pub values: Array3<f64>,
    pub base_values: Vec<f64>,
    pub sample_base: Array2<f64>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl ShapTensor {
    /// A tensor whose every sample shares `base_values`.
    pub fn with_common_base(
        values: Array3<f64>,
        base_values: Vec<f64>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p, k) = values.dim();
        if base_values.len() != k || feature_names.len() != p || class_names.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: base_values.len(),
            });
        }
        let sample_base = Array2::from_shape_fn((n, k), |(_, c)| base_values[c]);
        Ok(Self {
            values,
            base_values,
            sample_base,
            feature_names,
            class_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_features(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_classes(&self) -> usize {
        self.values.dim().2
    }

    /// The `p × k` attribution matrix of one sample.
    pub fn sample(&self, s: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), s)
    }

    /// Per-class totals `Σᵢ φᵢ` for one sample.
    pub fn sample_totals(&self, s: usize) -> Vec<f64> {
        self.sample(s).sum_axis(Axis(0)).to_vec()
    }

    /// `sample_base[s] + Σᵢ φᵢ`: the model output this sample's values explain.
    pub fn reconstructed(&self, s: usize) -> Vec<f64> {
        self.sample_totals(s)
            .iter()
            .zip(self.sample_base.row(s))
            .map(|(t, b)| t + b)
            .collect()
    }

    /// `n × (p·k)` matrix, column `i·k + c` holding feature `i`, class `c`.
    pub fn flatten(&self) -> Array2<f64> {
        let (n, p, k) = self.values.dim();
        self.values
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, p * k))
            .expect("contiguous tensor")
    }

    /// `"feature|class"` in flatten order.
    pub fn column_names(&self) -> Vec<String> {
        self.feature_names
            .iter()
            .flat_map(|f| self.class_names.iter().map(move |c| format!("{f}|{c}")))
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, &self.column_names(), &self.flatten())
    }

    pub fn write_base_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let row = Array2::from_shape_vec((1, self.base_values.len()), self.base_values.clone()).expect("shape");
        write_matrix_csv(path, &self.class_names, &row)
    }

    pub fn write_sample_base_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, &self.class_names, &self.sample_base)
    }

    /// Reads a flattened `shap.csv` and its `base_values.csv`. Every sample is
    /// anchored at the common base.
    pub fn read_csv(shap: impl AsRef<Path>, base: impl AsRef<Path>) -> Result<Self> {
        let (header, flat) = read_matrix_csv(shap)?;
        let mut features: Vec<String> = Vec::new();
        let mut classes: Vec<String> = Vec::new();
        for name in &header {
            let (f, c) = name
                .rsplit_once('|')
                .ok_or_else(|| Error::Csv(format!("column {name:?} is not of the form feature|class")))?;
            if features.last().map(String::as_str) != Some(f) {
                features.push(f.to_owned());
            }
            if !classes.iter().any(|x| x == c) {
                classes.push(c.to_owned());
            }
        }
        let (p, k) = (features.len(), classes.len());
        let expected: Vec<String> = features
            .iter()
            .flat_map(|f| classes.iter().map(move |c| format!("{f}|{c}")))
            .collect();
        if expected != header {
            return Err(Error::Csv("shap columns are not feature-major, class-minor".into()));
        }
        let (base_header, base) = read_matrix_csv(base)?;
        if base_header != classes || base.nrows() != 1 {
            return Err(Error::Csv("base values do not match the shap classes".into()));
        }
        let n = flat.nrows();
        let values = flat.into_shape_with_order((n, p, k)).expect("shape");
        ShapTensor::with_common_base(values, base.row(0).to_vec(), features, classes)
    }
}

/// Mean absolute SHAP value per (feature, class), `p × k`.
pub fn mean_abs_shap(t: &ShapTensor) -> Array2<f64> {
    let (n, p, k) = t.values.dim();
    if n == 0 {
        return Array2::zeros((p, k));
    }
    t.values.mapv(f64::abs).sum_axis(Axis(0)) / n as f64
}

/// Per-feature importance summed over classes.
pub fn feature_importance(t: &ShapTensor) -> Vec<f64> {
    mean_abs_shap(t).sum_axis(Axis(1)).to_vec()
}

/// Feature indices by descending importance (ties to the lower index).
pub fn importance_ranking(t: &ShapTensor) -> Vec<usize> {
    let totals = feature_importance(t);
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    order
}

pub(crate) fn write_matrix_csv(path: impl AsRef<Path>, header: &[String], m: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in m.outer_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_matrix_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Array2<f64>)> {
    let d = crate::data::load_csv(path, None)?;
    Ok((d.feature_names().to_vec(), d.features().clone()))
}
