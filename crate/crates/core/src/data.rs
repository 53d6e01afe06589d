//! Labeled datasets, CSV ingestion, scaling and fold assignment.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// An `n × p` feature matrix with optional class labels in `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

/// `"Class 0"`, `"Class 1"`, ... used when labels are bare integers.
pub fn default_class_names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("Class {c}")).collect()
}

pub fn default_feature_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("Feature {i}")).collect()
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.dim();
        if feature_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: feature_names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        for (row, values) in features.outer_iter().enumerate() {
            if let Some(col) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: feature_names[col].clone(),
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: labels.len(),
                });
            }
            let k = class_names.len();
            if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
                return Err(Error::LabelOutOfRange { label: bad, classes: k });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    /// Unlabeled dataset with default feature names.
    pub fn from_matrix(features: Array2<f64>) -> Result<Self> {
        let p = features.ncols();
        Self::new(features, None, default_feature_names(p), Vec::new())
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect()),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        Dataset::new(
            features,
            self.labels.clone(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }
}

/// Loads a header-first CSV. With `label_column`, that column is removed from
/// the features and parsed as labels: if every cell is a non-negative integer
/// the integers are the class indices, otherwise cells are class names
/// indexed by first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = header.len();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.to_owned()))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&c| Some(c) != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row,
                expected: width,
                found: record.len(),
            });
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[c].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[c].clone(),
                });
            }
            values.push(v);
        }
        if let Some(li) = label_idx {
            raw_labels.push(record[li].to_owned());
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let features = Array2::from_shape_vec((n, feature_cols.len()), values).expect("row-major buffer matches shape");

    let (labels, class_names) = match label_idx {
        None => (None, Vec::new()),
        Some(_) => {
            let (y, names) = encode_labels(&raw_labels);
            (Some(y), names)
        }
    };
    Dataset::new(features, labels, feature_names, class_names)
}

fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let ints: Option<Vec<usize>> = raw.iter().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(ints) = ints {
        let k = ints.iter().max().map_or(0, |m| m + 1);
        return (ints, default_class_names(k));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            *index.entry(s.as_str()).or_insert_with(|| {
                names.push(s.clone());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

/// Writes `d` as CSV. Labels go in a trailing `label_column`; they are written
/// as integers when the class names are the defaults, otherwise as names.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(d, file, label_column)
}

pub fn write_csv_to<W: std::io::Write>(d: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    if d.labels.is_some() {
        header.push(label_column);
    }
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    let integer_labels = d.class_names == default_class_names(d.n_classes());
    let mut fields = Vec::with_capacity(header.len());
    for (i, row) in d.features.outer_iter().enumerate() {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        if let Some(y) = &d.labels {
            fields.push(if integer_labels {
                y[i].to_string()
            } else {
                d.class_names[y[i]].clone()
            });
        }
        w.write_record(&fields).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Maps every column to `[0, 1]` by `(x - min) / (max - min)`; constant
/// columns become all zeros.
pub fn minmax_scale(d: &Dataset) -> Dataset {
    let mut features = d.features.clone();
    for mut col in features.columns_mut() {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    Dataset { features, ..d.clone() }
}

/// A balanced partition of `0..n` into `l` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    folds: usize,
}

impl FoldAssignment {
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn n_folds(&self) -> usize {
        self.folds
    }

    /// Ascending indices of samples in `fold`.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Ascending indices of samples outside `fold`.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

pub fn make_folds(n: usize, l: usize, rng: &mut RngStream) -> Result<FoldAssignment> {
    if l < 2 || l > n {
        return Err(Error::InvalidParameter(format!(
            "fold count must satisfy 2 <= l <= n (l = {l}, n = {n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % l;
    }
    Ok(FoldAssignment { fold_of, folds: l })
}

/// Random train/test split with `round(n * test_fraction)` test rows.
/// Both index lists are ascending.
pub fn train_test_split(n: usize, test_fraction: f64, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let test = rng.sample_indices(n, n_test);
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}
