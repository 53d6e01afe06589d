//! Repeated out-of-fold SHAP.
//!
//! Each repeat draws a fresh fold assignment. For every fold a model is fit
//! on the other folds and the fold's members are explained against a
//! background sampled from that model's own training rows. Runs are then
//! averaged element-wise.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;

use super::{shap_single, BackgroundSet, ShapTensor};
use crate::data::{make_folds, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::gbt::{fit, GbtConfig};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct CvShapConfig {
    pub folds: usize,
    pub repeats: usize,
    /// Background rows per fold model, capped by that model's training size.
    pub background: usize,
}

impl Default for CvShapConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: 5,
            background: 256,
        }
    }
}

/// One repeat of the fold protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapRun {
    pub folds: FoldAssignment,
    /// `n × p × k` out-of-fold values.
    pub values: Array3<f64>,
    /// Expected output (mean background margin) of the model that explained
    /// each sample, `n × k`.
    pub sample_base: Array2<f64>,
    /// Margins of the model that explained each sample, `n × k`.
    pub oof_margins: Array2<f64>,
}

impl ShapRun {
    /// Largest `|Σᵢ φᵢ − (f(x) − base)|` over samples and classes.
    pub fn max_additivity_error(&self) -> f64 {
        let totals = self.values.sum_axis(Axis(1));
        let mut worst: f64 = 0.0;
        for ((t, m), b) in totals.iter().zip(self.oof_margins.iter()).zip(self.sample_base.iter()) {
            worst = worst.max((t - (m - b)).abs());
        }
        worst
    }

    /// Sample-weighted mean of the fold models' expected outputs.
    pub fn mean_base(&self) -> Vec<f64> {
        self.sample_base.mean_axis(Axis(0)).expect("non-empty run").to_vec()
    }
}

#[derive(Clone, Debug)]
pub struct CvShap {
    pub tensor: ShapTensor,
    pub runs: Vec<ShapRun>,
}

impl CvShap {
    /// Across-run mean of out-of-fold margins, `n × k`.
    pub fn mean_oof_margins(&self) -> Array2<f64> {
        mean_of(self.runs.iter().map(|r| &r.oof_margins))
    }
}

/// Explains every sample once, out of fold, under the given assignment.
/// `rng` only drives background sampling (one derived stream per fold).
pub fn shap_run(
    d: &Dataset,
    cfg: &GbtConfig,
    folds: &FoldAssignment,
    background: usize,
    rng: &RngStream,
) -> Result<ShapRun> {
    if background == 0 {
        return Err(Error::InvalidParameter("background size must be at least 1".into()));
    }
    let (n, p, k) = (d.n_samples(), d.n_features(), d.n_classes());
    if folds.fold_of().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: folds.fold_of().len(),
        });
    }

    type FoldOutput = (Vec<usize>, Vec<Array2<f64>>, Vec<f64>, Vec<Vec<f64>>);
    let per_fold: Vec<FoldOutput> = (0..folds.n_folds())
        .into_par_iter()
        .map(|fold| -> Result<FoldOutput> {
            let members = folds.members(fold);
            let train_idx = folds.complement(fold);
            let model = fit(&d.subset(&train_idx), cfg)?;
            let mut bg_rng = rng.derive(fold as u64);
            let picks = bg_rng.sample_indices(train_idx.len(), background);
            let rows: Vec<usize> = picks.iter().map(|&j| train_idx[j]).collect();
            let bg = BackgroundSet::new(d.features().select(Axis(0), &rows))?;
            let mut base = vec![0.0; k];
            for r in bg.rows().outer_iter() {
                let m = model.predict_margins(r.as_slice().expect("row"))?;
                for c in 0..k {
                    base[c] += m[c];
                }
            }
            for b in &mut base {
                *b /= bg.len() as f64;
            }
            let explained: Vec<(Array2<f64>, Vec<f64>)> = members
                .par_iter()
                .map(|&s| {
                    let x = d.row(s);
                    let phi = shap_single(&model, x, &bg)?;
                    let m = model.predict_margins(x.as_slice().expect("row"))?;
                    Ok((phi, m))
                })
                .collect::<Result<_>>()?;
            let (phis, margins) = explained.into_iter().unzip();
            Ok((members, phis, base, margins))
        })
        .collect::<Result<_>>()?;

    let mut values = Array3::zeros((n, p, k));
    let mut sample_base = Array2::zeros((n, k));
    let mut oof_margins = Array2::zeros((n, k));
    for (members, phis, base, margins) in per_fold {
        for ((s, phi), m) in members.into_iter().zip(phis).zip(margins) {
            values.index_axis_mut(Axis(0), s).assign(&phi);
            for c in 0..k {
                sample_base[[s, c]] = base[c];
                oof_margins[[s, c]] = m[c];
            }
        }
    }
    Ok(ShapRun {
        folds: folds.clone(),
        values,
        sample_base,
        oof_margins,
    })
}

/// Repeated out-of-fold SHAP. Repeat `r` uses `rng.derive(2r)` for its folds
/// and `rng.derive(2r + 1)` for background sampling.
pub fn cv_shap(d: &Dataset, gbt: &GbtConfig, cv: &CvShapConfig, rng: &RngStream) -> Result<CvShap> {
    d.require_labels()?;
    if cv.repeats < 1 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let runs = (0..cv.repeats as u64)
        .map(|r| {
            let folds = make_folds(d.n_samples(), cv.folds, &mut rng.derive(2 * r))?;
            shap_run(d, gbt, &folds, cv.background, &rng.derive(2 * r + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let tensor = average_runs(&runs, d)?;
    Ok(CvShap { tensor, runs })
}

/// Element-wise mean of runs. The common anchor is the across-run mean of
/// each run's sample-weighted base.
pub fn average_runs(runs: &[ShapRun], d: &Dataset) -> Result<ShapTensor> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no runs to average".into()));
    }
    let count = runs.len() as f64;
    let mut values = runs[0].values.clone();
    for run in &runs[1..] {
        values += &run.values;
    }
    values /= count;
    let sample_base = mean_of(runs.iter().map(|r| &r.sample_base));
    let k = d.n_classes();
    let mut base_values = vec![0.0; k];
    for run in runs {
        for (b, m) in base_values.iter_mut().zip(run.mean_base()) {
            *b += m;
        }
    }
    for b in &mut base_values {
        *b /= count;
    }
    Ok(ShapTensor {
        values,
        base_values,
        sample_base,
        feature_names: d.feature_names().to_vec(),
        class_names: d.class_names().to_vec(),
    })
}

fn mean_of<'a>(mut items: impl ExactSizeIterator<Item = &'a Array2<f64>>) -> Array2<f64> {
    let count = items.len() as f64;
    let mut acc = items.next().expect("at least one").clone();
    for m in items {
        acc += m;
    }
    acc / count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::simulate;

    fn small_cfg() -> GbtConfig {
        GbtConfig {
            rounds: 8,
            max_depth: 3,
            ..Default::default()
        }
    }

    #[test]
    fn identical_repeats_equal_single_run() {
        let d = simulate(120, 3).unwrap().data;
        let rng = RngStream::new(3, 9);
        let folds = make_folds(120, 4, &mut rng.derive(0)).unwrap();
        let run = shap_run(&d, &small_cfg(), &folds, 32, &rng.derive(1)).unwrap();
        let again = shap_run(&d, &small_cfg(), &folds, 32, &rng.derive(1)).unwrap();
        let one = average_runs(std::slice::from_ref(&run), &d).unwrap();
        let two = average_runs(&[run, again], &d).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn per_run_and_averaged_additivity() {
        let d = simulate(150, 4).unwrap().data;
        let cv = CvShapConfig {
            folds: 3,
            repeats: 2,
            background: 40,
        };
        let out = cv_shap(&d, &small_cfg(), &cv, &RngStream::new(4, 1)).unwrap();
        for run in &out.runs {
            assert!(run.max_additivity_error() < 1e-6);
        }
        let mean_margins = out.mean_oof_margins();
        for s in 0..d.n_samples() {
            let rec = out.tensor.reconstructed(s);
            for c in 0..3 {
                assert!((rec[c] - mean_margins[[s, c]]).abs() < 1e-6);
            }
        }
        assert_eq!(out.tensor.values.dim(), (150, 10, 3));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let d = simulate(90, 8).unwrap().data;
        let cv = CvShapConfig {
            folds: 3,
            repeats: 1,
            background: 20,
        };
        let rng = RngStream::new(8, 2);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| cv_shap(&d, &small_cfg(), &cv, &rng).unwrap());
        let parallel = cv_shap(&d, &small_cfg(), &cv, &rng).unwrap();
        assert_eq!(serial.tensor, parallel.tensor);
    }

    #[test]
    fn unlabeled_rejected() {
        let d = Dataset::from_matrix(Array2::zeros((10, 2))).unwrap();
        assert!(cv_shap(&d, &small_cfg(), &CvShapConfig::default(), &RngStream::new(0, 0)).is_err());
    }
}
