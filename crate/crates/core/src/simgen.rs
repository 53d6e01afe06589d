//! Three-class multinomial-logistic simulation with two distinct routes to the
//! reference class.
//!
//! With inputs `x ∈ [-5, 5]^10` and noise coefficients `β₁, β₂ ~ N(0, 1)` on
//! `x₂..x₉`:
//!
//! ```text
//! f₁ = 4·x₀x₁ + 4·x₀ + 4·x₁ + Σ β₁ᵢ xᵢ
//! f₂ = 4·x₀x₁ − 4·x₀ − 4·x₁ + Σ β₂ᵢ xᵢ
//! p = (e^f₁, e^f₂, 1) / (1 + e^f₁ + e^f₂)
//! ```
//!
//! Classes are numbered 0, 1, 2 in that order, so class 0 collects samples with
//! both leading features positive, class 1 both negative, and class 2 the two
//! mixed-sign quadrants.

use ndarray::{Array2, ArrayView1};

use crate::data::{default_class_names, default_feature_names, Dataset};
use crate::error::{Error, Result};
use crate::rng::{streams, RngStream};

pub const N_INPUTS: usize = 10;
pub const N_CLASSES: usize = 3;
pub const INPUT_BOUND: f64 = 5.0;
const EFFECT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseModel {
    /// Coefficients of `x₂..x₉` in `f₁`.
    pub beta1: Vec<f64>,
    /// Coefficients of `x₂..x₉` in `f₂`.
    pub beta2: Vec<f64>,
}

impl ResponseModel {
    pub fn new(beta1: Vec<f64>, beta2: Vec<f64>) -> Result<Self> {
        for beta in [&beta1, &beta2] {
            if beta.len() != N_INPUTS - 2 {
                return Err(Error::DimensionMismatch {
                    expected: N_INPUTS - 2,
                    found: beta.len(),
                });
            }
            if beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coefficient".into()));
            }
        }
        Ok(Self { beta1, beta2 })
    }

    pub fn zero() -> Self {
        Self {
            beta1: vec![0.0; N_INPUTS - 2],
            beta2: vec![0.0; N_INPUTS - 2],
        }
    }

    /// Draws both coefficient vectors i.i.d. N(0, 1); `beta1` first.
    pub fn sample(rng: &mut RngStream) -> Self {
        let beta1 = (0..N_INPUTS - 2).map(|_| rng.standard_normal()).collect();
        let beta2 = (0..N_INPUTS - 2).map(|_| rng.standard_normal()).collect();
        Self { beta1, beta2 }
    }

    /// The two non-reference logits `(f₁, f₂)`.
    pub fn logits(&self, x: ArrayView1<'_, f64>) -> (f64, f64) {
        let (a, b) = (x[0], x[1]);
        let interaction = EFFECT * a * b;
        let main = EFFECT * (a + b);
        let noise1: f64 = self.beta1.iter().zip(x.iter().skip(2)).map(|(b, v)| b * v).sum();
        let noise2: f64 = self.beta2.iter().zip(x.iter().skip(2)).map(|(b, v)| b * v).sum();
        (interaction + main + noise1, interaction - main + noise2)
    }
}

pub fn sample_inputs(n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let values = (0..n * N_INPUTS)
        .map(|_| rng.uniform(-INPUT_BOUND, INPUT_BOUND))
        .collect();
    let features = Array2::from_shape_vec((n, N_INPUTS), values).expect("shape");
    Dataset::new(features, None, default_feature_names(N_INPUTS), Vec::new())
}

/// Class probabilities, evaluated after shifting every logit (including the
/// reference class's 0) by their maximum.
pub fn class_probabilities(x: ArrayView1<'_, f64>, model: &ResponseModel) -> [f64; 3] {
    let (f1, f2) = model.logits(x);
    let shift = f1.max(f2).max(0.0);
    let e = [(f1 - shift).exp(), (f2 - shift).exp(), (-shift).exp()];
    let total = e[0] + e[1] + e[2];
    [e[0] / total, e[1] / total, e[2] / total]
}

pub fn probability_matrix(d: &Dataset, model: &ResponseModel) -> Array2<f64> {
    let mut probs = Array2::zeros((d.n_samples(), N_CLASSES));
    for (i, x) in d.features().outer_iter().enumerate() {
        let p = class_probabilities(x, model);
        for c in 0..N_CLASSES {
            probs[[i, c]] = p[c];
        }
    }
    probs
}

/// One inverse-CDF draw per row, in class order.
pub fn sample_labels(probs: &Array2<f64>, rng: &mut RngStream) -> Result<Vec<usize>> {
    let k = probs.ncols();
    probs
        .outer_iter()
        .enumerate()
        .map(|(i, row)| {
            let total: f64 = row.sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} is not a probability vector (sum {total})"
                )));
            }
            let u = rng.next_f64();
            let mut acc = 0.0;
            for (c, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(c);
                }
            }
            // u landed in the rounding slack above the last cumulative sum
            Ok((0..k).rev().find(|&c| row[c] > 0.0).unwrap_or(k - 1))
        })
        .collect()
}

/// A full simulated experiment.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub data: Dataset,
    pub model: ResponseModel,
}

/// Inputs, coefficients and labels, each from its own stream of `seed`.
pub fn simulate(n: usize, seed: u64) -> Result<Simulation> {
    let inputs = sample_inputs(n, &mut RngStream::new(seed, streams::SIM_INPUTS))?;
    let model = ResponseModel::sample(&mut RngStream::new(seed, streams::SIM_BETA));
    let probs = probability_matrix(&inputs, &model);
    let labels = sample_labels(&probs, &mut RngStream::new(seed, streams::SIM_LABELS))?;
    let data = Dataset::new(
        inputs.features().clone(),
        Some(labels),
        inputs.feature_names().to_vec(),
        default_class_names(N_CLASSES),
    )?;
    Ok(Simulation { data, model })
}

/// Quadrant of `(x₀, x₁)`: 0 = (+,+), 1 = (−,−), 2 = (+,−), 3 = (−,+).
pub fn quadrant(x: ArrayView1<'_, f64>) -> usize {
    match (x[0] > 0.0, x[1] > 0.0) {
        (true, true) => 0,
        (false, false) => 1,
        (true, false) => 2,
        (false, true) => 3,
    }
}

pub const ADNI_SHAPED_ROWS: usize = 2422;
pub const ADNI_SHAPED_FEATURES: usize = 39;

/// A synthetic stand-in with the dimensions of a clinical three-class study:
/// 2422 rows, 39 features, labels `CN`/`MCI`/`AD`, raw columns on mixed
/// scales. A latent severity score drives a handful of features; the rest are
/// noise. Not calibrated to any real cohort.
pub fn adni_shaped(seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::new(seed, streams::SIM_INPUTS);
    let n = ADNI_SHAPED_ROWS;
    let p = ADNI_SHAPED_FEATURES;
    let scales: Vec<f64> = (0..p).map(|j| 1.0 + (j % 7) as f64 * 5.0).collect();
    let mut features = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u = rng.next_f64();
        let class = if u < 0.37 {
            0
        } else if u < 0.83 {
            1
        } else {
            2
        };
        let severity = class as f64 + 0.6 * rng.standard_normal();
        let carrier = (rng.next_f64() < 0.3 + 0.2 * class as f64) as u8 as f64;
        for j in 0..p {
            let signal = match j {
                0 => 2.0 * severity,
                1 => -1.5 * severity,
                2 => -severity,
                3 => 0.8 * severity,
                4 => carrier,
                _ => 0.0,
            };
            features[[i, j]] = scales[j] * (signal + rng.standard_normal());
        }
        labels.push(class);
    }
    let names = ["CDRSB", "LDELTOTAL", "mPACCdigit", "MMSE", "APOE4"];
    let feature_names = (0..p)
        .map(|j| names.get(j).map_or_else(|| format!("Marker{j}"), |s| s.to_string()))
        .collect();
    Dataset::new(
        features,
        Some(labels),
        feature_names,
        vec!["CN".into(), "MCI".into(), "AD".into()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn x_from(v: &[f64]) -> Array1<f64> {
        let mut x = Array1::zeros(N_INPUTS);
        for (i, &a) in v.iter().enumerate() {
            x[i] = a;
        }
        x
    }

    #[test]
    fn origin_is_uniform() {
        let mut rng = RngStream::new(3, 0);
        let m = ResponseModel::sample(&mut rng);
        let p = class_probabilities(x_from(&[]).view(), &m);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn corner_saturates_without_overflow() {
        let x = x_from(&[5.0, 5.0]);
        let m = ResponseModel::zero();
        assert_eq!(m.logits(x.view()), (140.0, 60.0));
        let p = class_probabilities(x.view(), &m);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn probabilities_are_distributions() {
        let mut rng = RngStream::new(17, 0);
        for _ in 0..10_000 {
            let m = ResponseModel::sample(&mut rng);
            let x: Array1<f64> = (0..N_INPUTS).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let p = class_probabilities(x.view(), &m);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // exact 0 or 1 can appear through underflow at the corners
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn expected_pathways() {
        let m = ResponseModel::zero();
        let argmax = |x: &[f64]| {
            let p = class_probabilities(x_from(x).view(), &m);
            (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap()
        };
        assert_eq!(argmax(&[2.0, 3.0]), 0);
        assert_eq!(argmax(&[-2.0, -3.0]), 1);
        assert_eq!(argmax(&[2.0, -3.0]), 2);
        assert_eq!(argmax(&[-4.0, 1.5]), 2);
    }

    #[test]
    fn inputs_in_box() {
        let d = sample_inputs(1500, &mut RngStream::new(8, 0)).unwrap();
        assert!(d.features().iter().all(|v| (-5.0..=5.0).contains(v)));
        for col in d.features().columns() {
            // 99.9% band for the mean of 1500 Unif(-5, 5) draws: 3.29 * 2.887 / sqrt(1500)
            assert!(col.mean().unwrap().abs() < 0.35);
        }
        assert_eq!(d.feature_names()[9], "Feature 9");
        let one = sample_inputs(1, &mut RngStream::new(8, 0)).unwrap();
        assert_eq!(one.features().dim(), (1, 10));
        assert!(sample_inputs(0, &mut RngStream::new(8, 0)).is_err());
    }

    #[test]
    fn degenerate_row_always_first_class() {
        let probs = Array2::from_shape_fn((500, 3), |(_, c)| if c == 0 { 1.0 } else { 0.0 });
        let y = sample_labels(&probs, &mut RngStream::new(1, 1)).unwrap();
        assert!(y.iter().all(|&c| c == 0));
    }

    #[test]
    fn uniform_rows_balanced() {
        let n = 30_000;
        let probs = Array2::from_elem((n, 3), 1.0 / 3.0);
        let y = sample_labels(&probs, &mut RngStream::new(2, 2)).unwrap();
        for c in 0..3 {
            let freq = y.iter().filter(|&&v| v == c).count() as f64 / n as f64;
            // binomial sd = sqrt(2/9 / 30000) ≈ 0.0027; 0.01 is ~3.7 sd
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "class {c}: {freq}");
        }
    }

    #[test]
    fn rejects_non_distributions() {
        let probs = Array2::from_elem((2, 3), 0.5);
        assert!(sample_labels(&probs, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn simulate_is_pure() {
        let a = simulate(200, 99).unwrap();
        let b = simulate(200, 99).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.model, b.model);
        assert_ne!(simulate(200, 100).unwrap().data, a.data);
    }

    #[test]
    fn adni_shape() {
        let d = adni_shaped(1).unwrap();
        assert_eq!(d.features().dim(), (2422, 39));
        assert_eq!(d.n_classes(), 3);
    }
}
