//! Shapley values by full coalition enumeration. Exponential in `p`; used as
//! the reference for [`shap_single`](super::shap_single).

use ndarray::{Array2, ArrayView1};

use super::BackgroundSet;
use crate::error::{Error, Result};

pub const MAX_ENUMERATED_FEATURES: usize = 20;

/// `φᵢ = Σ_{S ⊆ N∖{i}} |S|!(p−|S|−1)!/p! · (v(S ∪ {i}) − v(S))` for every output
/// of `model`, where `v(S)` averages `model` over background rows with the
/// features in `S` replaced by `x`'s. Returns a `p × k` matrix.
pub fn brute_force_shapley<F>(model: F, x: ArrayView1<'_, f64>, bg: &BackgroundSet) -> Result<Array2<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let p = x.len();
    if p > MAX_ENUMERATED_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: MAX_ENUMERATED_FEATURES,
        });
    }
    if bg.n_features() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bg.n_features(),
        });
    }
    let subsets = 1usize << p;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(subsets);
    let mut hybrid = vec![0.0; p];
    for mask in 0..subsets {
        let mut acc: Vec<f64> = Vec::new();
        for r in bg.rows().outer_iter() {
            for i in 0..p {
                hybrid[i] = if mask >> i & 1 == 1 { x[i] } else { r[i] };
            }
            let out = model(&hybrid);
            if acc.is_empty() {
                acc = vec![0.0; out.len()];
            }
            for (a, o) in acc.iter_mut().zip(out) {
                *a += o;
            }
        }
        for a in &mut acc {
            *a /= bg.len() as f64;
        }
        values.push(acc);
    }
    let k = values[0].len();

    // |S|!(p-|S|-1)!/p! = 1 / (p · C(p-1, |S|))
    let mut binom = vec![1.0f64; p.max(1)];
    for s in 1..p {
        binom[s] = binom[s - 1] * (p - s) as f64 / s as f64;
    }
    let weight: Vec<f64> = binom.iter().map(|c| 1.0 / (p as f64 * c)).collect();

    let mut phi = Array2::zeros((p, k));
    for i in 0..p {
        let bit = 1usize << i;
        for mask in (0..subsets).filter(|m| m & bit == 0) {
            let w = weight[mask.count_ones() as usize];
            for c in 0..k {
                phi[[i, c]] += w * (values[mask | bit][c] - values[mask][c]);
            }
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::{array, Array1};

    #[test]
    fn single_feature_is_total_effect() {
        let bg = BackgroundSet::new(array![[1.0], [3.0]]).unwrap();
        let phi = brute_force_shapley(|z| vec![z[0] * z[0]], array![4.0].view(), &bg).unwrap();
        assert_eq!(phi[[0, 0]], 16.0 - 5.0);
    }

    #[test]
    fn additive_closed_form() {
        let mut rng = RngStream::new(31, 0);
        let coef: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let g = |i: usize, v: f64| coef[i] * v + (i as f64) * v.sin();
        let model = |z: &[f64]| vec![(0..6).map(|i| g(i, z[i])).sum::<f64>()];
        let rows = Array2::from_shape_fn((7, 6), |_| rng.uniform(-3.0, 3.0));
        let bg = BackgroundSet::new(rows.clone()).unwrap();
        let x: Array1<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let phi = brute_force_shapley(model, x.view(), &bg).unwrap();
        for i in 0..6 {
            let mean_g = rows.column(i).iter().map(|&v| g(i, v)).sum::<f64>() / 7.0;
            assert!((phi[[i, 0]] - (g(i, x[i]) - mean_g)).abs() < 1e-12);
        }
    }

    #[test]
    fn efficiency_on_interaction_model() {
        let model = |z: &[f64]| vec![z[0] * z[1] - z[2], (z[0] > 0.0) as u8 as f64 * z[3]];
        let bg = BackgroundSet::new(array![[1.0, -1.0, 2.0, 0.5], [0.0, 3.0, -1.0, 2.0]]).unwrap();
        let x = array![2.0, 2.0, 1.0, -1.0];
        let phi = brute_force_shapley(model, x.view(), &bg).unwrap();
        for c in 0..2 {
            let fx = model(x.as_slice().unwrap())[c];
            let mean: f64 = bg
                .rows()
                .outer_iter()
                .map(|r| model(r.as_slice().unwrap())[c])
                .sum::<f64>()
                / 2.0;
            assert!((phi.column(c).sum() - (fx - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_large_p() {
        let bg = BackgroundSet::new(Array2::zeros((1, 21))).unwrap();
        let x = Array1::zeros(21);
        assert!(matches!(
            brute_force_shapley(|_| vec![0.0], x.view(), &bg),
            Err(Error::TooManyFeatures { p: 21, .. })
        ));
    }
}
