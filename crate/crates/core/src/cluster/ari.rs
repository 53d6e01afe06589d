use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn pairs(count: u64) -> f64 {
    (count * count.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index from the pair-counting contingency table. With
/// `exclude_noise`, samples labeled `-1` in either labeling are dropped first.
/// Labelings with no informative pairs (a single cluster on both sides, or
/// fewer than two samples) score 1.
pub fn adjusted_rand_index(a: &[i64], b: &[i64], exclude_noise: bool) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut table: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut rows: BTreeMap<i64, u64> = BTreeMap::new();
    let mut cols: BTreeMap<i64, u64> = BTreeMap::new();
    let mut n = 0u64;
    for (&x, &y) in a.iter().zip(b) {
        if exclude_noise && (x < 0 || y < 0) {
            continue;
        }
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
        n += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn identical_is_one() {
        let a = [0, 0, 1, 1, 2, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a, false).unwrap(), 1.0);
        let relabeled = [5, 5, 3, 3, 9, 9, 9];
        assert!((adjusted_rand_index(&a, &relabeled, false).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_contingency() {
        // table (2, 1; 1, 2): index 2, row/col pair sums 6, 15 pairs in total
        // (2 - 36/15) / (6 - 36/15) = -1/9
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 0, 1, 1];
        let ari = adjusted_rand_index(&a, &b, false).unwrap();
        assert!((ari - (-1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_versus_random_is_near_zero() {
        let mut rng = RngStream::new(2, 0);
        let a = vec![0i64; 500];
        let b: Vec<i64> = (0..500).map(|_| rng.below(4) as i64).collect();
        assert!(adjusted_rand_index(&a, &b, false).unwrap().abs() <= 0.05);
    }

    #[test]
    fn noise_exclusion() {
        let a = [0, 0, 1, 1, -1, -1];
        let b = [3, 3, 4, 4, 3, 4];
        assert!((adjusted_rand_index(&a, &b, true).unwrap() - 1.0).abs() < 1e-15);
        assert!(adjusted_rand_index(&a, &b, false).unwrap() < 1.0);
        assert!(adjusted_rand_index(&a, &b[..5], true).is_err());
    }
}
