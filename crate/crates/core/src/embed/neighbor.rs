//! UMAP-style neighbor embedding.
//!
//! A fuzzy k-NN graph is built in the input space, then a 2-D layout is
//! optimized by stochastic gradient steps that pull graph edges together and
//! push random pairs apart under the low-dimensional affinity
//! `1 / (1 + a·d^{2b})`.

use ndarray::{Array2, Axis};

use super::{pca_embed, EmbedMethod, Embedding2D};
use crate::distance::knn;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `(a, b)` fitted for `min_dist = 0.1`, `spread = 1.0`.
pub const DEFAULT_AB: (f64, f64) = (1.5769436134456798, 0.8950607194372566);

const DISTANCE_FLOOR: f64 = 1e-12;
const BISECTION_STEPS: usize = 64;
const GRADIENT_CLIP: f64 = 4.0;
const REPULSION_EPS: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborConfig {
    pub neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        Self {
            neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            epochs: 200,
            negative_samples: 5,
            learning_rate: 1.0,
        }
    }
}

impl NeighborConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.neighbors < 2 {
            return bad(format!("neighbors must be at least 2, got {}", self.neighbors));
        }
        if self.neighbors >= n {
            return bad(format!("neighbors ({}) must be below n ({n})", self.neighbors));
        }
        if !(self.spread > 0.0) || !(self.min_dist >= 0.0) || self.min_dist >= 3.0 * self.spread {
            return bad("need spread > 0 and 0 <= min_dist < 3 * spread".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        Ok(())
    }
}

/// Least-squares fit of `1 / (1 + a·x^{2b})` to the target curve that is 1
/// below `min_dist` and `exp(-(x - min_dist) / spread)` above it, sampled at
/// 300 evenly spaced points on `[0, 3·spread]`. Levenberg–Marquardt from
/// `(1, 1)`.
pub fn fit_ab(min_dist: f64, spread: f64) -> Result<(f64, f64)> {
    if !(spread > 0.0) || !(min_dist >= 0.0) || min_dist >= 3.0 * spread {
        return Err(Error::InvalidParameter(
            "need spread > 0 and 0 <= min_dist < 3 * spread".into(),
        ));
    }
    const POINTS: usize = 300;
    let xs: Vec<f64> = (0..POINTS)
        .map(|i| 3.0 * spread * i as f64 / (POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };

    let (mut a, mut b) = (1.0, 1.0);
    let mut current = sse(a, b);
    let mut mu = 1e-3;
    for _ in 0..1000 {
        // normal equations of the linearized residuals
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let xp = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let denom = 1.0 + a * xp;
            let r = 1.0 / denom - y;
            let da = -xp / (denom * denom);
            let db = if x > 0.0 {
                -2.0 * a * xp * x.ln() / (denom * denom)
            } else {
                0.0
            };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut stepped = false;
        while mu < 1e20 {
            let (maa, mbb) = (jaa * (1.0 + mu), jbb * (1.0 + mu));
            let det = maa * mbb - jab * jab;
            if det > 0.0 {
                let step_a = -(mbb * ga - jab * gb) / det;
                let step_b = -(maa * gb - jab * ga) / det;
                let (na, nb) = (a + step_a, b + step_b);
                if na > 0.0 && nb > 0.0 {
                    let trial = sse(na, nb);
                    if trial < current {
                        let tiny = step_a.abs() <= 1e-15 * a && step_b.abs() <= 1e-15 * b;
                        a = na;
                        b = nb;
                        current = trial;
                        mu = (mu * 0.1).max(1e-12);
                        stepped = !tiny;
                        break;
                    }
                }
            }
            mu *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numeric("curve fit for (a, b) diverged".into()));
    }
    Ok((a, b))
}

/// Symmetric fuzzy graph as a directed edge list (both directions present),
/// sorted by `(head, tail)`.
fn fuzzy_graph(m: &Array2<f64>, k: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = m.nrows();
    let nb = knn(m, k)?;
    let target = (k as f64).log2();
    let mut directed: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let d: Vec<f64> = nb.distances[i].iter().map(|&v| v.max(DISTANCE_FLOOR)).collect();
        let rho = d[0];
        let mass = |sigma: f64| -> f64 { d.iter().map(|&dj| (-(dj - rho).max(0.0) / sigma).exp()).sum() };
        let (mut lo, mut hi, mut sigma) = (0.0, f64::INFINITY, 1.0);
        for _ in 0..BISECTION_STEPS {
            let s = mass(sigma);
            if s == target {
                break;
            }
            if s > target {
                hi = sigma;
                sigma = 0.5 * (lo + hi);
            } else {
                lo = sigma;
                sigma = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * sigma };
            }
        }
        directed.push(
            nb.indices[i]
                .iter()
                .zip(&d)
                .map(|(&j, &dj)| (j, (-(dj - rho).max(0.0) / sigma).exp()))
                .collect(),
        );
    }
    let weight = |i: usize, j: usize| -> f64 { directed[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1) };
    let mut edges = Vec::with_capacity(2 * n * k);
    for (i, row) in directed.iter().enumerate() {
        for &(j, _) in row {
            let (a, b) = (weight(i, j), weight(j, i));
            let p = a + b - a * b;
            edges.push((i, j, p));
            edges.push((j, i, p));
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    edges.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
    Ok(edges)
}

/// PCA coordinates scaled to unit variance per axis. Axes without variance
/// (and fully degenerate input) fall back to uniform noise on `[-1, 1)`.
fn initial_layout(m: &Array2<f64>, rng: &mut RngStream) -> Array2<f64> {
    let n = m.nrows();
    let mut coords = match pca_embed(m) {
        Ok(e) => e.coords,
        Err(_) => Array2::zeros((n, 2)),
    };
    let sds: Vec<f64> = coords
        .axis_iter(Axis(1))
        .map(|c| (c.mapv(|v| v * v).sum() / n as f64).sqrt())
        .collect();
    let widest = sds.iter().cloned().fold(0.0, f64::max);
    for (axis, &sd) in sds.iter().enumerate() {
        let mut col = coords.column_mut(axis);
        if sd > 1e-9 * widest && sd > 0.0 {
            col /= sd;
        } else {
            col.iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
        }
    }
    coords
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

/// UMAP-style embedding of the rows of `m` into the plane. Single-threaded
/// SGD, so the result is a pure function of the input and `rng`'s state.
pub fn neighbor_embed(m: &Array2<f64>, cfg: &NeighborConfig, rng: &mut RngStream) -> Result<Embedding2D> {
    let n = m.nrows();
    cfg.validate(n)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in embedding input".into()));
    }
    let (a, b) = if cfg.min_dist == 0.1 && cfg.spread == 1.0 {
        DEFAULT_AB
    } else {
        fit_ab(cfg.min_dist, cfg.spread)?
    };

    let mut edges = fuzzy_graph(m, cfg.neighbors)?;
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    if cfg.epochs > 0 {
        let cutoff = max_w / cfg.epochs as f64;
        edges.retain(|e| e.2 >= cutoff && e.2 > 0.0);
    }
    let per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let per_negative: Vec<f64> = per_sample
        .iter()
        .map(|&s| s / cfg.negative_samples.max(1) as f64)
        .collect();
    let mut next_sample = per_sample.clone();
    let mut next_negative = per_negative.clone();

    let mut y = initial_layout(m, rng);
    for epoch in 0..cfg.epochs {
        let now = epoch as f64;
        let alpha = cfg.learning_rate * (1.0 - now / cfg.epochs as f64);
        for (e, &(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let (dx, dy) = (y[[head, 0]] - y[[tail, 0]], y[[head, 1]] - y[[tail, 1]]);
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                let (gx, gy) = (clip(coeff * dx) * alpha, clip(coeff * dy) * alpha);
                y[[head, 0]] += gx;
                y[[head, 1]] += gy;
                y[[tail, 0]] -= gx;
                y[[tail, 1]] -= gy;
            }
            next_sample[e] += per_sample[e];

            if cfg.negative_samples > 0 {
                let draws = ((now - next_negative[e]) / per_negative[e]).floor().max(0.0) as usize;
                for _ in 0..draws {
                    let other = rng.below(n);
                    if other == head {
                        continue;
                    }
                    let (dx, dy) = (y[[head, 0]] - y[[other, 0]], y[[head, 1]] - y[[other, 1]]);
                    let d2 = dx * dx + dy * dy;
                    let (gx, gy) = if d2 > 0.0 {
                        let coeff = 2.0 * b / ((REPULSION_EPS + d2) * (a * d2.powf(b) + 1.0));
                        (clip(coeff * dx), clip(coeff * dy))
                    } else {
                        (GRADIENT_CLIP, GRADIENT_CLIP)
                    };
                    y[[head, 0]] += gx * alpha;
                    y[[head, 1]] += gy * alpha;
                }
                next_negative[e] += draws as f64 * per_negative[e];
            }
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "neighbor embedding produced non-finite coordinates".into(),
        ));
    }
    Ok(Embedding2D {
        coords: y,
        method: EmbedMethod::Neighbor,
        explained_variance: None,
        loadings: None,
    })
}
