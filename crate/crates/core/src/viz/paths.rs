//! Generalized waterfall paths.
//!
//! A sample's explanation is a walk in class-margin space: it starts at the
//! base values and adds one feature's k-vector of SHAP values per step.

use ndarray::{Array2, ArrayView2, Axis};

use crate::cluster::ClusterLabels;
use crate::data::Dataset;
use crate::embed::PrincipalAxes;
use crate::error::{Error, Result};
use crate::shap::ShapTensor;

pub const OTHER_FEATURES: &str = "other features";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathTag {
    Sample(usize),
    Cluster(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub feature: String,
    pub delta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaterfallPath {
    pub anchor: Vec<f64>,
    pub segments: Vec<Segment>,
    /// `segments.len() + 1` points; `vertices[0]` is the anchor.
    pub vertices: Vec<Vec<f64>>,
    pub class_names: Vec<String>,
    pub tag: Option<PathTag>,
}

impl WaterfallPath {
    pub fn n_classes(&self) -> usize {
        self.anchor.len()
    }

    pub fn endpoint(&self) -> &[f64] {
        self.vertices.last().expect("a path has at least its anchor")
    }

    pub fn with_tag(mut self, tag: PathTag) -> Self {
        self.tag = Some(tag);
        self
    }
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Orders features by descending Euclidean norm of their SHAP k-vector
/// (ties to the lower index).
pub fn feature_order(phi: ArrayView2<'_, f64>) -> Vec<usize> {
    let norms: Vec<f64> = phi.outer_iter().map(|r| norm(r.iter().copied())).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order
}

/// Path through the `top_m` largest features of `phi` (`p × k`) in the given
/// order, followed by one aggregate of the rest.
pub fn build_path_ordered(
    phi: ArrayView2<'_, f64>,
    base: &[f64],
    order: &[usize],
    feature_names: &[String],
    class_names: &[String],
    top_m: usize,
) -> Result<WaterfallPath> {
    let (p, k) = phi.dim();
    if base.len() != k || class_names.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: base.len(),
        });
    }
    if feature_names.len() != p || order.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: feature_names.len(),
        });
    }
    if top_m == 0 {
        return Err(Error::InvalidParameter("top_m must be at least 1".into()));
    }
    let keep = top_m.min(p);
    let mut segments: Vec<Segment> = order[..keep]
        .iter()
        .map(|&i| Segment {
            feature: feature_names[i].clone(),
            delta: phi.row(i).to_vec(),
        })
        .collect();
    if keep < p {
        let mut rest = vec![0.0; k];
        for &i in &order[keep..] {
            for (r, v) in rest.iter_mut().zip(phi.row(i)) {
                *r += v;
            }
        }
        segments.push(Segment {
            feature: OTHER_FEATURES.to_owned(),
            delta: rest,
        });
    }
    let mut vertices = Vec::with_capacity(segments.len() + 1);
    vertices.push(base.to_vec());
    for s in &segments {
        let prev = vertices.last().expect("anchor");
        let next: Vec<f64> = prev.iter().zip(&s.delta).map(|(a, d)| a + d).collect();
        vertices.push(next);
    }
    Ok(WaterfallPath {
        anchor: base.to_vec(),
        segments,
        vertices,
        class_names: class_names.to_vec(),
        tag: None,
    })
}

/// Waterfall path for one `p × k` attribution matrix, features ordered by
/// descending norm.
pub fn build_path(
    phi: ArrayView2<'_, f64>,
    base: &[f64],
    feature_names: &[String],
    class_names: &[String],
    top_m: usize,
) -> Result<WaterfallPath> {
    let order = feature_order(phi);
    build_path_ordered(phi, base, &order, feature_names, class_names, top_m)
}

/// The path of sample `s` in `t`, anchored at the tensor's common base.
pub fn sample_path(t: &ShapTensor, s: usize, top_m: usize) -> Result<WaterfallPath> {
    if s >= t.n_samples() {
        return Err(Error::InvalidParameter(format!("sample {s} out of range")));
    }
    Ok(build_path(t.sample(s), &t.base_values, &t.feature_names, &t.class_names, top_m)?.with_tag(PathTag::Sample(s)))
}

/// Mean `p × k` attribution matrix of each cluster, indexed by cluster id.
pub fn cluster_mean_shap(t: &ShapTensor, labels: &ClusterLabels) -> Result<Vec<Array2<f64>>> {
    if labels.len() != t.n_samples() {
        return Err(Error::DimensionMismatch {
            expected: t.n_samples(),
            found: labels.len(),
        });
    }
    let c = labels.n_clusters();
    if c == 0 {
        return Err(Error::AllNoise);
    }
    Ok((0..c)
        .map(|id| {
            t.values
                .select(Axis(0), &labels.members(id))
                .mean_axis(Axis(0))
                .expect("clusters are non-empty")
        })
        .collect())
}

/// One path per cluster built from the members' mean SHAP matrix, each with
/// its own feature ordering. Noise is ignored.
pub fn cluster_mean_paths(t: &ShapTensor, labels: &ClusterLabels, top_m: usize) -> Result<Vec<WaterfallPath>> {
    cluster_mean_shap(t, labels)?
        .iter()
        .enumerate()
        .map(|(id, mean)| {
            Ok(
                build_path(mean.view(), &t.base_values, &t.feature_names, &t.class_names, top_m)?
                    .with_tag(PathTag::Cluster(id)),
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedPath {
    pub vertices: Vec<[f64; 2]>,
    pub axis_labels: [String; 2],
    /// `k × 2` class-axis loadings (PCA projections only).
    pub loadings: Option<Array2<f64>>,
    pub features: Vec<String>,
    pub tag: Option<PathTag>,
}

/// Keeps only the margins of classes `a` and `b`.
pub fn project_pairwise(path: &WaterfallPath, a: usize, b: usize) -> Result<ProjectedPath> {
    let k = path.n_classes();
    if a >= k || b >= k {
        return Err(Error::InvalidParameter(format!(
            "class index out of range for {k} classes: ({a}, {b})"
        )));
    }
    if a == b {
        return Err(Error::InvalidParameter(
            "pairwise projection needs two distinct classes".into(),
        ));
    }
    Ok(ProjectedPath {
        vertices: path.vertices.iter().map(|v| [v[a], v[b]]).collect(),
        axis_labels: [path.class_names[a].clone(), path.class_names[b].clone()],
        loadings: None,
        features: path.segments.iter().map(|s| s.feature.clone()).collect(),
        tag: path.tag,
    })
}

/// Projects paths onto the two directions of largest second moment of their
/// anchor-relative vertices. The anchor maps to the origin; no centering is
/// applied.
pub fn project_pca(paths: &[WaterfallPath]) -> Result<(Vec<ProjectedPath>, PrincipalAxes)> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidParameter("no paths to project".into()))?;
    let k = first.n_classes();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "PCA projection needs at least 2 classes".into(),
        ));
    }
    if paths.iter().any(|p| p.n_classes() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: paths.iter().map(|p| p.n_classes()).find(|&c| c != k).unwrap_or(k),
        });
    }
    let mut rows: Vec<Vec<f64>> = paths
        .iter()
        .flat_map(|p| {
            p.vertices
                .iter()
                .map(move |v| v.iter().zip(&p.anchor).map(|(x, a)| x - a).collect::<Vec<f64>>())
        })
        .collect();
    // fixed row order, so the fit does not depend on the order of `paths`
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let stacked = Array2::from_shape_fn((rows.len(), k), |(i, j)| rows[i][j]);
    let axes = PrincipalAxes::about_origin(&stacked, rows.len() as f64)?;
    let share = |v: f64| if axes.total > 0.0 { 100.0 * v / axes.total } else { 0.0 };
    let labels = [
        format!("PC1 ({:.1}%)", share(axes.variances[0])),
        format!("PC2 ({:.1}%)", share(axes.variances[1])),
    ];
    let projected = paths
        .iter()
        .map(|p| ProjectedPath {
            vertices: p
                .vertices
                .iter()
                .map(|v| {
                    let mut out = [0.0; 2];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = (0..k).map(|c| (v[c] - p.anchor[c]) * axes.loadings[[c, j]]).sum();
                    }
                    out
                })
                .collect(),
            axis_labels: labels.clone(),
            loadings: Some(axes.loadings.clone()),
            features: p.segments.iter().map(|s| s.feature.clone()).collect(),
            tag: p.tag,
        })
        .collect();
    Ok((projected, axes))
}

/// Mean raw feature vector of each cluster, one row per cluster id.
pub fn heatmap_data(d: &Dataset, labels: &ClusterLabels) -> Result<Array2<f64>> {
    if labels.len() != d.n_samples() {
        return Err(Error::DimensionMismatch {
            expected: d.n_samples(),
            found: labels.len(),
        });
    }
    let c = labels.n_clusters();
    if c == 0 {
        return Err(Error::AllNoise);
    }
    let mut out = Array2::zeros((c, d.n_features()));
    for id in 0..c {
        let rows = d.features().select(Axis(0), &labels.members(id));
        out.row_mut(id)
            .assign(&rows.mean_axis(Axis(0)).expect("non-empty cluster"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::{array, Array3};

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix} {i}")).collect()
    }

    #[test]
    fn zero_attributions_stay_at_anchor() {
        let phi = Array2::zeros((4, 3));
        let path = build_path(phi.view(), &[1.0, 2.0, 3.0], &names("F", 4), &names("C", 3), 2).unwrap();
        assert_eq!(path.segments.len(), 3);
        assert!(path.vertices.iter().all(|v| v == &vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn hand_example() {
        let phi = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let path = build_path(phi.view(), &[0.0; 3], &names("Feature", 2), &names("C", 3), 8).unwrap();
        assert_eq!(path.segments[0].feature, "Feature 1");
        assert_eq!(path.segments[1].feature, "Feature 0");
        assert_eq!(
            path.vertices,
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![1.0, 2.0, 0.0]]
        );
    }

    #[test]
    fn tail_is_aggregated() {
        let phi = array![[0.1, 0.0], [3.0, 0.0], [0.0, -2.0], [0.2, 0.2]];
        let path = build_path(phi.view(), &[0.5, 0.5], &names("F", 4), &names("C", 2), 2).unwrap();
        let feats: Vec<&str> = path.segments.iter().map(|s| s.feature.as_str()).collect();
        assert_eq!(feats, vec!["F 1", "F 2", OTHER_FEATURES]);
        assert!((path.segments[2].delta[0] - 0.3).abs() < 1e-15);
        assert!((path.endpoint()[0] - 3.8).abs() < 1e-12);
        assert!((path.endpoint()[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn pairwise_on_two_classes_is_identity() {
        let phi = array![[1.0, -1.0], [0.5, 2.0]];
        let path = build_path(phi.view(), &[0.1, 0.2], &names("F", 2), &names("C", 2), 8).unwrap();
        let proj = project_pairwise(&path, 0, 1).unwrap();
        for (v, w) in path.vertices.iter().zip(&proj.vertices) {
            assert_eq!(v[0], w[0]);
            assert_eq!(v[1], w[1]);
        }
        assert!(project_pairwise(&path, 0, 0).is_err());
        assert!(project_pairwise(&path, 0, 2).is_err());
    }

    #[test]
    fn pairwise_commutes_with_construction() {
        let mut rng = RngStream::new(1, 0);
        let phi = Array2::from_shape_fn((6, 3), |_| rng.standard_normal());
        let base = [0.3, -0.2, 0.1];
        let full = build_path(phi.view(), &base, &names("F", 6), &names("C", 3), 4).unwrap();
        let order = feature_order(phi.view());
        let sub = phi.select(Axis(1), &[0, 2]);
        let restricted = build_path_ordered(
            sub.view(),
            &[base[0], base[2]],
            &order,
            &names("F", 6),
            &names("C", 2),
            4,
        )
        .unwrap();
        let proj = project_pairwise(&full, 0, 2).unwrap();
        assert_eq!(proj.vertices.len(), restricted.vertices.len());
        for (a, b) in proj.vertices.iter().zip(&restricted.vertices) {
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn pca_of_planar_paths_preserves_distances() {
        let mut rng = RngStream::new(2, 0);
        let base = [0.4, -0.1, 0.7];
        let paths: Vec<WaterfallPath> = (0..3)
            .map(|_| {
                let phi = Array2::from_shape_fn((5, 3), |(_, c)| if c == 2 { 0.0 } else { rng.standard_normal() });
                build_path(phi.view(), &base, &names("F", 5), &names("C", 3), 8).unwrap()
            })
            .collect();
        let (proj, axes) = project_pca(&paths).unwrap();
        assert!((axes.variances[0] + axes.variances[1] - axes.total).abs() < 1e-9);
        let all_src: Vec<&Vec<f64>> = paths.iter().flat_map(|p| p.vertices.iter()).collect();
        let all_dst: Vec<&[f64; 2]> = proj.iter().flat_map(|p| p.vertices.iter()).collect();
        for i in 0..all_src.len() {
            for j in 0..all_src.len() {
                let ds = norm((0..3).map(|c| all_src[i][c] - all_src[j][c]));
                let dd = norm((0..2).map(|c| all_dst[i][c] - all_dst[j][c]));
                assert!((ds - dd).abs() < 1e-9);
            }
        }
        for p in &proj {
            assert_eq!(p.vertices[0], [0.0, 0.0]);
        }
    }

    #[test]
    fn pca_ignores_path_order() {
        let mut rng = RngStream::new(3, 0);
        let paths: Vec<WaterfallPath> = (0..4)
            .map(|_| {
                let phi = Array2::from_shape_fn((5, 3), |_| rng.standard_normal());
                build_path(phi.view(), &[0.0; 3], &names("F", 5), &names("C", 3), 3).unwrap()
            })
            .collect();
        let reversed: Vec<WaterfallPath> = paths.iter().rev().cloned().collect();
        let (a, _) = project_pca(&paths).unwrap();
        let (b, _) = project_pca(&reversed).unwrap();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x, y);
        }
        let flat: Vec<WaterfallPath> = vec![build_path(
            Array2::zeros((2, 3)).view(),
            &[1.0; 3],
            &names("F", 2),
            &names("C", 3),
            2,
        )
        .unwrap()];
        assert!(project_pca(&flat).is_err());
    }

    #[test]
    fn cluster_paths_and_heatmap() {
        let mut rng = RngStream::new(4, 0);
        let values = Array3::from_shape_fn((6, 3, 2), |_| rng.standard_normal());
        let t = ShapTensor::with_common_base(values, vec![0.1, -0.1], names("F", 3), names("C", 2)).unwrap();
        let labels = ClusterLabels {
            labels: vec![0, 1, 0, -1, 1, 0],
            persistence: vec![1.0, 1.0],
        };
        let paths = cluster_mean_paths(&t, &labels, 2).unwrap();
        assert_eq!(paths.len(), 2);
        for (id, path) in paths.iter().enumerate() {
            let members = labels.members(id);
            for c in 0..2 {
                let mean_total: f64 =
                    members.iter().map(|&s| t.sample_totals(s)[c]).sum::<f64>() / members.len() as f64;
                assert!((path.endpoint()[c] - (t.base_values[c] + mean_total)).abs() < 1e-9);
            }
            assert_eq!(path.tag, Some(PathTag::Cluster(id)));
        }
        let all = ClusterLabels {
            labels: vec![0; 6],
            persistence: vec![0.0],
        };
        let single = cluster_mean_paths(&t, &all, 2).unwrap();
        let mean = t.values.mean_axis(Axis(0)).unwrap();
        let direct = build_path(mean.view(), &t.base_values, &t.feature_names, &t.class_names, 2).unwrap();
        assert_eq!(single[0].vertices, direct.vertices);

        let noise = ClusterLabels {
            labels: vec![-1; 6],
            persistence: vec![],
        };
        assert!(matches!(cluster_mean_paths(&t, &noise, 2), Err(Error::AllNoise)));

        let d = Dataset::from_matrix(array![[0.0, 2.0], [2.0, 0.0], [5.0, 5.0]]).unwrap();
        let l = ClusterLabels {
            labels: vec![0, 0, -1],
            persistence: vec![0.0],
        };
        assert_eq!(heatmap_data(&d, &l).unwrap(), array![[1.0, 1.0]]);
    }
}
