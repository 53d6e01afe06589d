//! The end-to-end workflow: data, model, out-of-fold SHAP, embeddings,
//! clustering, cluster paths, figures and a manifest of everything written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use shapclust_core::cluster::{hdbscan_with_tree, ClusterLabels, CondensedTree, HdbscanParams};
use shapclust_core::data::{load_csv, minmax_scale, train_test_split, write_csv};
use shapclust_core::embed::{neighbor_embed, pca_embed, EmbedMethod, Embedding2D, NeighborConfig};
use shapclust_core::gbt::{argmax, classification_report, fit, ClassificationReport};
use shapclust_core::rng::streams;
use shapclust_core::shap::{cv_shap, feature_importance, mean_abs_shap, CvShap, CvShapConfig};
use shapclust_core::simgen::{simulate, ResponseModel};
use shapclust_core::viz::{
    cluster_mean_paths, heatmap_data, project_pairwise, project_pca, sample_path, write_svg, Artifact, BarChart,
    ClassicWaterfall, Heatmap, PathPlot, ProjectedPath, ScatterPlot, WaterfallPath,
};
use shapclust_core::{Dataset, Ensemble, Error, ErrorKind, RngStream, ShapTensor};

use crate::config::{ClusterOn, ConfigError, DataSource, PipelineConfig, Projection};

pub const MANIFEST_FORMAT: &str = "shapclust-manifest/1";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    /// 2 for configuration problems, 3 for data problems, 4 for numeric
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } => match source.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, PipelineError>;
}

impl<T> StageExt<T> for shapclust_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

/// Parameters shrunk to fit a small dataset, with a note for each change.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Adjustments {
    pub notes: Vec<String>,
}

impl Adjustments {
    fn note(&mut self, note: String) {
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    fn clamp(&mut self, key: &str, wanted: usize, limit: usize, n: usize) -> usize {
        if wanted > limit {
            self.note(format!("{key} lowered from {wanted} to {limit} (n = {n})"));
            limit
        } else {
            wanted
        }
    }
}

pub fn load_data(cfg: &PipelineConfig) -> Result<(Dataset, Option<ResponseModel>), PipelineError> {
    match cfg.source {
        DataSource::Simulate => {
            let sim = simulate(cfg.n_samples, cfg.seed).stage("simulate")?;
            Ok((sim.data, Some(sim.model)))
        }
        DataSource::Csv => {
            let path = cfg
                .data_path
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("data.source = csv needs data.path".into()))?;
            let d = load_csv(path, Some(&cfg.label_column)).stage("ingest")?;
            Ok((if cfg.scale { minmax_scale(&d) } else { d }, None))
        }
    }
}

pub struct TrainOutput {
    pub model: Ensemble,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub report: ClassificationReport,
}

/// Fits on the training split and scores the held-out rows.
pub fn train_stage(d: &Dataset, cfg: &PipelineConfig) -> Result<TrainOutput, PipelineError> {
    let labels = d.require_labels().stage("train")?.to_vec();
    let mut rng = RngStream::new(cfg.seed, streams::SPLIT);
    let (train, test) = train_test_split(d.n_samples(), cfg.test_fraction, &mut rng).stage("split")?;
    let model = fit(&d.subset(&train), &cfg.gbt).stage("train")?;
    let pred = test
        .iter()
        .map(|&i| model.predict_class(&d.row(i).to_vec()))
        .collect::<shapclust_core::Result<Vec<usize>>>()
        .stage("evaluate")?;
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let report = classification_report(&truth, &pred, d.class_names()).stage("evaluate")?;
    Ok(TrainOutput {
        model,
        train,
        test,
        report,
    })
}

pub fn explain_stage(d: &Dataset, cfg: &PipelineConfig, adj: &mut Adjustments) -> Result<CvShap, PipelineError> {
    let n = d.n_samples();
    let cv = CvShapConfig {
        folds: adj.clamp("shap.folds", cfg.shap.folds, n, n),
        ..cfg.shap.clone()
    };
    cv_shap(d, &cfg.gbt, &cv, &RngStream::new(cfg.seed, streams::CV_SHAP)).stage("explain")
}

/// Embeds the rows of `m` with the configured method. The neighbor count is
/// lowered when the data has too few rows.
pub fn embed_stage(
    m: &Array2<f64>,
    method: EmbedMethod,
    neighbor: &NeighborConfig,
    seed: u64,
    stream: u64,
    adj: &mut Adjustments,
) -> Result<Embedding2D, PipelineError> {
    match method {
        EmbedMethod::Pca => pca_embed(m).stage("embed"),
        EmbedMethod::Neighbor => {
            let n = m.nrows();
            if n < 3 {
                adj.note(format!("embedding fell back to pca (n = {n})"));
                return pca_embed(m).stage("embed");
            }
            let cfg = NeighborConfig {
                neighbors: adj.clamp("embed.neighbors", neighbor.neighbors, n - 1, n),
                ..neighbor.clone()
            };
            neighbor_embed(m, &cfg, &mut RngStream::new(seed, stream)).stage("embed")
        }
    }
}

pub fn cluster_stage(
    m: &Array2<f64>,
    params: &HdbscanParams,
    adj: &mut Adjustments,
) -> Result<(ClusterLabels, CondensedTree), PipelineError> {
    let n = m.nrows();
    if n < 2 {
        return Err(PipelineError::Stage {
            stage: "cluster",
            source: Error::InvalidParameter(format!("cannot cluster {n} point(s)")),
        });
    }
    let params = HdbscanParams {
        min_samples: adj.clamp("cluster.min_samples", params.min_samples, n - 1, n),
        ..params.clone()
    };
    hdbscan_with_tree(m, &params).stage("cluster")
}

pub struct PathsOutput {
    pub class_names: Vec<String>,
    pub paths: Vec<WaterfallPath>,
    pub projected: Vec<ProjectedPath>,
}

pub fn paths_stage(t: &ShapTensor, labels: &ClusterLabels, cfg: &PipelineConfig) -> Result<PathsOutput, PipelineError> {
    if labels.n_clusters() == 0 {
        return Ok(PathsOutput {
            class_names: t.class_names.clone(),
            paths: Vec::new(),
            projected: Vec::new(),
        });
    }
    let paths = cluster_mean_paths(t, labels, cfg.top_m).stage("waterfall")?;
    let projected = project_paths(&paths, cfg.projection)?;
    Ok(PathsOutput {
        class_names: t.class_names.clone(),
        paths,
        projected,
    })
}

pub fn project_paths(paths: &[WaterfallPath], projection: Projection) -> Result<Vec<ProjectedPath>, PipelineError> {
    match projection {
        Projection::Pair(a, b) => paths
            .iter()
            .map(|p| project_pairwise(p, a, b).stage("waterfall"))
            .collect(),
        Projection::Pca => {
            if paths.first().map_or(0, |p| p.n_classes()) < 2 {
                return paths
                    .iter()
                    .map(|p| project_pairwise(p, 0, 0).stage("waterfall"))
                    .collect();
            }
            match project_pca(paths) {
                Ok((proj, _)) => Ok(proj),
                Err(Error::Degenerate(_)) => Ok(paths
                    .iter()
                    .map(|p| ProjectedPath {
                        vertices: vec![[0.0, 0.0]; p.vertices.len()],
                        axis_labels: ["PC1".into(), "PC2".into()],
                        loadings: None,
                        features: p.segments.iter().map(|s| s.feature.clone()).collect(),
                        tag: p.tag,
                    })
                    .collect()),
                Err(e) => Err(PipelineError::Stage {
                    stage: "waterfall",
                    source: e,
                }),
            }
        }
    }
}

/// Everything a run produced, kept in memory for callers that want to check
/// results directly.
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub data: Dataset,
    pub response: Option<ResponseModel>,
    pub train: TrainOutput,
    pub shap: CvShap,
    pub coords_raw: Embedding2D,
    pub coords_shap: Embedding2D,
    pub clusters: ClusterLabels,
    pub tree: CondensedTree,
    pub paths: PathsOutput,
    pub adjustments: Adjustments,
    pub out_dir: PathBuf,
}

/// Runs every stage and writes the outputs to `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
            pool.install(|| run_stages(cfg))
        }
        None => run_stages(cfg),
    }
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| PipelineError::Stage {
        stage: "setup",
        source: Error::Io {
            path: out.clone(),
            source: e,
        },
    })?;
    let mut adj = Adjustments::default();
    let mut written: Vec<String> = Vec::new();
    let file = |name: &str| out.join(name);

    let (data, response) = load_data(cfg)?;
    if let Some(model) = &response {
        write_csv(&data, file("data.csv"), &cfg.label_column).stage("simulate")?;
        write_beta(model, &file("beta.csv")).stage("simulate")?;
        written.extend(["data.csv".into(), "beta.csv".into()]);
    }

    let train = train_stage(&data, cfg)?;
    write_split(data.n_samples(), &train.test, &file("split.csv")).stage("split")?;
    train.model.save_json(file("model.json")).stage("train")?;
    write_text(&file("metrics.txt"), &train.report.to_string()).stage("evaluate")?;
    written.extend(["split.csv".into(), "model.json".into(), "metrics.txt".into()]);

    let shap = explain_stage(&data, cfg, &mut adj)?;
    shap.tensor.write_csv(file("shap.csv")).stage("explain")?;
    shap.tensor.write_base_csv(file("base_values.csv")).stage("explain")?;
    shap.tensor
        .write_sample_base_csv(file("sample_base.csv"))
        .stage("explain")?;
    written.extend(["shap.csv".into(), "base_values.csv".into(), "sample_base.csv".into()]);

    let flat = shap.tensor.flatten();
    let coords_raw = embed_stage(
        data.features(),
        cfg.embed_method,
        &cfg.neighbor,
        cfg.seed,
        streams::EMBED_RAW,
        &mut adj,
    )?;
    let coords_shap = embed_stage(
        &flat,
        cfg.embed_method,
        &cfg.neighbor,
        cfg.seed,
        streams::EMBED_SHAP,
        &mut adj,
    )?;
    coords_raw.write_csv(file("coords_raw.csv")).stage("embed")?;
    coords_shap.write_csv(file("coords_shap.csv")).stage("embed")?;
    written.extend(["coords_raw.csv".into(), "coords_shap.csv".into()]);

    let cluster_input = match cfg.cluster_on {
        ClusterOn::Shap => &flat,
        ClusterOn::Embedding => &coords_shap.coords,
    };
    let (clusters, tree) = cluster_stage(cluster_input, &cfg.hdbscan, &mut adj)?;
    clusters.write_csv(file("clusters.csv")).stage("cluster")?;
    written.push("clusters.csv".into());

    let paths = paths_stage(&shap.tensor, &clusters, cfg)?;
    write_paths_csv(&paths, &file("paths.csv")).stage("waterfall")?;
    written.push("paths.csv".into());

    written.extend(render_figures(
        &out,
        &data,
        &shap.tensor,
        &coords_raw,
        &coords_shap,
        &clusters,
        &paths.projected,
    )?);

    write_manifest(&out, cfg, &adj, &written)?;
    Ok(PipelineRun {
        config: cfg.clone(),
        data,
        response,
        train,
        shap,
        coords_raw,
        coords_shap,
        clusters,
        tree,
        paths,
        adjustments: adj,
        out_dir: out,
    })
}

pub fn write_text(path: &Path, text: &str) -> shapclust_core::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn write_beta(model: &ResponseModel, path: &Path) -> shapclust_core::Result<()> {
    let mut text = String::from("feature,beta1,beta2\n");
    for (j, (b1, b2)) in model.beta1.iter().zip(&model.beta2).enumerate() {
        text.push_str(&format!("Feature {},{b1},{b2}\n", j + 2));
    }
    write_text(path, &text)
}

fn write_split(n: usize, test: &[usize], path: &Path) -> shapclust_core::Result<()> {
    let mut is_test = vec![false; n];
    for &i in test {
        is_test[i] = true;
    }
    let mut text = String::from("sample,set\n");
    for (i, t) in is_test.iter().enumerate() {
        text.push_str(&format!("{i},{}\n", if *t { "test" } else { "train" }));
    }
    write_text(path, &text)
}

/// Reads the test rows back from a split file.
pub fn read_split(path: &Path) -> shapclust_core::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut test = Vec::new();
    for (row, line) in text.lines().enumerate().skip(1) {
        let (i, set) = line
            .split_once(',')
            .ok_or_else(|| Error::Csv(format!("split row {row}: expected sample,set")))?;
        if set.trim() == "test" {
            test.push(i.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                column: "sample".into(),
                value: i.into(),
            })?);
        }
    }
    Ok(test)
}

/// One row per path vertex: the cluster, the step (0 = anchor), the feature
/// that led to the vertex, its class-margin coordinates and its 2-D projection.
pub fn write_paths_csv(p: &PathsOutput, path: &Path) -> shapclust_core::Result<()> {
    let mut text = String::from("cluster,step,feature");
    for c in &p.class_names {
        text.push(',');
        text.push_str(&csv_field(c));
    }
    text.push_str(",x,y\n");
    for (id, (path_k, path_2)) in p.paths.iter().zip(&p.projected).enumerate() {
        for (step, (v, w)) in path_k.vertices.iter().zip(&path_2.vertices).enumerate() {
            let feature = if step == 0 {
                "base"
            } else {
                &path_k.segments[step - 1].feature
            };
            text.push_str(&format!("{id},{step},{}", csv_field(feature)));
            for x in v {
                text.push_str(&format!(",{x}"));
            }
            text.push_str(&format!(",{},{}\n", w[0], w[1]));
        }
    }
    write_text(path, &text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Writes the report figures and returns their file names.
#[allow(clippy::too_many_arguments)]
pub fn render_figures(
    out: &Path,
    data: &Dataset,
    t: &ShapTensor,
    coords_raw: &Embedding2D,
    coords_shap: &Embedding2D,
    clusters: &ClusterLabels,
    projected: &[ProjectedPath],
) -> Result<Vec<String>, PipelineError> {
    let svg = |a: Artifact<'_>, name: &str| write_svg(a, out.join(name)).stage("render");
    let cluster_names: Vec<String> = (0..clusters.n_clusters()).map(|c| format!("Cluster {c}")).collect();
    let points = |e: &Embedding2D| -> Vec<[f64; 2]> { e.coords.outer_iter().map(|r| [r[0], r[1]]).collect() };
    let axis = |e: &Embedding2D, i: usize| format!("{} {}", e.method, i + 1);

    svg(
        Artifact::Scatter(&ScatterPlot {
            title: "Raw data embedding".into(),
            x_label: axis(coords_raw, 0),
            y_label: axis(coords_raw, 1),
            points: points(coords_raw),
            groups: data.labels().map(|l| l.iter().map(|&c| c as i64).collect()),
            group_names: data.class_names().to_vec(),
        }),
        "scatter_raw.svg",
    )?;
    svg(
        Artifact::Scatter(&ScatterPlot {
            title: "SHAP embedding by cluster".into(),
            x_label: axis(coords_shap, 0),
            y_label: axis(coords_shap, 1),
            points: points(coords_shap),
            groups: Some(clusters.labels.clone()),
            group_names: cluster_names.clone(),
        }),
        "scatter_shap.svg",
    )?;

    let importance = feature_importance(t);
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let mean_abs = mean_abs_shap(t);
    svg(
        Artifact::Bars(&BarChart {
            title: "Mean |SHAP| by feature and class".into(),
            value_label: "mean |SHAP value| (margin units)".into(),
            categories: order.iter().map(|&i| t.feature_names[i].clone()).collect(),
            series: (0..t.n_classes())
                .map(|c| {
                    (
                        t.class_names[c].clone(),
                        order.iter().map(|&i| mean_abs[[i, c]]).collect(),
                    )
                })
                .collect(),
        }),
        "bars.svg",
    )?;

    let values = if clusters.n_clusters() > 0 {
        heatmap_data(data, clusters).stage("render")?
    } else {
        Array2::zeros((0, data.n_features()))
    };
    svg(
        Artifact::Heatmap(&Heatmap {
            title: "Mean raw values by cluster".into(),
            row_labels: cluster_names.clone(),
            col_labels: data.feature_names().to_vec(),
            values,
        }),
        "heatmap.svg",
    )?;

    svg(
        Artifact::Paths(&PathPlot {
            title: "Cluster mean SHAP paths".into(),
            paths: projected.to_vec(),
            names: cluster_names,
            class_names: t.class_names.clone(),
        }),
        "waterfall.svg",
    )?;

    let first = sample_path(t, 0, 8).stage("render")?;
    let class = argmax(first.endpoint());
    let classic =
        ClassicWaterfall::from_path(&first, class, format!("Sample 0, {}", t.class_names[class])).stage("render")?;
    svg(Artifact::Waterfall(&classic), "waterfall_classic.svg")?;

    Ok([
        "scatter_raw.svg",
        "scatter_shap.svg",
        "bars.svg",
        "heatmap.svg",
        "waterfall.svg",
        "waterfall_classic.svg",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect())
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    seed: u64,
    config: BTreeMap<&'static str, String>,
    adjustments: &'a [String],
    outputs: Vec<ManifestEntry>,
}

pub fn sha256_file(path: &Path) -> shapclust_core::Result<(u64, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Writes `manifest.json`: the settings, any adjustments, and a hash of every
/// listed output. Paths are relative to the output directory.
pub fn write_manifest(
    out: &Path,
    cfg: &PipelineConfig,
    adj: &Adjustments,
    files: &[String],
) -> Result<(), PipelineError> {
    let mut names = files.to_vec();
    names.sort();
    names.dedup();
    let outputs = names
        .into_iter()
        .map(|file| {
            let (bytes, sha256) = sha256_file(&out.join(&file))?;
            Ok(ManifestEntry { file, bytes, sha256 })
        })
        .collect::<shapclust_core::Result<Vec<_>>>()
        .stage("manifest")?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        seed: cfg.seed,
        config: cfg.entries().into_iter().collect(),
        adjustments: &adj.notes,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .stage("manifest")?;
    write_text(&out.join("manifest.json"), &(text + "\n")).stage("manifest")
}
