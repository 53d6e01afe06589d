//! Pipeline configuration.
//!
//! Settings are flat `key = value` pairs with section prefixes such as
//! `gbt.rounds`. A file is read first and flags are applied on top; unknown
//! keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use shapclust_core::cluster::{HdbscanParams, Selection};
use shapclust_core::embed::{EmbedMethod, NeighborConfig};
use shapclust_core::shap::CvShapConfig;
use shapclust_core::GbtConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown preset {0:?} (available: sim-paper)")]
    UnknownPreset(String),
    #[error("cannot read config {}: {source}", .path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Simulate,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterOn {
    Shap,
    Embedding,
}

impl fmt::Display for ClusterOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterOn::Shap => "shap",
            ClusterOn::Embedding => "embedding",
        })
    }
}

impl FromStr for ClusterOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shap" => Ok(ClusterOn::Shap),
            "embedding" => Ok(ClusterOn::Embedding),
            _ => Err("expected shap or embedding".into()),
        }
    }
}

/// How cluster paths are flattened to two dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Pair(usize, usize),
    Pca,
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::Pair(a, b) => write!(f, "pair:{a},{b}"),
            Projection::Pca => f.write_str("pca"),
        }
    }
}

impl FromStr for Projection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "pca" {
            return Ok(Projection::Pca);
        }
        let pair = s
            .strip_prefix("pair:")
            .ok_or_else(|| "expected pca or pair:A,B".to_owned())?;
        let (a, b) = pair.split_once(',').ok_or_else(|| "expected pair:A,B".to_owned())?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
        Ok(Projection::Pair(parse(a)?, parse(b)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub source: DataSource,
    pub n_samples: usize,
    pub data_path: Option<PathBuf>,
    pub label_column: String,
    /// Min-max scale ingested features to [0, 1].
    pub scale: bool,
    pub test_fraction: f64,
    pub gbt: GbtConfig,
    pub shap: CvShapConfig,
    pub embed_method: EmbedMethod,
    pub neighbor: NeighborConfig,
    pub hdbscan: HdbscanParams,
    pub cluster_on: ClusterOn,
    pub top_m: usize,
    pub projection: Projection,
}

pub const PRESET_SEED: u64 = 20240607;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            source: DataSource::Simulate,
            n_samples: 1500,
            data_path: None,
            label_column: "label".into(),
            scale: false,
            test_fraction: 0.3,
            gbt: GbtConfig::default(),
            shap: CvShapConfig::default(),
            embed_method: EmbedMethod::Neighbor,
            neighbor: NeighborConfig::default(),
            hdbscan: HdbscanParams::default(),
            cluster_on: ClusterOn::Shap,
            top_m: 8,
            projection: Projection::Pca,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl PipelineConfig {
    /// Named parameter sets. `sim-paper` is the simulation study: 1500
    /// samples, 70/30 split, pinned seed.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "sim-paper" => Ok(Self {
                seed: PRESET_SEED,
                source: DataSource::Simulate,
                n_samples: 1500,
                test_fraction: 0.3,
                ..Self::default()
            }),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "threads" => self.threads = Some(parse(key, value)?),
            "data.source" => {
                self.source = match value {
                    "simulate" => DataSource::Simulate,
                    "csv" => DataSource::Csv,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected simulate or csv".into(),
                        })
                    }
                }
            }
            "data.n" => self.n_samples = parse(key, value)?,
            "data.path" => {
                self.data_path = Some(PathBuf::from(value));
                self.source = DataSource::Csv;
            }
            "data.label" => self.label_column = value.into(),
            "data.scale" => self.scale = parse(key, value)?,
            "data.test_fraction" => self.test_fraction = parse(key, value)?,
            "gbt.rounds" => self.gbt.rounds = parse(key, value)?,
            "gbt.eta" => self.gbt.eta = parse(key, value)?,
            "gbt.max_depth" => self.gbt.max_depth = parse(key, value)?,
            "gbt.lambda" => self.gbt.lambda = parse(key, value)?,
            "gbt.gamma" => self.gbt.gamma = parse(key, value)?,
            "gbt.min_child_weight" => self.gbt.min_child_weight = parse(key, value)?,
            "shap.folds" => self.shap.folds = parse(key, value)?,
            "shap.repeats" => self.shap.repeats = parse(key, value)?,
            "shap.background" => self.shap.background = parse(key, value)?,
            "embed.method" => self.embed_method = parse(key, value)?,
            "embed.neighbors" => self.neighbor.neighbors = parse(key, value)?,
            "embed.min_dist" => self.neighbor.min_dist = parse(key, value)?,
            "embed.spread" => self.neighbor.spread = parse(key, value)?,
            "embed.epochs" => self.neighbor.epochs = parse(key, value)?,
            "cluster.min_cluster_size" => self.hdbscan.min_cluster_size = parse(key, value)?,
            "cluster.min_samples" => self.hdbscan.min_samples = parse(key, value)?,
            "cluster.selection" => self.hdbscan.selection = parse::<Selection>(key, value)?,
            "cluster.on" => self.cluster_on = parse(key, value)?,
            "waterfall.top_m" => self.top_m = parse(key, value)?,
            "waterfall.projection" => self.projection = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Every setting as `(key, value)`, in a fixed order. Output location and
    /// thread count are left out: they do not affect results.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("seed", self.seed.to_string()),
            (
                "data.source",
                match self.source {
                    DataSource::Simulate => "simulate".into(),
                    DataSource::Csv => "csv".into(),
                },
            ),
        ];
        match self.source {
            DataSource::Simulate => out.push(("data.n", self.n_samples.to_string())),
            DataSource::Csv => {
                let name = self
                    .data_path
                    .as_ref()
                    .and_then(|p| p.file_name())
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default();
                out.push(("data.path", name));
                out.push(("data.label", self.label_column.clone()));
                out.push(("data.scale", self.scale.to_string()));
            }
        }
        out.extend([
            ("data.test_fraction", self.test_fraction.to_string()),
            ("gbt.rounds", self.gbt.rounds.to_string()),
            ("gbt.eta", self.gbt.eta.to_string()),
            ("gbt.max_depth", self.gbt.max_depth.to_string()),
            ("gbt.lambda", self.gbt.lambda.to_string()),
            ("gbt.gamma", self.gbt.gamma.to_string()),
            ("gbt.min_child_weight", self.gbt.min_child_weight.to_string()),
            ("shap.folds", self.shap.folds.to_string()),
            ("shap.repeats", self.shap.repeats.to_string()),
            ("shap.background", self.shap.background.to_string()),
            ("embed.method", self.embed_method.to_string()),
            ("embed.neighbors", self.neighbor.neighbors.to_string()),
            ("embed.min_dist", self.neighbor.min_dist.to_string()),
            ("embed.spread", self.neighbor.spread.to_string()),
            ("embed.epochs", self.neighbor.epochs.to_string()),
            ("cluster.min_cluster_size", self.hdbscan.min_cluster_size.to_string()),
            ("cluster.min_samples", self.hdbscan.min_samples.to_string()),
            ("cluster.selection", self.hdbscan.selection.to_string()),
            ("cluster.on", self.cluster_on.to_string()),
            ("waterfall.top_m", self.top_m.to_string()),
            ("waterfall.projection", self.projection.to_string()),
        ]);
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let Err(e) = self.gbt.validate() {
            return invalid(e.to_string());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return invalid("data.test_fraction must lie in (0, 1)".into());
        }
        if self.shap.folds < 2 || self.shap.repeats < 1 || self.shap.background < 1 {
            return invalid("shap.folds >= 2, shap.repeats >= 1 and shap.background >= 1 are required".into());
        }
        if self.top_m < 1 {
            return invalid("waterfall.top_m must be at least 1".into());
        }
        if self.source == DataSource::Csv && self.data_path.is_none() {
            return invalid("data.source = csv needs data.path".into());
        }
        if self.source == DataSource::Simulate && self.n_samples < 10 {
            return invalid("data.n must be at least 10".into());
        }
        if self.threads == Some(0) {
            return invalid("threads must be at least 1".into());
        }
        Ok(())
    }
}
