use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shapclust_cli::config::{ConfigError, PipelineConfig};
use shapclust_cli::pipeline::{
    self, explain_stage, load_data, read_split, render_figures, train_stage, write_paths_csv, write_text, Adjustments,
    PathsOutput, PipelineError, StageExt,
};
use shapclust_core::cluster::ClusterLabels;
use shapclust_core::data::{load_csv, write_csv};
use shapclust_core::embed::Embedding2D;
use shapclust_core::gbt::classification_report;
use shapclust_core::simgen::{adni_shaped, simulate};
use shapclust_core::{Ensemble, ShapTensor};

#[derive(Parser)]
#[command(name = "shapclust", version, about = "Supervised clustering of SHAP values")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, or output file for `embed` and `cluster`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the three-class simulation and write data.csv and beta.csv.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        /// `adni-shaped` writes the fixed-size 2422 x 39 smoke dataset instead.
        #[arg(long, value_enum, default_value_t = SimKind::Quadrant)]
        kind: SimKind,
    },
    /// Fit the boosted-tree model on a train split and report held-out metrics.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Compute the out-of-fold SHAP tensor.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        background: Option<usize>,
    },
    /// Embed the rows of a numeric CSV in two dimensions.
    Embed {
        #[arg(long)]
        input: PathBuf,
        /// Column to drop before embedding.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        neighbors: Option<usize>,
        #[arg(long)]
        min_dist: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Which pipeline embedding this reproduces; selects the random stream.
        #[arg(long, value_enum, default_value_t = Space::Shap)]
        space: Space,
    },
    /// Density-cluster the rows of a numeric CSV.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        min_cluster_size: Option<usize>,
        #[arg(long)]
        min_samples: Option<usize>,
        #[arg(long)]
        selection: Option<String>,
        /// Recorded for bookkeeping; the input file decides the space.
        #[arg(long)]
        cluster_on: Option<String>,
    },
    /// Build cluster-mean waterfall paths and their 2-D projection.
    Waterfall {
        #[arg(long)]
        shap: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        projection: Option<String>,
        #[arg(long)]
        top_m: Option<usize>,
    },
    /// Render the figures and metrics from existing stage outputs.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// split.csv from `train`; without it every row is scored.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        shap: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        coords_raw: PathBuf,
        #[arg(long)]
        coords_shap: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        projection: Option<String>,
        #[arg(long)]
        top_m: Option<usize>,
    },
    /// Run every stage end to end.
    Pipeline {
        #[arg(long, conflicts_with = "data")]
        simulate: bool,
        #[command(flatten)]
        data: DataArgs,
        /// Named parameter set, applied before the config file and flags.
        #[arg(long)]
        preset: Option<String>,
        /// Extra key=value settings.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Clone, Copy, PartialEq, clap::ValueEnum)]
enum SimKind {
    Quadrant,
    AdniShaped,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Space {
    Raw,
    Shap,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    /// Min-max scale ingested features.
    #[arg(long)]
    scale: bool,
}

/// Collects `key=value` overrides from flags in the order given.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn opt<T: ToString>(&mut self, key: &'static str, value: &Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn data(&mut self, d: &DataArgs) -> &mut Self {
        self.opt("data.path", &d.data.as_ref().map(|p| p.display().to_string()))
            .opt("data.label", &d.label);
        if d.scale {
            self.0.push(("data.scale", "true".into()));
        }
        self
    }
}

fn build_config(
    cli: &Cli,
    preset: Option<&str>,
    overrides: &Overrides,
    extra: &[String],
) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match preset {
        Some(name) => PipelineConfig::preset(name)?,
        None => PipelineConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in &overrides.0 {
        cfg.set(k, v)?;
    }
    for kv in extra {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: kv.clone(),
        })?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| shapclust_core::Error::Io {
            path: dir.to_owned(),
            source: e,
        })
        .stage("setup")
}

fn out_file(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut ov = Overrides::default();
    let cfg = match &cli.command {
        Command::Simulate { n, .. } => build_config(cli, None, ov.opt("data.n", n), &[])?,
        Command::Train {
            data,
            rounds,
            eta,
            max_depth,
            lambda,
            gamma,
            ..
        } => {
            ov.data(data)
                .opt("gbt.rounds", rounds)
                .opt("gbt.eta", eta)
                .opt("gbt.max_depth", max_depth)
                .opt("gbt.lambda", lambda)
                .opt("gbt.gamma", gamma);
            build_config(cli, None, &ov, &[])?
        }
        Command::Explain {
            data,
            folds,
            repeats,
            background,
        } => {
            ov.data(data)
                .opt("shap.folds", folds)
                .opt("shap.repeats", repeats)
                .opt("shap.background", background);
            build_config(cli, None, &ov, &[])?
        }
        Command::Embed {
            method,
            neighbors,
            min_dist,
            epochs,
            ..
        } => {
            ov.opt("embed.method", method)
                .opt("embed.neighbors", neighbors)
                .opt("embed.min_dist", min_dist)
                .opt("embed.epochs", epochs);
            build_config(cli, None, &ov, &[])?
        }
        Command::Cluster {
            min_cluster_size,
            min_samples,
            selection,
            cluster_on,
            ..
        } => {
            ov.opt("cluster.min_cluster_size", min_cluster_size)
                .opt("cluster.min_samples", min_samples)
                .opt("cluster.selection", selection)
                .opt("cluster.on", cluster_on);
            build_config(cli, None, &ov, &[])?
        }
        Command::Waterfall { projection, top_m, .. } | Command::Report { projection, top_m, .. } => {
            if let Command::Report { data, .. } = &cli.command {
                ov.data(data);
            }
            ov.opt("waterfall.projection", projection).opt("waterfall.top_m", top_m);
            build_config(cli, None, &ov, &[])?
        }
        Command::Pipeline {
            simulate,
            data,
            preset,
            set,
        } => {
            if *simulate {
                ov.0.push(("data.source", "simulate".into()));
            }
            ov.data(data);
            build_config(cli, preset.as_deref(), &ov, set)?
        }
    };
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    }
    let mut adj = Adjustments::default();

    match &cli.command {
        Command::Simulate {
            kind: SimKind::AdniShaped,
            ..
        } => {
            ensure_dir(&cfg.out)?;
            let d = adni_shaped(cfg.seed).stage("simulate")?;
            write_csv(&d, cfg.out.join("data.csv"), &cfg.label_column).stage("simulate")?;
        }
        Command::Simulate { .. } => {
            ensure_dir(&cfg.out)?;
            let sim = simulate(cfg.n_samples, cfg.seed).stage("simulate")?;
            write_csv(&sim.data, cfg.out.join("data.csv"), &cfg.label_column).stage("simulate")?;
            let mut text = String::from("feature,beta1,beta2\n");
            for (j, (b1, b2)) in sim.model.beta1.iter().zip(&sim.model.beta2).enumerate() {
                text.push_str(&format!("Feature {},{b1},{b2}\n", j + 2));
            }
            write_text(&cfg.out.join("beta.csv"), &text).stage("simulate")?;
        }
        Command::Train { model_out, .. } => {
            ensure_dir(&cfg.out)?;
            let (d, _) = load_data(&cfg)?;
            let t = train_stage(&d, &cfg)?;
            let model_path = model_out.clone().unwrap_or_else(|| cfg.out.join("model.json"));
            t.model.save_json(&model_path).stage("train")?;
            let mut split = String::from("sample,set\n");
            let mut is_test = vec![false; d.n_samples()];
            t.test.iter().for_each(|&i| is_test[i] = true);
            for (i, x) in is_test.iter().enumerate() {
                split.push_str(&format!("{i},{}\n", if *x { "test" } else { "train" }));
            }
            write_text(&cfg.out.join("split.csv"), &split).stage("split")?;
            write_text(&cfg.out.join("metrics.txt"), &t.report.to_string()).stage("evaluate")?;
            print!("{}", t.report);
        }
        Command::Explain { .. } => {
            ensure_dir(&cfg.out)?;
            let (d, _) = load_data(&cfg)?;
            let shap = explain_stage(&d, &cfg, &mut adj)?;
            shap.tensor.write_csv(cfg.out.join("shap.csv")).stage("explain")?;
            shap.tensor
                .write_base_csv(cfg.out.join("base_values.csv"))
                .stage("explain")?;
            shap.tensor
                .write_sample_base_csv(cfg.out.join("sample_base.csv"))
                .stage("explain")?;
        }
        Command::Embed {
            input, label, space, ..
        } => {
            let d = load_csv(input, label.as_deref()).stage("ingest")?;
            let stream = match space {
                Space::Raw => shapclust_core::rng::streams::EMBED_RAW,
                Space::Shap => shapclust_core::rng::streams::EMBED_SHAP,
            };
            let e = pipeline::embed_stage(
                d.features(),
                cfg.embed_method,
                &cfg.neighbor,
                cfg.seed,
                stream,
                &mut adj,
            )?;
            e.write_csv(out_file(cli, "coords.csv")).stage("embed")?;
        }
        Command::Cluster { input, .. } => {
            let d = load_csv(input, None).stage("ingest")?;
            let (labels, _) = pipeline::cluster_stage(d.features(), &cfg.hdbscan, &mut adj)?;
            labels.write_csv(out_file(cli, "clusters.csv")).stage("cluster")?;
            eprintln!(
                "{} clusters, noise fraction {:.3}",
                labels.n_clusters(),
                labels.noise_fraction()
            );
        }
        Command::Waterfall {
            shap, base, clusters, ..
        } => {
            ensure_dir(&cfg.out)?;
            let t = ShapTensor::read_csv(shap, base).stage("waterfall")?;
            let labels = ClusterLabels::read_csv(clusters).stage("waterfall")?;
            let paths = pipeline::paths_stage(&t, &labels, &cfg)?;
            write_paths_csv(&paths, &cfg.out.join("paths.csv")).stage("waterfall")?;
            shapclust_core::viz::write_svg(
                shapclust_core::viz::Artifact::Paths(&shapclust_core::viz::PathPlot {
                    title: "Cluster mean SHAP paths".into(),
                    paths: paths.projected.clone(),
                    names: (0..labels.n_clusters()).map(|c| format!("Cluster {c}")).collect(),
                    class_names: t.class_names.clone(),
                }),
                cfg.out.join("waterfall.svg"),
            )
            .stage("render")?;
        }
        Command::Report {
            model,
            split,
            shap,
            base,
            coords_raw,
            coords_shap,
            clusters,
            ..
        } => {
            ensure_dir(&cfg.out)?;
            let (d, _) = load_data(&cfg)?;
            let model = Ensemble::load_json(model).stage("report")?;
            let rows: Vec<usize> = match split {
                Some(p) => read_split(p).stage("report")?,
                None => (0..d.n_samples()).collect(),
            };
            let labels = d.require_labels().stage("report")?;
            let pred = rows
                .iter()
                .map(|&i| model.predict_class(&d.row(i).to_vec()))
                .collect::<shapclust_core::Result<Vec<_>>>()
                .stage("report")?;
            let truth: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
            let report = classification_report(&truth, &pred, d.class_names()).stage("report")?;
            write_text(&cfg.out.join("metrics.txt"), &report.to_string()).stage("report")?;

            let t = ShapTensor::read_csv(shap, base).stage("report")?;
            let raw = Embedding2D::read_csv(coords_raw, cfg.embed_method).stage("report")?;
            let emb = Embedding2D::read_csv(coords_shap, cfg.embed_method).stage("report")?;
            let cl = ClusterLabels::read_csv(clusters).stage("report")?;
            let PathsOutput { projected, .. } = pipeline::paths_stage(&t, &cl, &cfg)?;
            render_figures(&cfg.out, &d, &t, &raw, &emb, &cl, &projected)?;
        }
        Command::Pipeline { .. } => {
            let run = pipeline::run_pipeline(&cfg)?;
            for note in &run.adjustments.notes {
                eprintln!("note: {note}");
            }
            eprintln!(
                "accuracy {:.3}; {} clusters, noise fraction {:.3}; outputs in {}",
                run.train.report.accuracy,
                run.clusters.n_clusters(),
                run.clusters.noise_fraction(),
                run.out_dir.display()
            );
        }
    }
    for note in &adj.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e).and_then(|s| s.source());
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
