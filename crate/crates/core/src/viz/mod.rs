//! Cluster interpretation: waterfall paths, their 2-D projections, cluster
//! heatmaps, and SVG rendering.

mod paths;
mod svg;

pub use paths::{
    build_path, build_path_ordered, cluster_mean_paths, cluster_mean_shap, feature_order, heatmap_data,
    project_pairwise, project_pca, sample_path, PathTag, ProjectedPath, Segment, WaterfallPath, OTHER_FEATURES,
};
pub use svg::{
    nice_ticks, palette_color, render_svg, write_svg, Artifact, BarChart, ClassicWaterfall, Heatmap, PathPlot,
    ScatterPlot, NOISE_COLOR, PALETTE,
};
