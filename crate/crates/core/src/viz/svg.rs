//! Standalone SVG 1.1 charts.
//!
//! Every number is written with a fixed precision and elements are emitted in
//! input order, so identical inputs give byte-identical documents.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::paths::{ProjectedPath, WaterfallPath};
use crate::error::{Error, Result};

/// Ten categorical colors; cluster or class `i` uses entry `i % 10`.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];
pub const NOISE_COLOR: &str = "#cccccc";
const POSITIVE_COLOR: &str = "#ff0d57";
const NEGATIVE_COLOR: &str = "#1e88e5";

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

pub fn palette_color(i: i64) -> &'static str {
    if i < 0 {
        NOISE_COLOR
    } else {
        PALETTE[i as usize % PALETTE.len()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<[f64; 2]>,
    /// Group id per point (`-1` drawn as noise). `None` draws one color.
    pub groups: Option<Vec<i64>>,
    /// Legend text for group `i`.
    pub group_names: Vec<String>,
}

/// Horizontal stacked bars, one row per category, one stack per series.
#[derive(Clone, Debug, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub value_label: String,
    pub categories: Vec<String>,
    pub series: Vec<(String, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Array2<f64>,
}

/// One-dimensional waterfall: each bar starts where the previous one ended.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicWaterfall {
    pub title: String,
    pub value_label: String,
    pub base: f64,
    pub features: Vec<String>,
    pub deltas: Vec<f64>,
}

impl ClassicWaterfall {
    /// Restricts a path to the margin of class `class`.
    pub fn from_path(path: &WaterfallPath, class: usize, title: impl Into<String>) -> Result<Self> {
        if class >= path.n_classes() {
            return Err(Error::InvalidParameter(format!("class {class} out of range")));
        }
        Ok(Self {
            title: title.into(),
            value_label: format!("{} margin", path.class_names[class]),
            base: path.anchor[class],
            features: path.segments.iter().map(|s| s.feature.clone()).collect(),
            deltas: path.segments.iter().map(|s| s.delta[class]).collect(),
        })
    }

    /// `(start, end)` of every bar.
    pub fn bar_spans(&self) -> Vec<(f64, f64)> {
        let mut at = self.base;
        self.deltas
            .iter()
            .map(|d| {
                let span = (at, at + d);
                at += d;
                span
            })
            .collect()
    }

    pub fn output(&self) -> f64 {
        self.bar_spans().last().map_or(self.base, |s| s.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPlot {
    pub title: String,
    pub paths: Vec<ProjectedPath>,
    /// Legend text per path.
    pub names: Vec<String>,
    /// Class names for biplot arrows, drawn when the paths carry loadings.
    pub class_names: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub enum Artifact<'a> {
    Scatter(&'a ScatterPlot),
    Bars(&'a BarChart),
    Heatmap(&'a Heatmap),
    Waterfall(&'a ClassicWaterfall),
    Paths(&'a PathPlot),
}

pub fn render_svg(artifact: Artifact<'_>) -> Result<String> {
    match artifact {
        Artifact::Scatter(s) => scatter(s),
        Artifact::Bars(b) => bars(b),
        Artifact::Heatmap(h) => heatmap(h),
        Artifact::Waterfall(w) => waterfall(w),
        Artifact::Paths(p) => path_plot(p),
    }
}

pub fn write_svg(artifact: Artifact<'_>, path: impl AsRef<Path>) -> Result<()> {
    let doc = render_svg(artifact)?;
    let path = path.as_ref();
    std::fs::write(path, doc).map_err(|e| Error::io(path, e))
}

fn require_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round steps of 1, 2 or 5 times a power of ten covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let (lo, hi) = padded_range(lo, hi);
    let raw = (hi - lo) / target.max(1) as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * magnitude);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Tick label with as many decimals as the tick spacing needs.
fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step > 0.0 {
        (-step.log10().floor()).max(0.0) as usize
    } else {
        0
    };
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    x_ticks: Vec<f64>,
    y_ticks: Vec<f64>,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let x_ticks = nice_ticks(x.0, x.1, 6);
        let y_ticks = nice_ticks(y.0, y.1, 6);
        let span = |(lo, hi): (f64, f64), ticks: &[f64]| {
            let (lo, hi) = padded_range(lo, hi);
            let lo = ticks.first().map_or(lo, |&t| t.min(lo));
            let hi = ticks.last().map_or(hi, |&t| t.max(hi));
            (lo, hi)
        };
        Self {
            x: span(x, &x_ticks),
            y: span(y, &y_ticks),
            x_ticks,
            y_ticks,
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn draw_axes(&self, doc: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            doc,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333"/>"##,
            num(l),
            num(t),
            num(r - l),
            num(b - t)
        );
        let step = |ticks: &[f64]| if ticks.len() > 1 { ticks[1] - ticks[0] } else { 1.0 };
        let (sx, sy) = (step(&self.x_ticks), step(&self.y_ticks));
        for &v in &self.x_ticks {
            let x = num(self.px(v));
            let _ = writeln!(
                doc,
                r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#333333"/><text x="{x}" y="{}" text-anchor="middle" font-size="11">{}</text>"##,
                num(b),
                num(b + 5.0),
                num(b + 18.0),
                tick_label(v, sx)
            );
        }
        for &v in &self.y_ticks {
            let y = num(self.py(v));
            let _ = writeln!(
                doc,
                r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#333333"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="11">{}</text>"##,
                num(l - 5.0),
                num(l),
                num(l - 8.0),
                tick_label(v, sy)
            );
        }
        let _ = writeln!(
            doc,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            num((l + r) / 2.0),
            num(HEIGHT - 15.0),
            escape(x_label)
        );
        let _ = writeln!(
            doc,
            r#"<text x="20" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {})">{}</text>"#,
            num((t + b) / 2.0),
            num((t + b) / 2.0),
            escape(y_label)
        );
    }
}

fn open(title: &str) -> String {
    let mut doc = String::new();
    let _ = writeln!(doc, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        doc,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(doc, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(doc, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        doc,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16" font-weight="bold">{}</text>"#,
        num(WIDTH / 2.0),
        escape(title)
    );
    doc
}

fn close(mut doc: String) -> String {
    doc.push_str("</svg>\n");
    doc
}

fn legend(doc: &mut String, entries: &[(String, &str)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            doc,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-size="12" dominant-baseline="middle">{}</text>"#,
            num(x),
            num(y - 6.0),
            num(x + 18.0),
            num(y),
            escape(label)
        );
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn or_unit((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn scatter(s: &ScatterPlot) -> Result<String> {
    require_finite(s.points.iter().flatten(), "scatter points")?;
    if let Some(g) = &s.groups {
        if g.len() != s.points.len() {
            return Err(Error::DimensionMismatch {
                expected: s.points.len(),
                found: g.len(),
            });
        }
    }
    let frame = Frame::new(
        or_unit(extent(s.points.iter().map(|p| p[0]))),
        or_unit(extent(s.points.iter().map(|p| p[1]))),
    );
    let mut doc = open(&s.title);
    frame.draw_axes(&mut doc, &s.x_label, &s.y_label);
    // noise first, so clusters are drawn on top
    let group_of = |i: usize| s.groups.as_ref().map_or(0, |g| g[i]);
    for pass_noise in [true, false] {
        for (i, p) in s.points.iter().enumerate() {
            let g = group_of(i);
            if (g < 0) != pass_noise {
                continue;
            }
            let _ = writeln!(
                doc,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="{}" fill-opacity="0.8"/>"#,
                num(frame.px(p[0])),
                num(frame.py(p[1])),
                palette_color(g)
            );
        }
    }
    if let Some(groups) = &s.groups {
        let top = groups.iter().copied().max().unwrap_or(-1);
        let mut entries: Vec<(String, &str)> = (0..=top)
            .map(|g| {
                let name = s
                    .group_names
                    .get(g as usize)
                    .cloned()
                    .unwrap_or_else(|| format!("Group {g}"));
                (name, palette_color(g))
            })
            .collect();
        if groups.iter().any(|&g| g < 0) {
            entries.push(("Noise".to_owned(), NOISE_COLOR));
        }
        legend(&mut doc, &entries);
    }
    Ok(close(doc))
}

fn bars(b: &BarChart) -> Result<String> {
    for (name, values) in &b.series {
        require_finite(values, "bar values")?;
        if values.len() != b.categories.len() {
            return Err(Error::InvalidParameter(format!(
                "series {name:?} has {} values for {} categories",
                values.len(),
                b.categories.len()
            )));
        }
    }
    let rows = b.categories.len();
    let totals: Vec<(f64, f64)> = (0..rows)
        .map(|r| {
            b.series.iter().fold((0.0, 0.0), |(neg, pos), (_, v)| {
                if v[r] < 0.0 {
                    (neg + v[r], pos)
                } else {
                    (neg, pos + v[r])
                }
            })
        })
        .collect();
    let lo = totals.iter().map(|t| t.0).fold(0.0, f64::min);
    let hi = totals.iter().map(|t| t.1).fold(0.0, f64::max);
    let frame = Frame::new((lo, if hi > lo { hi } else { lo + 1.0 }), (0.0, 1.0));
    let mut doc = open(&b.title);
    let frame = Frame {
        y_ticks: Vec::new(),
        ..frame
    };
    frame.draw_axes(&mut doc, &b.value_label, "");
    let band = (HEIGHT - TOP - BOTTOM) / rows.max(1) as f64;
    for (r, cat) in b.categories.iter().enumerate() {
        let y = TOP + band * r as f64;
        let (mut neg, mut pos) = (0.0, 0.0);
        for (s, (_, values)) in b.series.iter().enumerate() {
            let v = values[r];
            let (from, to) = if v < 0.0 {
                neg += v;
                (neg, neg - v)
            } else {
                pos += v;
                (pos - v, pos)
            };
            let _ = writeln!(
                doc,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(frame.px(from)),
                num(y + 0.15 * band),
                num(frame.px(to) - frame.px(from)),
                num(0.7 * band),
                palette_color(s as i64)
            );
        }
        let _ = writeln!(
            doc,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle" font-size="11">{}</text>"#,
            num(LEFT - 8.0),
            num(y + 0.5 * band),
            escape(cat)
        );
    }
    let entries: Vec<(String, &str)> = b
        .series
        .iter()
        .enumerate()
        .map(|(s, (name, _))| (name.clone(), palette_color(s as i64)))
        .collect();
    legend(&mut doc, &entries);
    Ok(close(doc))
}

/// Blue for negative, white at zero, red for positive.
fn diverging(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let (end, w) = if t < 0.0 {
        ((30.0, 136.0, 229.0), -t)
    } else {
        ((255.0, 13.0, 87.0), t)
    };
    let mix = |c: f64| (255.0 + (c - 255.0) * w).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(end.0), mix(end.1), mix(end.2))
}

fn heatmap(h: &Heatmap) -> Result<String> {
    require_finite(h.values.iter(), "heatmap values")?;
    let (rows, cols) = h.values.dim();
    if rows != h.row_labels.len() || cols != h.col_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            found: h.row_labels.len() * h.col_labels.len(),
        });
    }
    let scale = h.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut doc = open(&h.title);
    let (l, t) = (LEFT + 40.0, TOP + 30.0);
    let cw = (WIDTH - l - RIGHT) / cols.max(1) as f64;
    let ch = (HEIGHT - t - BOTTOM) / rows.max(1) as f64;
    for (j, label) in h.col_labels.iter().enumerate() {
        let x = l + cw * (j as f64 + 0.5);
        let _ = writeln!(
            doc,
            r#"<text x="{x}" y="{y}" text-anchor="start" font-size="10" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(label),
            x = num(x),
            y = num(t - 6.0)
        );
    }
    for (i, label) in h.row_labels.iter().enumerate() {
        let y = t + ch * i as f64;
        let _ = writeln!(
            doc,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle" font-size="11">{}</text>"#,
            num(l - 6.0),
            num(y + ch / 2.0),
            escape(label)
        );
        for j in 0..cols {
            let v = h.values[[i, j]];
            let x = l + cw * j as f64;
            let _ = writeln!(
                doc,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="#ffffff"/><text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle" font-size="9">{}</text>"##,
                num(x),
                num(y),
                num(cw),
                num(ch),
                diverging(v, scale),
                num(x + cw / 2.0),
                num(y + ch / 2.0),
                num(v)
            );
        }
    }
    let entries = [
        (format!("{} (max)", num(scale)), POSITIVE_COLOR),
        ("0".to_owned(), "#ffffff"),
        (format!("{} (min)", num(-scale)), NEGATIVE_COLOR),
    ];
    let owned: Vec<(String, &str)> = entries.iter().map(|(s, c)| (s.clone(), *c)).collect();
    legend(&mut doc, &owned);
    Ok(close(doc))
}

fn waterfall(w: &ClassicWaterfall) -> Result<String> {
    require_finite(w.deltas.iter().chain(std::iter::once(&w.base)), "waterfall values")?;
    if w.features.len() != w.deltas.len() {
        return Err(Error::DimensionMismatch {
            expected: w.deltas.len(),
            found: w.features.len(),
        });
    }
    let spans = w.bar_spans();
    let output = w.output();
    let (lo, hi) = extent(spans.iter().flat_map(|s| [s.0, s.1]).chain([w.base]));
    let frame = Frame::new((lo, hi), (0.0, 1.0));
    let frame = Frame {
        y_ticks: Vec::new(),
        ..frame
    };
    let mut doc = open(&w.title);
    frame.draw_axes(&mut doc, &w.value_label, "");
    let rows = spans.len().max(1) as f64;
    let band = (HEIGHT - TOP - BOTTOM - 20.0) / rows;
    for (r, ((from, to), feature)) in spans.iter().zip(&w.features).enumerate() {
        let y = TOP + 20.0 + band * r as f64;
        let color = if to >= from { POSITIVE_COLOR } else { NEGATIVE_COLOR };
        let (a, b) = (frame.px(from.min(*to)), frame.px(from.max(*to)));
        let _ = writeln!(
            doc,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
            num(a),
            num(y + 0.15 * band),
            num((b - a).max(0.5)),
            num(0.7 * band)
        );
        let _ = writeln!(
            doc,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle" font-size="11">{}</text><text x="{}" y="{}" dominant-baseline="middle" font-size="10">{:+.3}</text>"#,
            num(LEFT - 8.0),
            num(y + 0.5 * band),
            escape(feature),
            num(b + 4.0),
            num(y + 0.5 * band),
            to - from
        );
    }
    for (value, label, y) in [(w.base, "E[f(X)]", HEIGHT - BOTTOM - 4.0), (output, "f(x)", TOP + 12.0)] {
        let x = num(frame.px(value));
        let _ = writeln!(
            doc,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#555555" stroke-dasharray="4 3"/><text x="{x}" y="{}" text-anchor="middle" font-size="11">{label} = {}</text>"##,
            num(TOP),
            num(HEIGHT - BOTTOM),
            num(y),
            format_value(value)
        );
    }
    Ok(close(doc))
}

/// Up to 3 decimals with trailing zeros trimmed.
fn format_value(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_owned();
    if s == "-0" {
        "0".to_owned()
    } else {
        s
    }
}

fn path_plot(p: &PathPlot) -> Result<String> {
    require_finite(
        p.paths.iter().flat_map(|q| q.vertices.iter().flatten()),
        "path vertices",
    )?;
    let (x, y) = (
        or_unit(extent(
            p.paths
                .iter()
                .flat_map(|q| q.vertices.iter().map(|v| v[0]))
                .chain([0.0]),
        )),
        or_unit(extent(
            p.paths
                .iter()
                .flat_map(|q| q.vertices.iter().map(|v| v[1]))
                .chain([0.0]),
        )),
    );
    let frame = Frame::new(x, y);
    let (x_label, y_label) = p
        .paths
        .first()
        .map_or(("", ""), |q| (q.axis_labels[0].as_str(), q.axis_labels[1].as_str()));
    let mut doc = open(&p.title);
    frame.draw_axes(&mut doc, x_label, y_label);
    let _ = writeln!(
        doc,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-dasharray="3 3"/><line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-dasharray="3 3"/>"##,
        num(frame.px(frame.x.0)),
        num(frame.py(0.0)),
        num(frame.px(frame.x.1)),
        num(frame.py(0.0)),
        num(frame.px(0.0)),
        num(frame.py(frame.y.0)),
        num(frame.px(0.0)),
        num(frame.py(frame.y.1))
    );
    for (i, path) in p.paths.iter().enumerate() {
        let color = palette_color(i as i64);
        let points: Vec<String> = path
            .vertices
            .iter()
            .map(|v| format!("{},{}", num(frame.px(v[0])), num(frame.py(v[1]))))
            .collect();
        let _ = writeln!(
            doc,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        for (j, v) in path.vertices.iter().enumerate().skip(1) {
            let r = if j + 1 == path.vertices.len() { 5.0 } else { 3.0 };
            let _ = writeln!(
                doc,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"#,
                num(frame.px(v[0])),
                num(frame.py(v[1])),
                num(r)
            );
        }
        for (j, feature) in path.features.iter().enumerate().take(3) {
            let (a, b) = (path.vertices[j], path.vertices[j + 1]);
            let _ = writeln!(
                doc,
                r#"<text x="{}" y="{}" font-size="9" fill="{color}">{}</text>"#,
                num(frame.px(0.5 * (a[0] + b[0])) + 4.0),
                num(frame.py(0.5 * (a[1] + b[1])) - 4.0),
                escape(feature)
            );
        }
    }
    if let Some(loadings) = p.paths.first().and_then(|q| q.loadings.as_ref()) {
        let reach = 0.8 * x.0.abs().max(x.1.abs()).min(y.0.abs().max(y.1.abs()));
        for (c, row) in loadings.outer_iter().enumerate() {
            let (ex, ey) = (reach * row[0], reach * row[1]);
            let name = p.class_names.get(c).cloned().unwrap_or_else(|| format!("Class {c}"));
            let _ = writeln!(
                doc,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#444444" stroke-width="1"/><text x="{}" y="{}" font-size="11" fill="#444444">{}</text>"##,
                num(frame.px(0.0)),
                num(frame.py(0.0)),
                num(frame.px(ex)),
                num(frame.py(ey)),
                num(frame.px(ex) + 3.0),
                num(frame.py(ey) - 3.0),
                escape(&name)
            );
        }
    }
    let entries: Vec<(String, &str)> = p
        .paths
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let name = p.names.get(i).cloned().unwrap_or_else(|| format!("Path {i}"));
            (name, palette_color(i as i64))
        })
        .collect();
    legend(&mut doc, &entries);
    Ok(close(doc))
}
