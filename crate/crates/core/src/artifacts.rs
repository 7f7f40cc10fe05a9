//! Deterministic result artifacts: design records (JSON), CSV tables and
//! simple SVG line plots.
//!
//! Artifacts are byte-identical across runs for identical configs and seeds:
//! floats are printed with a fixed format, collections keep insertion order,
//! and no timestamps or wall-clock data enter the files.

use std::fmt::Write as FmtWrite;

use serde::ser::SerializeSeq;
use serde::Serializer;

use crate::linalg::{ComplexVector, HermitianMatrix};

/// Fixed float format used by CSV artifacts.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.12e}")
    }
}

/// Serializes a covariance list as row-major `[re, im]` pairs.
pub fn serialize_cov_list<S: Serializer>(
    covs: &[HermitianMatrix],
    ser: S,
) -> Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(covs.len()))?;
    for r in covs {
        let mut rows: Vec<Vec<[f64; 2]>> = Vec::with_capacity(r.nrows());
        for i in 0..r.nrows() {
            let mut row = Vec::with_capacity(r.ncols());
            for j in 0..r.ncols() {
                row.push([r[(i, j)].re, r[(i, j)].im]);
            }
            rows.push(row);
        }
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

/// Serializes beamformers as `[re, im]` pairs.
pub fn serialize_beamformers<S: Serializer>(
    w: &Option<Vec<ComplexVector>>,
    ser: S,
) -> Result<S::Ok, S::Error> {
    match w {
        None => ser.serialize_none(),
        Some(list) => {
            let mut seq = ser.serialize_seq(Some(list.len()))?;
            for v in list {
                let pairs: Vec<[f64; 2]> = v.iter().map(|e| [e.re, e.im]).collect();
                seq.serialize_element(&pairs)?;
            }
            seq.end()
        }
    }
}

/// A CSV table with a comment header carrying provenance (config hash, seed).
pub struct CsvTable {
    pub comment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(comment: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            comment: comment.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        if !self.comment.is_empty() {
            let _ = writeln!(out, "# {}", self.comment);
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_string())
    }
}

/// One polyline of an [`SvgPlot`].
pub struct SvgSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

/// Minimal self-contained SVG line plot: axes, ticks, labels, legend.
pub struct SvgPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<SvgSeries>,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;
const COLORS: [&str; 5] = ["#1f6fb2", "#c0392b", "#1e8449", "#8e44ad", "#b7950b"];

impl SvgPlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn add_series(&mut self, label: &str, points: Vec<(f64, f64)>) {
        let color = COLORS[self.series.len() % COLORS.len()];
        self.series.push(SvgSeries {
            label: label.into(),
            points,
            color,
        });
    }

    pub fn to_string(&self) -> String {
        let finite = |v: f64| v.is_finite();
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if finite(x) && finite(y) {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        let to_px = |x: f64, y: f64| -> (f64, f64) {
            let w = PLOT_W - MARGIN_L - MARGIN_R;
            let h = PLOT_H - MARGIN_T - MARGIN_B;
            let px = MARGIN_L + (x - x0) / (x1 - x0) * w;
            let py = PLOT_H - MARGIN_B - (y - y0) / (y1 - y0) * h;
            (px, py)
        };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{PLOT_W}" height="{PLOT_H}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            PLOT_W / 2.0,
            xml_escape(&self.title)
        );
        // Axes.
        let (ax0, ay0) = (MARGIN_L, PLOT_H - MARGIN_B);
        let _ = writeln!(
            svg,
            r#"<line x1="{ax0}" y1="{ay0}" x2="{}" y2="{ay0}" stroke="black"/>"#,
            PLOT_W - MARGIN_R
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{MARGIN_T}" stroke="black"/>"#
        );
        // Ticks: 5 per axis.
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let (px, _) = to_px(fx, y0);
            let _ = writeln!(
                svg,
                r#"<line x1="{px}" y1="{ay0}" x2="{px}" y2="{}" stroke="black"/>"#,
                ay0 + 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                ay0 + 18.0,
                tick_label(fx)
            );
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let (_, py) = to_px(x0, fy);
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{py}" x2="{ax0}" y2="{py}" stroke="black"/>"#,
                ax0 - 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                ax0 - 8.0,
                py + 4.0,
                tick_label(fy)
            );
        }
        // Axis labels.
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
            PLOT_H - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
            (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
            xml_escape(&self.y_label)
        );
        // Series.
        for s in &self.series {
            let mut d = String::new();
            for &(x, y) in &s.points {
                if !(finite(x) && finite(y)) {
                    continue;
                }
                let (px, py) = to_px(x, y);
                if d.is_empty() {
                    let _ = write!(d, "M{px:.2},{py:.2}");
                } else {
                    let _ = write!(d, " L{px:.2},{py:.2}");
                }
            }
            let _ = writeln!(
                svg,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                s.color
            );
        }
        // Legend.
        for (i, s) in self.series.iter().enumerate() {
            let ly = MARGIN_T + 14.0 * i as f64 + 8.0;
            let lx = PLOT_W - MARGIN_R - 150.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
                lx + 18.0,
                s.color
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                lx + 24.0,
                ly + 4.0,
                xml_escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_string())
    }
}

fn span(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
