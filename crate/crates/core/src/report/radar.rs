//! Radar charts as standalone SVG.
//!
//! Axes are equally spaced, the first at 12 o'clock, proceeding clockwise.
//! The radial scale runs from 0 to the maximum value rounded up to the next
//! multiple of 10. Coordinates are printed with two decimals so output bytes
//! depend only on the inputs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::ensemble::{LateralResult, ScoreTable};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 560.0;
const CX: f64 = 280.0;
const CY: f64 = 290.0;
const RADIUS: f64 = 200.0;

/// (colour, dash pattern) per series; `None` is a solid line.
const STYLES: [(&str, Option<&str>); 5] = [
    ("#1f77b4", None),
    ("#ff7f0e", Some("2,4")),
    ("#2ca02c", None),
    ("#d62728", Some("8,4")),
    ("#9467bd", Some("8,4")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarChartSpec {
    pub title: String,
    pub axes: Vec<String>,
    pub series: Vec<RadarSeries>,
}

impl RadarChartSpec {
    /// One axis per influencer scored at `target`, one series per model.
    pub fn from_table(table: &ScoreTable, target: &str, title: &str) -> Result<Self, ReportError> {
        let axes: Vec<String> = table.candidates(target).into_iter().cloned().collect();
        let columns: Vec<Vec<f64>> = axes.iter().map(|a| table.column(a, target)).collect::<Result<_, _>>()?;
        let series = table
            .models()
            .iter()
            .enumerate()
            .map(|(m, label)| RadarSeries { label: label.clone(), values: columns.iter().map(|c| c[m]).collect() })
            .collect();
        Ok(Self { title: title.into(), axes, series })
    }

    /// One axis per influencer pair.
    pub fn from_lateral(lateral: &LateralResult, title: &str) -> Self {
        let axes = lateral.pairs.iter().map(|p| format!("{} vs {}", p.a, p.b)).collect();
        let series = lateral
            .models
            .iter()
            .enumerate()
            .map(|(m, label)| RadarSeries { label: label.clone(), values: lateral.pairs.iter().map(|p| p.scores[m]).collect() })
            .collect();
        Self { title: title.into(), axes, series }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.axes.len() < 3 {
            return Err(ReportError::TooFewAxes(self.axes.len()));
        }
        if let Some(s) = self.series.iter().find(|s| s.values.len() != self.axes.len()) {
            return Err(ReportError::SeriesLength { series: s.label.clone(), expected: self.axes.len(), found: s.values.len() });
        }
        Ok(())
    }

    /// Upper end of the radial scale: the largest value rounded up to a
    /// multiple of 10, and at least 10.
    pub fn radial_max(&self) -> f64 {
        let max = self.series.iter().flat_map(|s| s.values.iter().copied()).fold(0.0, f64::max);
        ((max / 10.0).ceil() * 10.0).max(10.0)
    }

    /// Vertex positions of one series, closed: the first point is repeated.
    pub fn polyline(&self, values: &[f64]) -> Vec<(f64, f64)> {
        let scale = self.radial_max();
        let mut pts: Vec<(f64, f64)> =
            values.iter().enumerate().map(|(k, &v)| self.point(k, RADIUS * v.max(0.0) / scale)).collect();
        pts.push(pts[0]);
        pts
    }

    fn point(&self, k: usize, r: f64) -> (f64, f64) {
        let theta = std::f64::consts::TAU * k as f64 / self.axes.len() as f64;
        (CX + r * theta.sin(), CY - r * theta.cos())
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn pts(points: &[(f64, f64)]) -> String {
    points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

pub fn render_radar_svg(spec: &RadarChartSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let n = spec.axes.len();
    let max = spec.radial_max();
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(w, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(w, r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, esc(&spec.title));

    let rings = (max / 10.0).round() as usize;
    for i in 1..=rings {
        let r = RADIUS * i as f64 / rings as f64;
        let mut ring: Vec<(f64, f64)> = (0..n).map(|k| spec.point(k, r)).collect();
        ring.push(ring[0]);
        let _ = writeln!(w, r##"<polyline points="{}" fill="none" stroke="#cccccc" stroke-width="1"/>"##, pts(&ring));
        let (x, y) = spec.point(0, r);
        let _ = writeln!(w, r##"<text x="{:.2}" y="{:.2}" fill="#888888" font-size="10">{}%</text>"##, x + 4.0, y + 4.0, i * 10);
    }
    for (k, label) in spec.axes.iter().enumerate() {
        let (x, y) = spec.point(k, RADIUS);
        let _ = writeln!(w, r##"<line x1="{CX:.2}" y1="{CY:.2}" x2="{x:.2}" y2="{y:.2}" stroke="#999999" stroke-width="1"/>"##);
        let (lx, ly) = spec.point(k, RADIUS + 22.0);
        let anchor = if (lx - CX).abs() < 1.0 { "middle" } else if lx > CX { "start" } else { "end" };
        let _ = writeln!(w, r#"<text x="{lx:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#, ly + 4.0, esc(label));
    }
    for (i, series) in spec.series.iter().enumerate() {
        let (colour, dash) = STYLES[i % STYLES.len()];
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(
            w,
            r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{colour}" stroke-width="2"{dash}/>"#,
            esc(&series.label),
            pts(&spec.polyline(&series.values))
        );
    }
    let lx = CX + RADIUS + 130.0;
    for (i, series) in spec.series.iter().enumerate() {
        let (colour, dash) = STYLES[i % STYLES.len()];
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let y = 80.0 + 22.0 * i as f64;
        let _ = writeln!(w, r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"{dash}/>"#, lx + 30.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 38.0, y + 4.0, esc(&series.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(values: &[&[f64]], axes: usize) -> RadarChartSpec {
        RadarChartSpec {
            title: "t".into(),
            axes: (0..axes).map(|a| format!("a{a}")).collect(),
            series: values.iter().enumerate().map(|(i, v)| RadarSeries { label: format!("s{i}"), values: v.to_vec() }).collect(),
        }
    }

    #[test]
    fn too_few_axes() {
        assert!(matches!(render_radar_svg(&spec(&[&[1.0, 2.0]], 2)), Err(ReportError::TooFewAxes(2))));
    }

    #[test]
    fn scale_rounds_up_to_ten() {
        assert_eq!(spec(&[&[40.3, 1.0, 2.0]], 3).radial_max(), 50.0);
        assert_eq!(spec(&[&[40.0, 1.0, 2.0]], 3).radial_max(), 40.0);
        assert_eq!(spec(&[&[0.0, 0.0, 0.0]], 3).radial_max(), 10.0);
    }

    #[test]
    fn geometry() {
        let s = spec(&[&[10.0, 10.0, 10.0, 10.0]], 4);
        let p = s.polyline(&[10.0, 10.0, 10.0, 10.0]);
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], p[4]);
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9;
        // 12 o'clock, then clockwise: right, bottom, left.
        assert!(close(p[0], (CX, CY - RADIUS)));
        assert!(close(p[1], (CX + RADIUS, CY)));
        assert!(close(p[2], (CX, CY + RADIUS)));
        assert!(close(p[3], (CX - RADIUS, CY)));
    }

    #[test]
    fn zero_series_collapses_to_center() {
        let s = spec(&[&[0.0, 0.0, 0.0]], 3);
        assert!(s.polyline(&[0.0; 3]).iter().all(|&(x, y)| x == CX && y == CY));
        let svg = render_radar_svg(&s).unwrap();
        assert!(svg.contains(r#"points="280.00,290.00 280.00,290.00 280.00,290.00 280.00,290.00""#));
    }

    #[test]
    fn escapes_labels() {
        let mut s = spec(&[&[1.0, 2.0, 3.0]], 3);
        s.axes[0] = "a<b & c".into();
        assert!(render_radar_svg(&s).unwrap().contains("a&lt;b &amp; c"));
    }
}
