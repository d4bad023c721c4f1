//! Minimal static SVG line plots for sweep summaries.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::experiments::SummaryRow;

/// Which summary metric to plot on the y-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    Objective,
    TotalSensedBytes,
}

impl PlotMetric {
    fn label(self) -> &'static str {
        match self {
            PlotMetric::Objective => "objective value",
            PlotMetric::TotalSensedBytes => "total sensed data (bytes)",
        }
    }

    fn value(self, row: &SummaryRow) -> f64 {
        match self {
            PlotMetric::Objective => row.mean_objective,
            PlotMetric::TotalSensedBytes => row.mean_total_sensed_bytes,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Render one polyline per algorithm, sweep value on the x-axis. The output
/// is deterministic: the same summary always yields byte-identical SVG.
pub fn emit_plot<W: Write>(
    summary: &[SummaryRow],
    metric: PlotMetric,
    x_label: &str,
    mut w: W,
) -> Result<()> {
    if summary.is_empty() {
        return Err(Error::Domain("cannot plot an empty summary".into()));
    }
    let mut algorithms: Vec<String> = summary.iter().map(|s| s.algorithm.to_string()).collect();
    algorithms.sort();
    algorithms.dedup();

    let xs: Vec<f64> = summary.iter().map(|s| s.sweep_value as f64).collect();
    let ys: Vec<f64> = summary.iter().map(|s| metric.value(s)).collect();
    let (x_min, x_max) = min_max(&xs);
    let (y_min, y_max) = min_max(&ys);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let to_px = |x: f64, y: f64| {
        let px = MARGIN_L + (x - x_min) / x_span * (WIDTH - MARGIN_L - MARGIN_R);
        let py = HEIGHT - MARGIN_B - (y - y_min) / y_span * (HEIGHT - MARGIN_T - MARGIN_B);
        (px, py)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
        y0 = HEIGHT - MARGIN_B,
        x1 = WIDTH - MARGIN_R
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{y0}" stroke="black"/>"#,
        y0 = HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        x = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        y = HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {y})">{label}</text>"#,
        y = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        label = metric.label()
    );
    // axis range labels
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_L}" y="{y}" font-size="11" text-anchor="middle">{v}</text>"#,
        y = HEIGHT - MARGIN_B + 16.0,
        v = fmt_num(x_min)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="middle">{v}</text>"#,
        x = WIDTH - MARGIN_R,
        y = HEIGHT - MARGIN_B + 16.0,
        v = fmt_num(x_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{v}</text>"#,
        x = MARGIN_L - 6.0,
        y = HEIGHT - MARGIN_B,
        v = fmt_num(y_min)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{v}</text>"#,
        x = MARGIN_L - 6.0,
        y = MARGIN_T + 4.0,
        v = fmt_num(y_max)
    );

    for (i, algo) in algorithms.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut points: Vec<(f64, f64)> = summary
            .iter()
            .filter(|s| s.algorithm.to_string() == *algo)
            .map(|s| (s.sweep_value as f64, metric.value(s)))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{:.2},{:.2}", px, py)
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{algo}</text>"#,
            x = MARGIN_L + 10.0,
            y = MARGIN_T + 16.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    w.write_all(svg.as_bytes())?;
    Ok(())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn fmt_num(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{:.3e}", v)
    } else {
        format!("{:.3}", v)
    }
}
