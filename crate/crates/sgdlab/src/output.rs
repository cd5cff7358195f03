//! Persistence: tidy CSV emission and a minimal hand-rolled log-log SVG
//! chart. Both are deterministic functions of their inputs so reruns with
//! the same config produce byte-identical files.

use crate::curve::RiskCurve;
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "run_id,series,t,value,stderr,replicates";

/// Format a float with 17 significant digits (round-trippable for f64).
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Tidy CSV: one row per (series, checkpoint). The stderr column is empty
/// for exact/bound series (no replicate scatter).
pub fn csv_string(run_id: &str, curves: &[RiskCurve]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for curve in curves {
        let label = curve.series.label();
        for (i, (&t, &v)) in curve.checkpoints.iter().zip(&curve.values).enumerate() {
            let stderr = match &curve.stderrs {
                Some(s) => fmt_float(s[i]),
                None => String::new(),
            };
            out.push_str(&format!(
                "{run_id},{label},{t},{},{stderr},{}\n",
                fmt_float(v),
                curve.replicates
            ));
        }
    }
    out
}

pub fn write_csv(path: &Path, run_id: &str, curves: &[RiskCurve]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv_string(run_id, curves).as_bytes())
}

/// One labelled polyline on the chart; points are `(t, value)` in data
/// coordinates and nonpositive entries are dropped (log axes).
#[derive(Debug, Clone)]
pub struct SvgLine {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl SvgLine {
    pub fn from_curve(curve: &RiskCurve) -> Self {
        SvgLine {
            label: curve.series.label().to_string(),
            points: curve
                .checkpoints
                .iter()
                .zip(&curve.values)
                .map(|(&t, &v)| (t as f64, v))
                .collect(),
            dashed: false,
        }
    }
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Minimal log-log line chart: axes, ticks at decades, legend, optional
/// vertical markers (e.g. a predicted transition time). Plot fidelity is
/// structural, not publication-grade.
pub fn render_loglog_svg(
    title: &str,
    lines: &[SvgLine],
    markers: &[(f64, String)],
) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for line in lines {
        for &(x, y) in &line.points {
            if x > 0.0 && y > 0.0 {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !x_min.is_finite() {
        // Nothing plottable; keep an empty but valid document.
        x_min = 1.0;
        x_max = 10.0;
        y_min = 0.1;
        y_max = 1.0;
    }
    if x_min == x_max {
        x_max = x_min * 10.0;
    }
    if y_min == y_max {
        y_min = y_max / 10.0;
    }
    let (lx0, lx1) = (x_min.log10(), x_max.log10());
    let (ly0, ly1) = (y_min.log10(), y_max.log10());
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x.log10() - lx0) / (lx1 - lx0) * plot_w;
    let sy = |y: f64| MARGIN_T + (ly1 - y.log10()) / (ly1 - ly0) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    ));
    // Axes.
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    // Decade ticks.
    for k in lx0.ceil() as i64..=lx1.floor() as i64 {
        let px = sx(10f64.powi(k as i32));
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{y0}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">1e{k}</text>\n",
            y0 + 20.0
        ));
    }
    for k in ly0.ceil() as i64..=ly1.floor() as i64 {
        let py = sy(10f64.powi(k as i32));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">1e{k}</text>\n",
            x0 - 8.0,
            py + 4.0
        ));
    }
    // Vertical markers.
    for (x, label) in markers {
        if *x >= x_min && *x <= x_max {
            let px = sx(*x);
            svg.push_str(&format!(
                "<line x1=\"{px:.2}\" y1=\"{y0}\" x2=\"{px:.2}\" y2=\"{y1}\" \
                 stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
                 fill=\"gray\">{}</text>\n",
                px + 4.0,
                y1 + 14.0,
                xml_escape(label)
            ));
        }
    }
    // Data lines.
    for (i, line) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if line.dashed { " stroke-dasharray=\"8 5\"" } else { "" };
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} \
             points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }
    // Legend, top-right of the plot region.
    for (i, line) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R - 170.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"1.5\"/>\n",
            lx + 26.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 32.0,
            ly + 4.0,
            xml_escape(&line.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(
    path: &Path,
    title: &str,
    lines: &[SvgLine],
    markers: &[(f64, String)],
) -> std::io::Result<()> {
    std::fs::write(path, render_loglog_svg(title, lines, markers))
}
