//! Static SVG regret curves: one polyline per curve, a shaded ±1 std band,
//! axis labels and a legend. Output is a pure function of the input.

use std::fmt::Write as _;
use std::path::Path;

use super::grid::AggregateCurve;
use crate::error::{BanditError, Result};

pub const MAX_PLOT_POINTS: usize = 1000;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const DASHES: [&str; 4] = ["none", "8,4", "2,3", "10,3,2,3"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotCurve {
    pub label: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PlotCurve {
    pub fn from_aggregate(c: &AggregateCurve) -> Self {
        Self {
            label: c.label(),
            mean: c.mean.clone(),
            std: c.std.clone(),
        }
    }
}

/// Indices `0, s, 2s, ...` plus the last index, with at most
/// [`MAX_PLOT_POINTS`] entries.
fn sample_indices(len: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = len.div_ceil(MAX_PLOT_POINTS - 1).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(range: f64) -> f64 {
    if range <= 0.0 {
        return 1.0;
    }
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

pub fn render_svg(curves: &[PlotCurve]) -> Result<String> {
    if curves.is_empty() {
        return Err(BanditError::InvalidArgument("no curves to plot".into()));
    }
    for c in curves {
        if c.mean.len() != c.std.len() {
            return Err(BanditError::InvalidArgument(format!(
                "curve '{}' has mismatched mean/std lengths",
                c.label
            )));
        }
    }
    let rounds = curves.iter().map(|c| c.mean.len()).max().unwrap_or(0).max(1);
    let y_max = curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m + s))
        .fold(0.0f64, f64::max);
    let step = nice_step(y_max);
    let y_top = if y_max > 0.0 { (y_max / step).ceil() * step } else { 1.0 };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |t: f64| MARGIN_LEFT + plot_w * (t - 1.0) / ((rounds as f64 - 1.0).max(1.0));
    let sy = |y: f64| MARGIN_TOP + plot_h * (1.0 - y.max(0.0).min(y_top) / y_top);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // axes and ticks
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black"/>"#,
        x0 + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{MARGIN_TOP:.2}" x2="{x0:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let mut tick = 0.0;
    while tick <= y_top + 1e-9 * y_top {
        let y = sy(tick);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            format_tick(tick)
        );
        tick += step;
    }
    let x_step = nice_step(rounds as f64);
    let mut xt = 0.0;
    while xt <= rounds as f64 {
        let t = xt.max(1.0);
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            format_tick(xt)
        );
        xt += x_step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">cumulative regret</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = DASHES[(k / COLORS.len() + k) % DASHES.len()];
        let idx = sample_indices(c.mean.len());
        if idx.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &i in &idx {
            let _ = write!(band, "{:.2},{:.2} ", sx(i as f64 + 1.0), sy(c.mean[i] + c.std[i]));
        }
        for &i in idx.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(i as f64 + 1.0), sy(c.mean[i] - c.std[i]));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for &i in &idx {
            let _ = write!(line, "{:.2},{:.2} ", sx(i as f64 + 1.0), sy(c.mean[i]));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            line.trim_end()
        );
        let ly = MARGIN_TOP + 20.0 * k as f64 + 10.0;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn format_tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

pub fn emit_plot(curves: &[PlotCurve], path: &Path) -> Result<()> {
    let svg = render_svg(curves)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BanditError::io(parent, e))?;
    }
    std::fs::write(path, svg).map_err(|e| BanditError::io(path, e))
}
