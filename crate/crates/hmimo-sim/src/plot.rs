//! Minimal SVG line plots generated from emitted CSV files.
//!
//! The CSV is the normative artifact; plots are regenerated purely from its
//! rows, so they can be rebuilt offline from the CSV alone. Lines starting
//! with `#` are treated as comments, the first remaining line as the header.

use std::path::Path;

use crate::config::{Result, SimError};

/// What to draw from a CSV file.
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x_col: &'a str,
    pub y_col: &'a str,
    /// Column whose distinct values split the rows into curves.
    pub curve_col: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_y: bool,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

/// Trim a number to at most six significant digits for labels.
fn label_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e5 || v.abs() < 1e-4 {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn parse_csv(text: &str, spec: &PlotSpec) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| SimError::Io("csv has no header line".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| SimError::Io(format!("csv lacks column \"{name}\"")))
    };
    let xi = find(spec.x_col)?;
    let yi = find(spec.y_col)?;
    let ci = find(spec.curve_col)?;
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(SimError::Io(format!("csv row has {} fields, expected {}", fields.len(), columns.len())));
        }
        let (x, y) = match (fields[xi].parse::<f64>(), fields[yi].parse::<f64>()) {
            (Ok(x), Ok(y)) => (x, y),
            _ => continue, // non-numeric cell (e.g. empty gap column)
        };
        let key = fields[ci].to_string();
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((x, y)),
            None => curves.push((key, vec![(x, y)])),
        }
    }
    Ok(curves)
}

/// Render `csv_path` into an SVG polyline chart at `svg_path`.
pub fn render_csv_plot(csv_path: &Path, svg_path: &Path, spec: &PlotSpec) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| SimError::Io(format!("{}: {e}", csv_path.display())))?;
    let mut curves = parse_csv(&text, spec)?;
    if spec.log_y {
        for (_, pts) in &mut curves {
            pts.retain(|&(_, y)| y > 0.0);
            for p in pts.iter_mut() {
                p.1 = p.1.log10();
            }
        }
        curves.retain(|(_, pts)| !pts.is_empty());
    }
    if curves.is_empty() || curves.iter().all(|(_, p)| p.is_empty()) {
        return Err(SimError::Io(format!("{}: no plottable rows", csv_path.display())));
    }
    let all = curves.iter().flat_map(|(_, p)| p.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        LEFT + plot_w / 2.0,
        spec.title
    ));
    // Axes box.
    svg.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));
    // Ticks and grid.
    for k in 0..=5 {
        let fx = x_lo + (x_hi - x_lo) * k as f64 / 5.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#333\"/>\n",
            TOP + plot_h,
            TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            TOP + plot_h + 20.0,
            label_num(fx)
        ));
        let fy = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{LEFT}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n",
            LEFT - 5.0
        ));
        let label = if spec.log_y {
            format!("1e{}", label_num(fy))
        } else {
            label_num(fy)
        };
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>\n",
            LEFT - 9.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        spec.x_label
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        spec.y_label
    ));
    // Curves and legend.
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 14.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            lx + 22.0
        ));
        let display: String = if name.len() > 18 {
            let mut short: String = name.chars().take(8).collect();
            short.push('…');
            short
        } else {
            name.clone()
        };
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{display}</text>\n",
            lx + 28.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(svg_path, svg).map_err(|e| SimError::Io(format!("{}: {e}", svg_path.display())))
}

// ---------------------------------------------------------------------------
