//! Minimal SVG line chart of mean learning curves with ±1 sd bands.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DissError, Result};
use crate::runner::{aggregate, read_curves_csv, AggregatePoint};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders one polyline per strategy. A band is drawn only where more
/// than one seed contributed.
pub fn render_svg(points: &[AggregatePoint]) -> Result<String> {
    if points.is_empty() {
        return Err(DissError::Schema("nothing to plot".into()));
    }
    let mut strategies: Vec<&str> = Vec::new();
    for p in points {
        if !strategies.contains(&p.strategy.as_str()) {
            strategies.push(&p.strategy);
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.queries as f64);
        x1 = x1.max(p.queries as f64);
        y0 = y0.min(p.mean_reward - p.sd_reward);
        y1 = y1.max(p.mean_reward + p.sd_reward);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (px0, px1, py0, py1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{px0},{py0} L{px0},{py1} L{px1},{py1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#, sx(fx), py1 + 18.0, fx);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, px0 - 6.0, sy(fy) + 4.0, fy);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">queries</text>"#, (px0 + px1) / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">mean test reward</text>"#,
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0
    );

    for (k, name) in strategies.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts: Vec<&AggregatePoint> = points.iter().filter(|p| p.strategy == *name).collect();
        pts.sort_by_key(|p| p.queries);
        if pts.iter().any(|p| p.seeds > 1) {
            let upper: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.queries as f64), sy(p.mean_reward + p.sd_reward))).collect();
            let lower: Vec<String> =
                pts.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.queries as f64), sy(p.mean_reward - p.sd_reward))).collect();
            let _ = writeln!(s, r#"<polygon class="band" points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, upper.join(" "), lower.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.queries as f64), sy(p.mean_reward))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"><title>{}</title></polyline>"#, line.join(" "), escape(name));
        let ly = TOP + 20.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, px1 + 12.0, px1 + 32.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, px1 + 38.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads and merges curve CSVs, then writes the chart. Nothing is written
/// if any input fails to parse.
pub fn plot_files(inputs: &[impl AsRef<Path>], output: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_curves_csv(p.as_ref())?);
    }
    let svg = render_svg(&aggregate(&rows)?)?;
    std::fs::write(output, svg).map_err(|e| DissError::io(output, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str, q: usize, m: f64, sd: f64, seeds: usize) -> AggregatePoint {
        AggregatePoint { strategy: s.into(), queries: q, mean_reward: m, sd_reward: sd, mean_nfeat: 0.0, seeds }
    }

    #[test]
    fn single_seed_has_no_band() {
        let svg = render_svg(&[pt("Random", 500, -0.6, 0.0, 1), pt("Random", 600, -0.5, 0.0, 1)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("class=\"band\""));
    }

    #[test]
    fn two_strategies_two_lines() {
        let svg = render_svg(&[pt("A", 1, -1.0, 0.1, 3), pt("A", 2, -0.9, 0.1, 3), pt("B<x>", 1, -1.1, 0.0, 3)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("B&lt;x&gt;"));
        assert_eq!(svg.matches("class=\"band\"").count(), 2);
    }
}
