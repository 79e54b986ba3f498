//! Minimal deterministic SVG line plots, enough to eyeball a maneuver trace
//! without pulling in a plotting stack.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One named polyline.
pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Renders series into a simple SVG line chart.
pub fn line_plot(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &v in s.x {
            x_min = x_min.min(v);
            x_max = x_max.max(v);
        }
        for &v in s.y {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !(x_min.is_finite() && y_min.is_finite()) {
        return Err(Error::Degenerate("nothing to plot".into()));
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let sx = (WIDTH - 2.0 * MARGIN) / (x_max - x_min);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y_max - y_min);
    let px = |x: f64| MARGIN + (x - x_min) * sx;
    let py = |y: f64| HEIGHT - MARGIN - (y - y_min) * sy;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        title
    );
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        x_label
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label
    );
    // y-axis ticks
    for i in 0..=4 {
        let y = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{:.2}</text>",
            MARGIN - 6.0,
            py(y) + 3.0,
            y
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for (xv, yv) in s.x.iter().zip(s.y) {
            let _ = write!(points, "{:.2},{:.2} ", px(*xv), py(*yv));
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>",
            points.trim_end()
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{x0}\" y1=\"{ly}\" x2=\"{x1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{xt}\" y=\"{yt:.1}\" font-family=\"sans-serif\" font-size=\"11\">{name}</text>",
            x0 = WIDTH - MARGIN - 110.0,
            x1 = WIDTH - MARGIN - 90.0,
            xt = WIDTH - MARGIN - 84.0,
            yt = ly + 4.0,
            name = s.name
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let x: Vec<f64> = (0..100).map(|i| i as f64 * 0.02).collect();
        let y1: Vec<f64> = x.iter().map(|t| (t * 3.0).sin()).collect();
        let y2: Vec<f64> = x.iter().map(|t| (t * 3.0).cos() * 0.5).collect();
        let series = [
            Series { name: "a", x: &x, y: &y1 },
            Series { name: "b", x: &x, y: &y2 },
        ];
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        line_plot(&p1, "demo", "t", "y", &series).unwrap();
        line_plot(&p2, "demo", "t", "y", &series).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().contains("<polyline"));
    }
}
