//! Self-contained SVG line charts, no external renderer.
//!
//! Output is plain-text SVG: axes with ticks, one polyline per series, a
//! text legend, and dashed vertical markers at regime-shift steps.

use std::fs;
use std::path::Path;

use crate::error::{ArenaError, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Renders a multi-series line chart to `path`.
pub fn line_chart_to_file(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    vlines: &[usize],
) -> Result<()> {
    let svg = line_chart(title, x_label, y_label, series, vlines)?;
    fs::write(path, svg).map_err(|e| ArenaError::io(path, e))
}

/// Builds the SVG document for a multi-series line chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    vlines: &[usize],
) -> Result<String> {
    if series.iter().all(|(_, pts)| pts.is_empty()) {
        return Err(ArenaError::EmptyInput(format!(
            "no data for chart '{title}'"
        )));
    }
    let points = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_min == x_max {
        x_max = x_min + 1.0;
    }
    if y_min == y_max {
        y_max = y_min + 1.0;
    }
    // A touch of headroom keeps curves off the frame.
    let y_pad = (y_max - y_min) * 0.05;
    y_min -= y_pad;
    y_max += y_pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    ));

    // Frame.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));

    // Ticks and labels.
    for k in 0..=5 {
        let fx = k as f64 / 5.0;
        let x_val = x_min + fx * (x_max - x_min);
        let px = sx(x_val);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#333\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            tick_label(x_val)
        ));
        let y_val = y_min + fx * (y_max - y_min);
        let py = sy(y_val);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_LEFT}\" y2=\"{py}\" stroke=\"#333\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(y_val)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    // Shift markers.
    for &step in vlines {
        let x = step as f64;
        if x < x_min || x > x_max {
            continue;
        }
        let px = sx(x);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{MARGIN_TOP}\" x2=\"{px}\" y2=\"{}\" stroke=\"#999\" \
             stroke-dasharray=\"5,4\"/>\n",
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             fill=\"#777\" text-anchor=\"middle\">t={step}</text>\n",
            MARGIN_TOP - 6.0
        ));
    }

    // Series.
    for (idx, (name, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_TOP + 16.0 + idx as f64 * 18.0;
        let lx = WIDTH - MARGIN_RIGHT + 14.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            ly - 4.0,
            lx + 22.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            escape(name)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_series() -> Vec<(String, Vec<(f64, f64)>)> {
        vec![
            (
                "oracle".into(),
                (0..100).map(|t| (t as f64, 9.0 + (t as f64 / 50.0))).collect(),
            ),
            (
                "rl".into(),
                (0..100).map(|t| (t as f64, 8.0 + (t as f64 / 60.0))).collect(),
            ),
        ]
    }

    #[test]
    fn chart_has_one_polyline_per_series() {
        let svg = line_chart("cov", "step", "coverage", &sample_series(), &[30, 40, 50]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn chart_marks_shift_steps() {
        let svg = line_chart("cov", "step", "coverage", &sample_series(), &[30, 40, 50]).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        assert!(svg.contains("t=30"));
        assert!(svg.contains("t=40"));
        assert!(svg.contains("t=50"));
    }

    #[test]
    fn chart_is_well_formed_xml() {
        let svg = line_chart("a < b", "x", "y", &sample_series(), &[10]).unwrap();
        // Minimal well-formedness: one root element, balanced tags, all
        // text escaped.
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("a < b"));
        assert!(svg.contains("a &lt; b"));
        let opens = svg.matches("<text").count();
        let closes = svg.matches("</text>").count();
        assert_eq!(opens, closes);
    }

    #[test]
    fn empty_chart_is_an_error() {
        let empty: Vec<(String, Vec<(f64, f64)>)> = vec![("none".into(), vec![])];
        assert!(matches!(
            line_chart("t", "x", "y", &empty, &[]),
            Err(ArenaError::EmptyInput(_))
        ));
    }
}
