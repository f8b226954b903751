//! Minimal SVG emission for ROC curves and score histograms. Static line
//! plots only; the axes are fixed to the unit square / score range.

use std::fmt::Write as _;
use std::path::Path;

use crate::metrics::{RocPoint, VerificationReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
}

fn to_plot(x: f64, y: f64) -> (f64, f64) {
    let px = MARGIN + x * (WIDTH - 2.0 * MARGIN);
    let py = HEIGHT - MARGIN - y * (HEIGHT - 2.0 * MARGIN);
    (px, py)
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
    let coords: Vec<String> = points
        .map(|(x, y)| {
            let (px, py) = to_plot(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
        coords.join(" ")
    )
}

/// ROC curve as an SVG line plot over the unit square.
pub fn write_roc_svg(report: &VerificationReport, path: &Path) -> std::io::Result<()> {
    let title = format!(
        "ROC {} ({}) AUC {:.4}",
        report.matcher_id, report.variant, report.auc
    );
    let mut svg = svg_header(&title);
    svg.push_str(&axes("false accept rate", "true accept rate"));
    // chance diagonal
    let (dx0, dy0) = to_plot(0.0, 0.0);
    let (dx1, dy1) = to_plot(1.0, 1.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{dx0}\" y1=\"{dy0}\" x2=\"{dx1}\" y2=\"{dy1}\" \
         stroke=\"lightgray\" stroke-dasharray=\"4 4\"/>"
    );
    svg.push_str(&polyline(
        report.roc.iter().map(|p: &RocPoint| (p.far, p.tar)),
        "steelblue",
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

/// Overlaid genuine/impostor score histograms (30 bins over the score range).
pub fn write_histograms_svg(
    genuine: &[f64],
    impostor: &[f64],
    title: &str,
    path: &Path,
) -> std::io::Result<()> {
    const BINS: usize = 30;
    let all = genuine.iter().chain(impostor);
    let min = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let max = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };

    let histogram = |scores: &[f64]| -> Vec<f64> {
        let mut bins = vec![0.0f64; BINS];
        for &s in scores {
            let b = (((s - min) / span) * BINS as f64).floor() as usize;
            bins[b.min(BINS - 1)] += 1.0;
        }
        let peak = bins.iter().cloned().fold(0.0f64, f64::max).max(1.0);
        bins.iter().map(|v| v / peak).collect()
    };

    let mut svg = svg_header(title);
    svg.push_str(&axes("score", "relative frequency"));
    for (scores, color) in [(genuine, "seagreen"), (impostor, "indianred")] {
        let bins = histogram(scores);
        let pts = bins
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i as f64 + 0.5) / BINS as f64, v));
        svg.push_str(&polyline(pts, color));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PairLabel, Variant};
    use crate::matching::ScoreRecord;
    use crate::metrics::build_report;

    #[test]
    fn svg_files_are_written_and_well_formed() {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(
                ScoreRecord::new(format!("g{i}"), "x", PairLabel::Genuine)
                    .with_score("m", 0.6 + 0.04 * i as f64),
            );
            records.push(
                ScoreRecord::new(format!("i{i}"), "x", PairLabel::Impostor)
                    .with_score("m", 0.1 + 0.03 * i as f64),
            );
        }
        let report = build_report(&records, "m", Variant::Original).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let roc_path = dir.path().join("roc.svg");
        write_roc_svg(&report, &roc_path).unwrap();
        let svg = std::fs::read_to_string(&roc_path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.trim_end().ends_with("</svg>"));

        let hist_path = dir.path().join("hist.svg");
        let genuine: Vec<f64> = (0..10).map(|i| 0.6 + 0.04 * i as f64).collect();
        let impostor: Vec<f64> = (0..10).map(|i| 0.1 + 0.03 * i as f64).collect();
        write_histograms_svg(&genuine, &impostor, "scores", &hist_path).unwrap();
        assert!(std::fs::read_to_string(&hist_path).unwrap().contains("</svg>"));
    }
}
