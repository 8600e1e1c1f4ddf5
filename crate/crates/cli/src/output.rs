//! CSV, SVG and run-manifest writers. CSV is the canonical output
//! (comma-separated, header row, 17 significant digits); SVG plots are
//! fixed-viewBox polylines for quick inspection.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Format a float with 17 significant digits.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

/// Minimal polyline plot: one or more series over a common x-range.
pub fn write_svg(path: &Path, series: &[(&str, &[(f64, f64)])]) -> std::io::Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in series {
        for &(x, y) in *pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    // axes
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\"/>\n",
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\"/>\n",
        PAD,
        PAD,
        PAD,
        H - PAD
    ));
    // reference line at y = 1 when in range (certificate plots)
    if y0 < 1.0 && 1.0 < y1 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ccc\" stroke-dasharray=\"4\"/>\n",
            PAD,
            W - PAD,
            y = sy(1.0)
        ));
    }
    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let path_d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
            })
            .collect();
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path_d.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"12\">{label}</text>\n",
            W - PAD - 120.0,
            PAD + 16.0 * (idx as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)
}

/// Every command writes one of these next to its outputs; re-running the
/// echoed command reproduces the outputs byte-identically apart from the
/// timestamp field in the manifest itself.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub timestamp_epoch_seconds: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp_epoch_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or_default()
                .as_secs(),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{stem}_manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(path)
    }
}
