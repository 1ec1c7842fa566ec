//! Artifact writers. Every file carries the run's seed, preset and
//! coefficient checksum.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use phasing_core::engine::records::{header_lines, write_records};
use phasing_core::engine::RunOutput;
use phasing_core::Result;
use serde::Serialize;

use crate::summary::{to_table, SegmentSummary, SummaryConfig};

#[derive(Debug, Serialize)]
struct SummaryJson<'a> {
    seed: u64,
    preset: &'a str,
    controller: &'a str,
    coefficients_sha256: &'a str,
    config: &'a SummaryConfig,
    segments: &'a [SegmentSummary],
}

/// Writes `records.csv`, `soi_cyl1.csv`, `summary.txt`, `summary.json` and
/// the two SVG charts into `dir`. Returns the paths written.
pub fn write_run(
    dir: &Path,
    out: &RunOutput,
    summary: &[SegmentSummary],
    cfg: &SummaryConfig,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let header = header_lines(out).join("\n");

    let path = dir.join("records.csv");
    write_records(out, fs::File::create(&path)?)?;
    written.push(path);

    let path = dir.join("soi_cyl1.csv");
    let mut soi = format!("{header}\ncycle,time,soi,clamped\n");
    for r in out.records.iter().filter(|r| r.cylinder == 1) {
        if let Some(s) = r.soi {
            writeln!(soi, "{},{:.6},{:.6},{}", r.cycle, r.time, s, r.clamped).unwrap();
        }
    }
    fs::write(&path, soi)?;
    written.push(path);

    let path = dir.join("summary.txt");
    fs::write(&path, format!("{header}\n{}", to_table(summary, cfg)))?;
    written.push(path);

    let path = dir.join("summary.json");
    let json = SummaryJson {
        seed: out.seed,
        preset: &out.preset,
        controller: out.controller.name(),
        coefficients_sha256: &out.coefficients_sha256,
        config: cfg,
        segments: summary,
    };
    fs::write(&path, json_text(&json))?;
    written.push(path);

    for (name, svg) in [
        ("ca50.svg", ca50_chart(out)),
        ("soi_cyl1.svg", soi_chart(out)),
    ] {
        let path = dir.join(name);
        match fs::write(&path, svg) {
            Ok(()) => written.push(path),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    Ok(written)
}

/// Pretty JSON; non-finite floats become `null`.
pub fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Multi-series line chart. Series are `(label, points)`.
pub fn line_chart(
    title: &str,
    comment: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    const W: f64 = 800.0;
    const H: f64 = 420.0;
    const M: f64 = 56.0;
    const COLORS: [&str; 7] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#444444",
    ];
    let pts = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y1 > y0) {
        (y0, y1) = (y0.min(0.0) - 1.0, y1.max(0.0) + 1.0);
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, "<!-- {} -->", comment.replace("--", "- -")).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    )
    .unwrap();
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.3}</text>"#,
            sx(fx),
            H - M + 16.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{fy:.3}</text>"#,
            M - 4.0,
            sy(fy) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    )
    .unwrap();
    writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{y_label}</text>"#, H / 2.0, H / 2.0).unwrap();
    for (k, (label, p)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{label}</text>"#,
            W - M + 4.0,
            M + 14.0 * (k as f64 + 1.0)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn attribution(out: &RunOutput) -> String {
    format!(
        "seed {} preset {} controller {} coefficients_sha256 {}",
        out.seed,
        out.preset,
        out.controller.name(),
        out.coefficients_sha256
    )
}

pub fn ca50_chart(out: &RunOutput) -> String {
    let n_cyl = out.records.iter().map(|r| r.cylinder).max().unwrap_or(0);
    let mut series: Vec<(String, Vec<(f64, f64)>)> = (1..=n_cyl)
        .map(|c| {
            let p = out
                .records
                .iter()
                .filter(|r| r.cylinder == c)
                .filter_map(|r| Some((r.time, r.ca50_true?)))
                .collect();
            (format!("cyl {c}"), p)
        })
        .collect();
    series.push((
        "ref".into(),
        out.records
            .iter()
            .filter(|r| r.cylinder == 1)
            .map(|r| (r.time, r.ca50_ref))
            .collect(),
    ));
    line_chart(
        &format!("CA50, {} / {}", out.preset, out.controller.name()),
        &attribution(out),
        "time [s]",
        "CA50 [CAD aTDC]",
        &series,
    )
}

pub fn soi_chart(out: &RunOutput) -> String {
    let p = out
        .records
        .iter()
        .filter(|r| r.cylinder == 1)
        .filter_map(|r| Some((r.time, r.soi?)))
        .collect();
    line_chart(
        &format!("SOI cylinder 1, {} / {}", out.preset, out.controller.name()),
        &attribution(out),
        "time [s]",
        "SOI [CAD aTDC]",
        &[("cyl 1".into(), p)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let svg = line_chart(
            "t",
            "seed 1",
            "x",
            "y",
            &[("a".into(), vec![(0.0, 1.0), (1.0, 2.0)])],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline") && svg.contains("seed 1"));
    }

    #[test]
    fn degenerate_series_still_draws() {
        let svg = line_chart(
            "t",
            "",
            "x",
            "y",
            &[("a".into(), vec![(0.0, 1.0)]), ("b".into(), vec![])],
        );
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
