use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::trainer::{MetricsRow, ScoreRow};
use crate::AcquisitionKind;

pub const METRICS_HEADER: &str = "step,test_accuracy,corrupted_frac,whitenoise_frac,mean_score";
pub const SCORES_HEADER: &str = "step,id,kind,score";
pub const SPEARMAN_HEADER: &str = "step,rho";
pub const COMPOSITION_HEADER: &str =
    "step,corrupted_frac,whitenoise_frac,corrupted_window,whitenoise_window";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.step, r.test_accuracy, r.corrupted_frac, r.whitenoise_frac, r.mean_score
        )
        .unwrap();
    }
    out
}

pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = format!("{SCORES_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.step, r.id, r.kind, r.score).unwrap();
    }
    out
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCORES_HEADER => {}
        _ => {
            return Err(Error::Input(format!(
                "score dump must start with `{SCORES_HEADER}`"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Input(format!("score dump line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split(',').collect();
        let [step, id, kind, score] = fields.as_slice() else {
            return Err(bad("expected 4 fields"));
        };
        rows.push(ScoreRow {
            step: step.trim().parse().map_err(|_| bad("bad step"))?,
            id: id.trim().parse().map_err(|_| bad("bad id"))?,
            kind: kind
                .trim()
                .parse::<AcquisitionKind>()
                .map_err(|_| bad("bad kind"))?,
            score: score.trim().parse().map_err(|_| bad("bad score"))?,
        });
    }
    Ok(rows)
}

pub fn spearman_csv(rows: &[(u64, f64)]) -> String {
    let mut out = format!("{SPEARMAN_HEADER}\n");
    for (step, rho) in rows {
        writeln!(out, "{step},{rho}").unwrap();
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

/// A minimal SVG line chart; output depends only on the data.
pub fn line_chart(title: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in &finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    for (v, y) in [(y0, H - PAD), (y1, PAD)] {
        writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            PAD - 6.0,
            y + 4.0,
            tick(v)
        )
        .unwrap();
    }
    for (v, x) in [(x0, PAD), (x1, W - PAD)] {
        writeln!(
            svg,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
            H - PAD + 18.0,
            tick(v)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#,
        W / 2.0,
        H - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    )
    .unwrap();
    if !finite.is_empty() {
        let pts: Vec<String> = finite
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One chart per metric column, keyed by file name.
pub fn metric_charts(rows: &[MetricsRow], title: &str) -> Vec<(&'static str, String)> {
    let series = |f: fn(&MetricsRow) -> f64| {
        rows.iter()
            .map(|r| (r.step as f64, f(r)))
            .collect::<Vec<_>>()
    };
    vec![
        (
            "test_accuracy.svg",
            line_chart(
                &format!("{title}: test accuracy"),
                "test accuracy",
                &series(|r| r.test_accuracy),
            ),
        ),
        (
            "corrupted_frac.svg",
            line_chart(
                &format!("{title}: corrupted fraction"),
                "corrupted fraction",
                &series(|r| r.corrupted_frac),
            ),
        ),
        (
            "whitenoise_frac.svg",
            line_chart(
                &format!("{title}: white-noise fraction"),
                "white-noise fraction",
                &series(|r| r.whitenoise_frac),
            ),
        ),
        (
            "mean_score.svg",
            line_chart(
                &format!("{title}: mean selected score"),
                "mean score",
                &series(|r| r.mean_score),
            ),
        ),
    ]
}
