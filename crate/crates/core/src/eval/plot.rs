//! Minimal SVG charts for inspecting training and evaluation runs.

use std::fmt::Write;

use super::protocol::MetricReport;
use crate::trainer::LossHistory;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Line chart of named series sharing one x axis (the sample index).
pub fn line_chart(title: &str, series: &[(&str, &[f64])]) -> String {
    let mut s = header(title);
    let (lo, hi) = bounds(series.iter().flat_map(|(_, v)| v.iter()));
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let _ = writeln!(s, r#"<text x="4" y="{}">{hi:.3}</text>"#, PAD);
    let _ = writeln!(s, r#"<text x="4" y="{}">{lo:.3}</text>"#, H - PAD);
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, &v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let _ = write!(d, "{}{:.2} {:.2} ", if d.is_empty() { "M" } else { "L" }, x(i), y(v));
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" fill="none"/>"#, d.trim_end());
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Per-epoch mean critic and generator losses.
pub fn loss_curves(history: &LossHistory) -> String {
    line_chart(
        "training losses per epoch",
        &[
            ("critic", &history.epoch_critic),
            ("generator", &history.epoch_generator),
        ],
    )
}

/// Grouped bars of each method's F1 and balanced accuracy.
pub fn metric_bars(report: &MetricReport) -> String {
    let mut s = header(&format!("{:?} protocol on {}", report.protocol, report.dataset).to_lowercase());
    let values: Vec<f64> = report
        .methods
        .iter()
        .flat_map(|m| [m.f1, m.balanced_accuracy])
        .map(|v| v.unwrap_or(0.0))
        .collect();
    let (lo, hi) = bounds(values.iter().chain([0.0].iter()));
    let zero = H - PAD - (H - 2.0 * PAD) * (0.0 - lo) / (hi - lo);
    let slot = (W - 2.0 * PAD) / report.methods.len().max(1) as f64;
    let bar = slot / 3.0;
    for (i, m) in report.methods.iter().enumerate() {
        for (j, v) in [m.f1, m.balanced_accuracy].into_iter().enumerate() {
            let v = v.unwrap_or(0.0);
            let top = H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
            let x = PAD + slot * i as f64 + bar * (j as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}"><title>{v:.4}</title></rect>"#,
                top.min(zero),
                (top - zero).abs(),
                COLORS[j]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            PAD + slot * (i as f64 + 0.5),
            H - PAD + 16.0,
            escape(&m.method)
        );
    }
    for (j, name) in ["f1", "balanced accuracy"].iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{}">{name}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * (j as f64 + 1.0),
            COLORS[j]
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let svg = line_chart("a < b", &[("x", &[1.0, 2.0, f64::NAN, 0.5])]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
        let flat = line_chart("flat", &[("x", &[1.0])]);
        assert!(!flat.contains("inf"));
    }
}
