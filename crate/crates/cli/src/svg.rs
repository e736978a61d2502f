//! Minimal SVG charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (bx, by) = (f.px(f.x0), f.py(f.y0));
    let _ = writeln!(out, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, f.px(f.x1));
    let _ = writeln!(out, r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{}" stroke="black"/>"#, f.py(f.y1));
    for i in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(x), by + 16.0, tick(x));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, bx - 6.0, f.py(y) + 4.0, tick(y));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        H / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - 110.0, y);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, W - 95.0, y + 9.0, escape(l));
    }
}

/// One line per series with vertical interval bars; bin `k` sits at `k + 0.5`.
pub struct Series<'a> {
    pub label: &'a str,
    pub mean: &'a [f64],
    pub half_width: Option<&'a [f64]>,
}

pub fn profile_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], bins: usize) -> String {
    let ymax = series
        .iter()
        .flat_map(|s| s.mean.iter().enumerate().map(move |(k, m)| m + s.half_width.map_or(0.0, |h| h[k])))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let f = Frame { x0: 0.0, x1: bins as f64, y0: 0.0, y1: ymax * 1.05 };
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &f);
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> =
            s.mean.iter().enumerate().map(|(k, &m)| format!("{:.1},{:.1}", f.px(k as f64 + 0.5), f.py(m))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        if let Some(h) = s.half_width {
            for (k, (&m, &hw)) in s.mean.iter().zip(h).enumerate() {
                if hw > 0.0 {
                    let x = f.px(k as f64 + 0.5);
                    let _ = writeln!(
                        out,
                        r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{c}" stroke-opacity="0.5"/>"#,
                        f.py((m - hw).max(0.0)),
                        f.py(m + hw)
                    );
                }
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.label).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Overlaid step histograms, each normalized to unit area.
pub fn histogram_chart(title: &str, x_label: &str, groups: &[(&str, &[f64])], bins: usize) -> String {
    let all = groups.iter().flat_map(|g| g.1.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let width = (hi - lo) / bins as f64;
    let densities: Vec<Vec<f64>> = groups
        .iter()
        .map(|(_, v)| {
            let mut d = vec![0.0; bins];
            for &x in v.iter() {
                let k = (((x - lo) / width) as usize).min(bins - 1);
                d[k] += 1.0;
            }
            let n = v.len().max(1) as f64;
            d.iter_mut().for_each(|c| *c /= n * width);
            d
        })
        .collect();
    let ymax = densities.iter().flatten().fold(0.0f64, |a, &b| a.max(b)).max(1e-12);
    let f = Frame { x0: lo, x1: hi, y0: 0.0, y1: ymax * 1.05 };
    let mut out = String::new();
    open(&mut out, title, x_label, "density", &f);
    for (i, d) in densities.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let mut pts = vec![format!("{:.1},{:.1}", f.px(lo), f.py(0.0))];
        for (k, &v) in d.iter().enumerate() {
            let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
            pts.push(format!("{:.1},{:.1}", f.px(a), f.py(v)));
            pts.push(format!("{:.1},{:.1}", f.px(b), f.py(v)));
        }
        pts.push(format!("{:.1},{:.1}", f.px(hi), f.py(0.0)));
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
    }
    legend(&mut out, &groups.iter().map(|g| g.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}
