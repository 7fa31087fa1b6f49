//! Static SVG figures: the CV curve with its minimum marked, and
//! measured-vs-predicted scatters with a least-squares line.
//!
//! Output is deterministic except for one optional `<!-- generated: ... -->`
//! comment carrying unix seconds.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const M: f64 = 48.0;

/// Seconds since the epoch, or `None` when `DEEPCHEM_NO_TIMESTAMP=1`.
pub fn timestamp_from_env() -> Option<u64> {
    if std::env::var("DEEPCHEM_NO_TIMESTAMP").is_ok_and(|v| v == "1") {
        return None;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x0: f64,
    y0: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + M + (x - self.xr.0) / (self.xr.1 - self.xr.0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + H - M - (y - self.yr.0) / (self.yr.1 - self.yr.0) * (H - 2.0 * M)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (self.x0 + M, self.x0 + W - M, self.y0 + M, self.y0 + H - M);
        let _ = writeln!(out, r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#, self.x0 + W / 2.0, self.y0 + M / 2.0, escape(title));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#, self.x0 + W / 2.0, self.y0 + H - 10.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
            escape(ylabel),
            x = self.x0 + 14.0,
            y = self.y0 + H / 2.0
        );
        for (v, x) in [(self.xr.0, l), (self.xr.1, r)] {
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#, b + 14.0, tick(v));
        }
        for (v, y) in [(self.yr.0, b), (self.yr.1, t)] {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{}</text>"#, l - 4.0, tick(v));
        }
    }
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn open(out: &mut String, width: f64, attrs: &str, timestamp: Option<u64>) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{H:.0}" viewBox="0 0 {width:.0} {H:.0}"{attrs}>"#
    );
    if let Some(t) = timestamp {
        let _ = writeln!(out, "<!-- generated: {t} -->");
    }
}

/// RMSECV against model order, with a vertical rule at `selected` (1-based).
pub fn cv_curve_svg(rmsecv: &[f64], selected: usize, title: &str, timestamp: Option<u64>) -> String {
    let xs: Vec<f64> = (1..=rmsecv.len()).map(|a| a as f64).collect();
    let mut out = String::new();
    open(&mut out, W, &format!(r#" data-selected-lv="{selected}""#), timestamp);
    let _ = writeln!(out, "<metadata>selected_lv={selected}</metadata>");
    let f = Frame { x0: 0.0, y0: 0.0, xr: range(&xs), yr: range(rmsecv) };
    f.axes(&mut out, title, "latent variables", "RMSECV");
    let pts: Vec<String> = xs.iter().zip(rmsecv).map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, pts.join(" "));
    for (&x, &y) in xs.iter().zip(rmsecv) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, f.px(x), f.py(y));
    }
    let sx = f.px(selected as f64);
    let _ = writeln!(
        out,
        r#"<line class="minimum" x1="{sx:.2}" y1="{:.2}" x2="{sx:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="4 3"/>"#,
        M,
        H - M
    );
    out.push_str("</svg>\n");
    out
}

/// One measured-vs-predicted panel.
#[derive(Debug, Clone)]
pub struct ScatterPanel<'a> {
    pub title: String,
    pub measured: &'a [f64],
    pub predicted: &'a [f64],
}

/// Least-squares `(intercept, slope)` of `y` on `x`; `None` when `x` is constant.
pub fn least_squares_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn draw_scatter(out: &mut String, p: &ScatterPanel<'_>, x0: f64) {
    let all: Vec<f64> = p.measured.iter().chain(p.predicted).copied().collect();
    let r = range(&all);
    let f = Frame { x0, y0: 0.0, xr: r, yr: r };
    f.axes(out, &p.title, "measured", "predicted");
    let _ = writeln!(
        out,
        r#"<line class="identity" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="2 2"/>"#,
        f.px(r.0),
        f.py(r.0),
        f.px(r.1),
        f.py(r.1)
    );
    for (&x, &y) in p.measured.iter().zip(p.predicted) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue" fill-opacity="0.7"/>"#, f.px(x), f.py(y));
    }
    if let Some((b0, b1)) = least_squares_line(p.measured, p.predicted) {
        let _ = writeln!(
            out,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick"/>"#,
            f.px(r.0),
            f.py(b0 + b1 * r.0),
            f.px(r.1),
            f.py(b0 + b1 * r.1)
        );
    }
}

/// Panels laid out left to right in one figure.
pub fn scatter_svg(panels: &[ScatterPanel<'_>], timestamp: Option<u64>) -> String {
    let mut out = String::new();
    open(&mut out, W * panels.len().max(1) as f64, "", timestamp);
    for (i, p) in panels.iter().enumerate() {
        draw_scatter(&mut out, p, W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
