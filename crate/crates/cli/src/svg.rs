//! Minimal SVG line/scatter plots with optional log axes and shaded bands.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub style: Style,
    /// Symmetric vertical error bars, one per point.
    pub error_bars: Option<Vec<f64>>,
}

/// Filled region between `lower` and `upper` over the same x values.
#[derive(Debug, Clone)]
pub struct Band {
    pub name: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub color: String,
    pub opacity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            if b >= a {
                return (a..=b).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
            }
        }
        let (lo, hi) = if self.log {
            (10f64.powf(self.lo), 10f64.powf(self.hi))
        } else {
            (self.lo, self.hi)
        };
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut out = Vec::new();
        let mut t = (lo / step).ceil() * step;
        while t <= hi + 1e-9 * step {
            out.push((t, format!("{}", (t / step).round() * step)));
            t += step;
        }
        out
    }
}

impl Plot {
    pub fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.bands.iter().flat_map(|b| b.x.iter().copied()));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper).copied()));
        let ax = Axis::fit(xs, self.log_x);
        let ay = Axis::fit(ys, self.log_y);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |x: f64| ax.frac(x).map(|f| LEFT + f * pw);
        let py = |y: f64| ay.frac(y).map(|f| TOP + (1.0 - f) * ph);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r##"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"##);

        for (v, label) in ax.ticks() {
            if let Some(x) = px(v) {
                let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e6e6e6"/>"##, TOP + ph);
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 16.0);
            }
        }
        for (v, label) in ay.ticks() {
            if let Some(y) = py(v) {
                let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e6e6e6"/>"##, LEFT + pw);
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0);
            }
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(s, r##"<g clip-path="url(#plot)">"##);
        for b in &self.bands {
            let mut pts = Vec::new();
            for (x, y) in b.x.iter().zip(&b.upper) {
                if let (Some(a), Some(c)) = (px(*x), py(*y)) {
                    pts.push(format!("{a:.2},{c:.2}"));
                }
            }
            for (x, y) in b.x.iter().zip(&b.lower).rev() {
                let y = if self.log_y && *y <= 0.0 { 10f64.powf(ay.lo) } else { *y };
                if let (Some(a), Some(c)) = (px(*x), py(y)) {
                    pts.push(format!("{a:.2},{c:.2}"));
                }
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="{}" stroke="none"/>"#,
                pts.join(" "),
                b.color,
                b.opacity
            );
        }
        for ser in &self.series {
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter_map(|(x, y)| Some((px(*x)?, py(*y)?)))
                .collect();
            match ser.style {
                Style::Line | Style::Dashed => {
                    let d: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                    let dash = if ser.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                        d.join(" "),
                        ser.color
                    );
                }
                Style::Markers => {
                    for (a, b) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3.5" fill="{}"/>"#, ser.color);
                    }
                }
            }
            if let Some(bars) = &ser.error_bars {
                for ((x, y), e) in ser.points.iter().zip(bars) {
                    let lo = if self.log_y && y - e <= 0.0 { 10f64.powf(ay.lo) } else { y - e };
                    if let (Some(a), Some(b0), Some(b1)) = (px(*x), py(lo), py(y + e)) {
                        let _ = writeln!(s, r#"<line x1="{a:.2}" y1="{b0:.2}" x2="{a:.2}" y2="{b1:.2}" stroke="{}"/>"#, ser.color);
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");

        let mut ly = TOP + 10.0;
        let lx = LEFT + pw + 14.0;
        for b in &self.bands {
            let _ = writeln!(
                s,
                r#"<rect x="{lx}" y="{:.2}" width="18" height="10" fill="{}" fill-opacity="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                ly - 8.0,
                b.color,
                b.opacity,
                lx + 24.0,
                ly + 1.0,
                escape(&b.name)
            );
            ly += 18.0;
        }
        for ser in &self.series {
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                ly - 3.0,
                lx + 18.0,
                ly - 3.0,
                ser.color,
                lx + 24.0,
                ly + 1.0,
                escape(&ser.name)
            );
            ly += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
