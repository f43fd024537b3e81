//! Minimal static SVG charts: panels with axes, lines, bars, boxes and
//! points.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Escapes text for SVG content and attributes.
pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Up to about `target` round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let exp = raw.log10().floor() as i32;
    let mag = 10f64.powi(exp);
    let mult = [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().find(|m| m * mag >= raw).unwrap_or(10.0);
    let step = mult * mag;
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    // divide by an exact power of ten so 3 x 0.1 prints as 0.3
    let at = |k: i64| if exp < 0 { k as f64 * mult / 10f64.powi(-exp) } else { k as f64 * step };
    (start..=end).map(at).collect()
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else if a >= 0.001 {
        format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Data range padded by 5%; a degenerate range is widened to unit width.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Plot area of one panel and its data-to-pixel map.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }
}

/// Axis tick labels: numeric, or caller-supplied labels at positions.
pub enum Labels {
    Numeric,
    At(Vec<(f64, String)>),
}

impl Labels {
    fn resolve(self, range: (f64, f64), target: usize) -> Vec<(f64, String)> {
        match self {
            Labels::Numeric => ticks(range.0, range.1, target).into_iter().map(|t| (t, fmt_tick(t))).collect(),
            Labels::At(v) => v,
        }
    }
}

pub struct Canvas {
    width: f64,
    height: f64,
    body: String,
}

impl Canvas {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height, body: String::new() }
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" text-anchor="{anchor}">{}</text>"#, escape(s));
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, dash: Option<&str>) {
        let dash = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{fill}" fill-opacity="{opacity}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="{fill}" fill-opacity="0.8"/>"#);
    }

    pub fn polyline(&mut self, frame: &Frame, pts: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.1},{:.1}", frame.px(*x), frame.py(*y)))
            .collect();
        if pts.len() < 2 {
            return;
        }
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#, pts.join(" "));
    }

    /// Filled band between `lower` and `upper` along `x`.
    pub fn band(&mut self, frame: &Frame, x: &[f64], lower: &[f64], upper: &[f64], fill: &str) {
        let mut pts: Vec<String> = x.iter().zip(upper).map(|(x, y)| format!("{:.1},{:.1}", frame.px(*x), frame.py(*y))).collect();
        pts.extend(x.iter().zip(lower).rev().map(|(x, y)| format!("{:.1},{:.1}", frame.px(*x), frame.py(*y))));
        let _ = writeln!(self.body, r#"<polygon points="{}" fill="{fill}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
    }

    /// Draws a titled panel with axes and returns its plot frame. `margin`
    /// is the width reserved for y labels.
    pub fn panel(
        &mut self,
        rect: (f64, f64, f64, f64),
        title: &str,
        axes: ((f64, f64), (f64, f64)),
        labels: (Labels, Labels),
        margin: f64,
    ) -> Frame {
        let (left, top, width, height) = rect;
        let (x, y) = axes;
        let f = Frame { left: left + margin, top: top + 24.0, width: width - margin - 12.0, height: height - 58.0, x, y };
        self.text(left + width / 2.0, top + 15.0, 13.0, "middle", title);
        self.rect(f.left, f.top, f.width, f.height, "#f7f7f7", 1.0);
        for (t, label) in labels.1.resolve(y, 5) {
            let py = f.py(t);
            self.line((f.left, py), (f.left + f.width, py), "#dddddd", 0.8, None);
            self.text(f.left - 4.0, py + 3.5, 10.0, "end", &label);
        }
        for (t, label) in labels.0.resolve(x, 6) {
            let px = f.px(t);
            self.line((px, f.top + f.height), (px, f.top + f.height + 4.0), "#333333", 0.8, None);
            self.text(px, f.top + f.height + 15.0, 10.0, "middle", &label);
        }
        if y.0 < 0.0 && y.1 > 0.0 {
            self.line((f.left, f.py(0.0)), (f.left + f.width, f.py(0.0)), "#888888", 0.8, None);
        }
        self.line((f.left, f.top + f.height), (f.left + f.width, f.top + f.height), "#333333", 1.0, None);
        self.line((f.left, f.top), (f.left, f.top + f.height), "#333333", 1.0, None);
        f
    }

    /// Legend entries stacked from `(x, y)`.
    pub fn legend(&mut self, x: f64, y: f64, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let yy = y + 14.0 * i as f64;
            self.rect(x, yy - 8.0, 10.0, 10.0, color, 1.0);
            self.text(x + 14.0, yy + 1.0, 10.0, "start", label);
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Five-number summary with whiskers at the most extreme points within
/// 1.5 IQR of the box.
pub fn box_stats(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| nml_core::series::percentile_sorted(&v, p);
    let (q1, med, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    let lo = v.iter().copied().find(|x| *x >= q1 - 1.5 * iqr).unwrap_or(v[0]);
    let hi = v.iter().rev().copied().find(|x| *x <= q3 + 1.5 * iqr).unwrap_or(v[v.len() - 1]);
    Some([lo, q1, med, q3, hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(-0.13, 0.42, 5);
        assert_eq!(t, vec![0.0, 0.2, 0.4]);
        assert_eq!(ticks(-0.13, 0.42, 10), vec![-0.1, 0.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(ticks(0.0, 7500.0, 3), vec![0.0, 2500.0, 5000.0, 7500.0]);
        assert_eq!(ticks(1.0, 1.0, 5), vec![1.0]);
    }

    #[test]
    fn escape_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn box_summary() {
        let v: Vec<f64> = (1..=9).map(f64::from).chain([100.0]).collect();
        let b = box_stats(&v).unwrap();
        assert_eq!(b[4], 9.0);
        assert_eq!(b[0], 1.0);
        assert!(box_stats(&[]).is_none());
    }

    #[test]
    fn canvas_is_well_formed() {
        let mut c = Canvas::new(200.0, 100.0);
        let f = c.panel((0.0, 0.0, 200.0, 100.0), "t", ((0.0, 1.0), (0.0, 1.0)), (Labels::Numeric, Labels::Numeric), 56.0);
        c.polyline(&f, &[(0.0, 0.0), (1.0, 1.0)], PALETTE[0], 1.0);
        let s = c.finish();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("<polyline"));
    }
}
