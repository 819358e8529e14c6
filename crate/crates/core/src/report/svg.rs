//! Minimal static SVG writer: axes, points, lines and labels only.

use super::fixed;

fn n(v: f64) -> String {
    fixed(v, 2)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub(crate) struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>\n",
            n(x1),
            n(y1),
            n(x2),
            n(y2),
            n(width)
        ));
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" fill-opacity=\"0.8\"/>\n",
            n(cx),
            n(cy),
            n(r)
        ));
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.body.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"#333333\"/>\n",
            n(x),
            n(y),
            n(w),
            n(h)
        ));
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", n(*x), n(*y))).collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str, opacity: f64) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", n(*x), n(*y))).collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
            pts.join(" "),
            n(opacity)
        ));
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, text: &str) {
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"{}\">{}</text>\n",
            n(x),
            n(y),
            n(size),
            escape(text)
        ));
    }

    pub fn rotated_text(&mut self, x: f64, y: f64, size: f64, text: &str) {
        self.body.push_str(&format!(
            "<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"{2}\" transform=\"rotate(-90 {0} {1})\">{3}</text>\n",
            n(x),
            n(y),
            n(size),
            escape(text)
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{2}</svg>\n",
            n(self.width),
            n(self.height),
            self.body
        )
    }
}

/// Maps a data window onto a pixel rectangle.
pub(crate) struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        let span = self.x.1 - self.x.0;
        self.left + if span == 0.0 { 0.5 } else { (x - self.x.0) / span } * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        let span = self.y.1 - self.y.0;
        self.top + self.height - if span == 0.0 { 0.5 } else { (y - self.y.0) / span } * self.height
    }

    pub fn axes(&self, svg: &mut Svg, xticks: &[(f64, String)], yticks: &[(f64, String)], xlabel: &str, ylabel: &str) {
        let bottom = self.top + self.height;
        svg.line(self.left, bottom, self.left + self.width, bottom, "#000000", 1.0);
        svg.line(self.left, self.top, self.left, bottom, "#000000", 1.0);
        for (v, label) in xticks {
            let x = self.px(*v);
            svg.line(x, bottom, x, bottom + 4.0, "#000000", 1.0);
            svg.text(x, bottom + 16.0, "middle", 10.0, label);
        }
        for (v, label) in yticks {
            let y = self.py(*v);
            svg.line(self.left - 4.0, y, self.left, y, "#000000", 1.0);
            svg.text(self.left - 6.0, y + 3.0, "end", 10.0, label);
        }
        svg.text(self.left + self.width / 2.0, bottom + 34.0, "middle", 12.0, xlabel);
        svg.rotated_text(self.left - 42.0, self.top + self.height / 2.0, 12.0, ylabel);
    }
}

/// Evenly spaced ticks over `[lo, hi]`.
pub(crate) fn ticks(lo: f64, hi: f64, count: usize, places: usize) -> Vec<(f64, String)> {
    if count < 2 || hi <= lo {
        return vec![(lo, fixed(lo, places))];
    }
    (0..count)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            (v, fixed(v, places))
        })
        .collect()
}

/// Red for negative, blue for positive, paler towards zero.
pub(crate) fn diverging(value: f64, max_abs: f64) -> String {
    let t = if max_abs > 0.0 { (value.abs() / max_abs).min(1.0) } else { 0.0 };
    let fade = (255.0 - 175.0 * t).round() as u8;
    if value < 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

/// Padded data range that is never empty.
pub(crate) fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}
