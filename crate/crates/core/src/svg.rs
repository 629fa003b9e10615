//! Minimal deterministic SVG writer shared by scene renders and stats charts.

use std::fmt::Write;

pub struct SvgDoc {
    body: String,
    width: f64,
    height: f64,
}

/// Numbers are written in shortest round-trip form so output bytes depend
/// only on the values.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        SvgDoc { body: String::new(), width, height }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"{}{}/>"#,
            num(x),
            num(y),
            num(w),
            num(h),
            fill,
            if extra.is_empty() { "" } else { " " },
            extra
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#, num(cx), num(cy), num(r), fill);
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2),
            stroke
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" text-anchor="{}" font-family="sans-serif">{}</text>"#,
            num(x),
            num(y),
            num(size),
            anchor,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = num(self.width),
            h = num(self.height)
        )
    }
}

/// Vertical bar chart with values in [0, 1].
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (50.0, 20.0, 40.0, 70.0);
    let mut doc = SvgDoc::new(w, h);
    doc.rect(0.0, 0.0, w, h, "white", "");
    doc.text(w / 2.0, 24.0, 16.0, "middle", title);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let ymax = values.iter().cloned().fold(0.0_f64, f64::max).max(1e-9);
    doc.line(left, top + plot_h, left + plot_w, top + plot_h, "black");
    doc.line(left, top, left, top + plot_h, "black");
    doc.text(left - 6.0, top + 4.0, 10.0, "end", &format!("{:.3}", ymax));
    doc.text(left - 6.0, top + plot_h, 10.0, "end", "0");
    let n = values.len().max(1) as f64;
    let slot = plot_w / n;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let bh = plot_h * v / ymax;
        let x = left + slot * i as f64 + slot * 0.15;
        doc.rect(x, top + plot_h - bh, slot * 0.7, bh, "steelblue", "");
        doc.text(x + slot * 0.35, top + plot_h + 14.0, 9.0, "middle", label);
    }
    doc.finish()
}

/// Scatter of points in scene coordinates, coloured by class.
pub fn scatter_chart(title: &str, points: &[(f64, f64, bool)], width: f64, height: f64) -> String {
    let mut doc = SvgDoc::new(width, height + 30.0);
    doc.rect(0.0, 0.0, width, height + 30.0, "white", "");
    doc.text(width / 2.0, 20.0, 14.0, "middle", title);
    doc.rect(0.0, 30.0, width, height, "none", r#"stroke="black""#);
    for &(x, y, positive) in points {
        doc.circle(x, y + 30.0, 2.5, if positive { "crimson" } else { "gray" });
    }
    doc.finish()
}
