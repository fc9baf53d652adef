//! Minimal SVG scatter and line charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo == hi {
                (lo - 1.0, hi + 1.0)
            } else {
                (lo, hi)
            }
        };
        Self { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none"><path d="M{l} {t} L{l} {b} L{r} {b}"/></g>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for (v, anchor, x, y) in [
        (f.x.0, "start", l, b + 16.0),
        (f.x.1, "end", r, b + 16.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    for (v, y) in [(f.y.0, b), (f.y.1, t + 4.0)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, l - 4.0, tick(v));
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter plot; `labels[i] == None` marks an outlier drawn as a cross.
pub fn scatter(points: &[(f64, f64)], labels: &[Option<usize>], title: &str, axes: (&str, &str)) -> String {
    let f = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title, &f, axes.0, axes.1);
    let _ = writeln!(out, r#"<g class="points">"#);
    for (&(x, y), label) in points.iter().zip(labels) {
        let (cx, cy) = (f.px(x), f.py(y));
        match label {
            Some(c) => {
                let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}"/>"#, color(*c));
            }
            None => {
                let _ = writeln!(
                    out,
                    r#"<path class="outlier" d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="black"/>"#,
                    cx - 3.0,
                    cy - 3.0,
                    cx + 3.0,
                    cy + 3.0,
                    cx - 3.0,
                    cy + 3.0,
                    cx + 3.0,
                    cy - 3.0
                );
            }
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// One polyline per series over shared x values.
pub fn lines(x: &[f64], series: &[(String, Vec<f64>)], title: &str, axes: (&str, &str)) -> String {
    let ys = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let f = Frame::new(x.iter().copied(), ys);
    let mut out = String::new();
    header(&mut out, title, &f, axes.0, axes.1);
    for (i, (name, values)) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(values)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            color(i),
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            WIDTH - MARGIN + 4.0 - 120.0,
            MARGIN + 14.0 * i as f64,
            color(i),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn scatter_marks_outliers() {
        let s = scatter(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)], &[Some(0), None, Some(1)], "t", ("x", "y"));
        assert_eq!(s.matches("class=\"outlier\"").count(), 1);
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
