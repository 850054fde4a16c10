//! A minimal SVG line-chart writer: polylines, axis ticks, labels and a
//! rug of observation ticks along the bottom.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

pub struct Curve<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_range: (f64, f64),
    pub curves: Vec<Curve<'a>>,
    pub ticks: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

// a "nice" step near range/5
fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

impl Plot<'_> {
    pub fn render(&self) -> String {
        let (x0, x1) = self.x_range;
        let y_max = self
            .curves
            .iter()
            .flat_map(|c| c.ys.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        let y_step = nice_step(if y_max > 0.0 { y_max } else { 1.0 });
        let y1 = (y_max / y_step).ceil().max(1.0) * y_step;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - y / y1 * ph;

        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );

        // axes
        let _ = writeln!(
            out,
            r#"<g id="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#,
            TOP + ph,
            LEFT + pw,
            TOP + ph,
            TOP + ph
        );
        let x_step = nice_step(x1 - x0);
        let mut x = (x0 / x_step).ceil() * x_step;
        let _ = writeln!(out, r#"<g id="x-ticks">"#);
        while x <= x1 + 1e-12 {
            let px = sx(x);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                trim_number(x)
            );
            x += x_step;
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(out, r#"<g id="y-ticks">"#);
        let mut y = 0.0;
        while y <= y1 + 1e-12 {
            let py = sy(y);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                trim_number(y)
            );
            y += y_step;
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(self.y_label)
        );

        for (i, c) in self.curves.iter().enumerate() {
            let points: Vec<String> = c
                .xs
                .iter()
                .zip(c.ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline class="curve" fill="none" stroke="{}" stroke-width="1.6"{dash} points="{}"/>"#,
                escape(c.color),
                points.join(" ")
            );
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 180.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.6"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                escape(c.color),
                lx + 30.0,
                ly + 4.0,
                escape(c.label)
            );
        }

        let _ = writeln!(out, r#"<g id="observations" stroke="black">"#);
        for &t in self.ticks {
            let px = sx(t);
            let _ = writeln!(
                out,
                r#"<line class="tick" x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}"/>"#,
                TOP + ph,
                TOP + ph - 10.0
            );
        }
        let _ = writeln!(out, "</g>");
        out.push_str("</svg>\n");
        out
    }
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
