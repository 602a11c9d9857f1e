//! Minimal deterministic SVG charts. Coordinates are printed with two
//! decimals so the output depends only on the input data.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
/// Number of colored pieces a trajectory is split into.
const TIME_SEGMENTS: usize = 64;

/// Stops of a viridis-like map, early to late.
const COLORMAP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Distinct colors for separate series.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (COLORMAP.len() - 1) as f64;
    let i = (t.floor() as usize).min(COLORMAP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    out: String,
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, xs: (f64, f64), ys: (f64, f64)) -> Frame {
        let pad = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi - lo > 0.0 {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = pad(xs);
        let (y0, y1) = pad(ys);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            out,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        )
        .unwrap();
        let text = |out: &mut String, x: f64, y: f64, anchor: &str, s: &str| {
            writeln!(
                out,
                r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{}</text>"#,
                escape(s)
            )
            .unwrap();
        };
        text(&mut out, WIDTH / 2.0, MARGIN / 2.0, "middle", title);
        text(&mut out, WIDTH / 2.0, HEIGHT - 12.0, "middle", xlabel);
        text(&mut out, 12.0, HEIGHT / 2.0, "start", ylabel);
        text(&mut out, MARGIN, HEIGHT - MARGIN + 16.0, "start", &tick(x0));
        text(&mut out, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", &tick(x1));
        text(&mut out, MARGIN - 4.0, HEIGHT - MARGIN, "end", &tick(y0));
        text(&mut out, MARGIN - 4.0, MARGIN + 12.0, "end", &tick(y1));
        Frame { x0, x1, y0, y1, out }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&mut self, class: &str, color: &str, pts: &[(f64, f64)]) {
        let mut coords = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if i > 0 {
                coords.push(' ');
            }
            write!(coords, "{:.2},{:.2}", self.px(x), self.py(y)).unwrap();
        }
        writeln!(
            self.out,
            r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.2" points="{coords}"/>"#
        )
        .unwrap();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Projects rows of two or more coordinates to the plane. Three or more
/// coordinates use a fixed oblique view of the first three.
pub fn planar(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    rows.iter()
        .map(|r| match r.len() {
            0 => (0.0, 0.0),
            1 => (r[0], 0.0),
            2 => (r[0], r[1]),
            _ => (r[0] + 0.5 * r[2], r[1] + 0.35 * r[2]),
        })
        .collect()
}

/// A curve whose color runs from dark (early) to light (late).
pub fn trajectory(title: &str, points: &[(f64, f64)]) -> String {
    let mut f = Frame::new(
        title,
        "PC1",
        "PC2",
        range(points.iter().map(|p| p.0)),
        range(points.iter().map(|p| p.1)),
    );
    let n = points.len();
    if n >= 2 {
        let pieces = TIME_SEGMENTS.min(n - 1);
        for s in 0..pieces {
            let a = s * (n - 1) / pieces;
            let b = (s + 1) * (n - 1) / pieces;
            let color = colormap((s as f64 + 0.5) / pieces as f64);
            f.polyline("segment", &color, &points[a..=b]);
        }
    }
    f.finish()
}

/// Log-power spectrum with a dashed marker at each base frequency.
pub fn spectrum(title: &str, freqs: &[f64], power: &[f64], bases: &[f64]) -> String {
    let floor = power
        .iter()
        .skip(1)
        .copied()
        .filter(|p| *p > 0.0)
        .fold(f64::INFINITY, f64::min)
        .max(1e-300);
    let logp: Vec<(f64, f64)> = freqs
        .iter()
        .zip(power)
        .skip(1)
        .map(|(f, p)| (*f, p.max(floor).log10()))
        .collect();
    let mut f = Frame::new(
        title,
        "frequency",
        "log10 power",
        range(logp.iter().map(|p| p.0)),
        range(logp.iter().map(|p| p.1)),
    );
    f.polyline("series", PALETTE[0], &logp);
    let (top, bottom) = (f.py(f.y1), f.py(f.y0));
    for &b in bases {
        let x = f.px(b);
        writeln!(
            f.out,
            r#"<line class="base" x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="{}" stroke-dasharray="4 3"/>"#,
            PALETTE[1]
        )
        .unwrap();
    }
    f.finish()
}

/// One polyline per series against a shared x axis.
pub fn curves(title: &str, xlabel: &str, xs: &[f64], series: &[Vec<f64>]) -> String {
    let mut f = Frame::new(
        title,
        xlabel,
        "value",
        range(xs.iter().copied()),
        range(series.iter().flatten().copied()),
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(s.iter().copied()).collect();
        f.polyline("series", PALETTE[i % PALETTE.len()], &pts);
    }
    f.finish()
}
