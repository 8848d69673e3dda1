//! Minimal SVG rendering for the entropy curve and volume histograms.

use std::fmt::Write;

use crate::io::Histogram;
use crate::kselect::{EntropyCurve, SegmentedFit};

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xlim: (f64, f64),
    ylim: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let (a, b) = self.xlim;
        self.x0 + (v - a) / (b - a) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        let (a, b) = self.ylim;
        self.y0 + self.h - (v - a) / (b - a) * self.h
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x1, y1) = (self.x0 + self.w, self.y0 + self.h);
        let _ = write!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            self.x0, self.y0, self.w, self.h
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{xlabel}</text>"#,
            self.x0 + self.w / 2.0,
            y1 + 30.0
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{ylabel}</text>"#,
            self.x0 - 34.0,
            self.y0 + self.h / 2.0,
            self.x0 - 34.0,
            self.y0 + self.h / 2.0
        );
        for (v, anchor, x, y) in [
            (self.xlim.0, "start", self.x0, y1 + 14.0),
            (self.xlim.1, "end", x1, y1 + 14.0),
            (self.ylim.0, "end", self.x0 - 4.0, y1),
            (self.ylim.1, "end", self.x0 - 4.0, self.y0 + 8.0),
        ] {
            let _ =
                write!(out, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="10">{}</text>"#, tick(v));
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn header(w: f64, h: f64) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}"><rect width="100%" height="100%" fill="white"/>"#
    )
}

/// Entropy against K, with the fitted segmented line and the changepoint.
pub fn entropy_svg(curve: &EntropyCurve, fit: Option<&SegmentedFit>) -> String {
    let mut out = header(W, H);
    let xs = curve.ks.iter().map(|&k| k as f64);
    let frame = Frame {
        x0: MARGIN,
        y0: 16.0,
        w: W - MARGIN - 16.0,
        h: H - 16.0 - MARGIN,
        xlim: range(xs.clone()),
        ylim: range(curve.entropies.iter().copied()),
    };
    frame.axes(&mut out, "K", "entropy");
    for (k, e) in xs.zip(&curve.entropies) {
        let _ = write!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="black"/>"#, frame.x(k), frame.y(*e));
    }
    if let Some(f) = fit {
        let (a, b) = frame.xlim;
        let line = |x: f64| f.beta + f.gamma * (x - f.psi).min(0.0);
        let pts = [a, f.psi.clamp(a, b), b]
            .iter()
            .map(|&x| format!("{:.1},{:.1}", frame.x(x), frame.y(line(x).clamp(frame.ylim.0, frame.ylim.1))))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = write!(out, r#"<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
        let px = frame.x(f.psi);
        let _ = write!(
            out,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="firebrick" stroke-dasharray="4 3"/><text x="{:.1}" y="{:.1}" font-size="11" fill="firebrick">K = {}</text>"#,
            frame.y0,
            frame.y0 + frame.h,
            px + 4.0,
            frame.y0 + 12.0,
            f.k_hat
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One panel per histogram, laid out in rows of three.
pub fn histograms_svg(hists: &[Histogram]) -> String {
    let cols = hists.len().clamp(1, 3);
    let rows = hists.len().div_ceil(cols).max(1);
    let (pw, ph) = (W * 0.75, H * 0.75);
    let mut out = header(pw * cols as f64, ph * rows as f64);
    for (i, h) in hists.iter().enumerate() {
        let (cx, cy) = ((i % cols) as f64 * pw, (i / cols) as f64 * ph);
        let max = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let frame = Frame {
            x0: cx + MARGIN,
            y0: cy + 20.0,
            w: pw - MARGIN - 12.0,
            h: ph - 20.0 - MARGIN,
            xlim: (h.edges[0], *h.edges.last().unwrap_or(&1.0)),
            ylim: (0.0, max),
        };
        frame.axes(&mut out, "volume", "count");
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">K = {}</text>"#,
            frame.x0 + frame.w / 2.0,
            cy + 14.0,
            h.k
        );
        for (b, &c) in h.counts.iter().enumerate() {
            let (xa, xb) = (frame.x(h.edges[b]), frame.x(h.edges[b + 1]));
            let top = frame.y(c as f64);
            let _ = write!(
                out,
                r#"<rect x="{xa:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="lightgray" stroke="gray" stroke-width="0.5"/>"#,
                (xb - xa).max(0.0),
                frame.y0 + frame.h - top
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
