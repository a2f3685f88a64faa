//! Static SVG figures.

use std::fmt::Write;

use crate::scalar::Real;
use crate::trainer::CurveRecord;
use crate::world::Trajectory;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        let _ = writeln!(out, r#"<text x="{l}" y="{}" font-size="10">{:.3}</text>"#, b + 14.0, self.x.0);
        let _ = writeln!(out, r#"<text x="{r}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, b + 14.0, self.x.1);
        let _ = writeln!(out, r#"<text x="{}" y="{b}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, self.y.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 10.0, self.y.1);
    }
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str, extra: &str) {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#,
        pts.join(" ")
    );
}

/// Loss against step, one line per curve; loss on a log10 axis.
pub fn curve_svg(curves: &[(String, Vec<CurveRecord<f64>>)]) -> String {
    let log = |v: f64| v.max(1e-300).log10();
    let frame = Frame::fit(
        curves.iter().flat_map(|(_, c)| c.iter().map(|r| r.step as f64)),
        curves.iter().flat_map(|(_, c)| c.iter().map(|r| log(r.loss))),
    );
    let mut out = open();
    frame.axes(&mut out, "step", "log10 loss");
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, curve.iter().map(|r| (frame.px(r.step as f64), frame.py(log(r.loss)))), color, "");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 4.0,
            MARGIN + 16.0 * (i + 1) as f64,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Expert paths as solid lines, predictions as circle markers, goals as crosses.
pub fn trajectory_svg<T: Real>(expert: &Trajectory<T>, predicted: Option<&Trajectory<T>>) -> String {
    let half = expert.world.arena_half_extent.as_f64();
    let frame = Frame {
        x: (-half, half),
        y: (-half, half),
    };
    let mut out = open();
    frame.axes(&mut out, "x [m]", "y [m]");
    if let Some(w) = &expert.world.wall {
        let (lo, hi) = w.faces(T::zero());
        let gap = (w.gap_center - w.gap_half_width, w.gap_center + w.gap_half_width);
        for (a, b) in [(-half, gap.0.as_f64()), (gap.1.as_f64(), half)] {
            let (x0, x1) = (frame.px(a), frame.px(b));
            let (y0, y1) = (frame.py(hi.as_f64()), frame.py(lo.as_f64()));
            let _ = writeln!(
                out,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#555"/>"##,
                x1 - x0,
                y1 - y0
            );
        }
    }
    for i in 0..expert.n() {
        let color = PALETTE[i % PALETTE.len()];
        let path = expert.path(i);
        polyline(
            &mut out,
            path.iter().map(|p| (frame.px(p[0].as_f64()), frame.py(p[1].as_f64()))),
            color,
            "",
        );
        if let Some(pred) = predicted {
            for p in pred.path(i) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="{color}"/>"#,
                    frame.px(p[0].as_f64()),
                    frame.py(p[1].as_f64())
                );
            }
        }
        if let Some(g) = expert.world.goals.get(i) {
            let (gx, gy) = (frame.px(g[0].as_f64()), frame.py(g[1].as_f64()));
            let _ = writeln!(
                out,
                r#"<path d="M{} {} L{} {} M{} {} L{} {}" stroke="{color}" stroke-width="2"/>"#,
                gx - 5.0,
                gy - 5.0,
                gx + 5.0,
                gy + 5.0,
                gx - 5.0,
                gy + 5.0,
                gx + 5.0,
                gy - 5.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
