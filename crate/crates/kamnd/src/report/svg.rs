//! Minimal self-contained SVG writer for 2-d plots over a region.

use std::fmt::Write;

use super::config::RunConfig;
use crate::hamiltonian::Region;

const MARGIN: f64 = 56.0;
const BAR: f64 = 90.0;

/// Maps action coordinates of a 2-d region to pixels (x1 right, x2 up).
pub struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
    w: f64,
    h: f64,
}

impl Frame {
    /// Frame whose longer side is `size` pixels, keeping the aspect ratio.
    pub fn new(region: &Region, size: f64) -> Self {
        let (wx, wy) = (region.width(0), region.width(1));
        let (w, h) = if wx >= wy {
            (size, (size * wy / wx).max(size / 8.0))
        } else {
            ((size * wx / wy).max(size / 8.0), size)
        };
        Frame {
            lo: [region.lo(0), region.lo(1)],
            hi: [region.hi(0), region.hi(1)],
            w,
            h,
        }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = |v: f64, a: usize, len: f64| {
            let span = self.hi[a] - self.lo[a];
            if span > 0.0 {
                (v - self.lo[a]) / span * len
            } else {
                0.5 * len
            }
        };
        (MARGIN + sx(p[0], 0, self.w), MARGIN + self.h - sx(p[1], 1, self.h))
    }
}

/// Colour for `log10(margin)` on `[-12, 0]`; NaN is light grey.
pub fn heat_color(margin: f64) -> String {
    if margin.is_nan() {
        return "#dddddd".into();
    }
    let l = if margin > 0.0 { margin.log10() } else { -12.0 };
    let t = ((l + 12.0) / 12.0).clamp(0.0, 1.0);
    ramp(t)
}

// dark purple through teal to yellow, quantized to 48 levels
fn ramp(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = (t * 47.0).round() / 47.0;
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub struct Svg<'a> {
    frame: &'a Frame,
    title: String,
    body: String,
    overlay: String,
    extra_width: f64,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl<'a> Svg<'a> {
    pub fn new(frame: &'a Frame, title: &str) -> Self {
        Svg {
            frame,
            title: title.to_string(),
            body: String::new(),
            overlay: String::new(),
            extra_width: 0.0,
        }
    }

    pub fn rect(&mut self, lo: [f64; 2], hi: [f64; 2], fill: &str) {
        let (x0, y1) = self.frame.px(lo);
        let (x1, y0) = self.frame.px(hi);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            // overlap by a hair so runs leave no seams
            (x1 - x0) + 0.3,
            (y1 - y0) + 0.3
        );
    }

    pub fn outline(&mut self, lo: [f64; 2], hi: [f64; 2], stroke: &str, width: f64) {
        let (x0, y1) = self.frame.px(lo);
        let (x1, y0) = self.frame.px(hi);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{stroke}" stroke-width="{width:.2}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn polyline(&mut self, points: &[[f64; 2]], stroke: &str, width: f64) {
        if points.len() < 2 {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.frame.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width:.3}" stroke-linejoin="round"/>"#,
            pts.join(" ")
        );
    }

    pub fn fill_region(&mut self, fill: &str, opacity: f64) {
        let (x0, y1) = self.frame.px(self.frame.lo);
        let (x1, y0) = self.frame.px(self.frame.hi);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity:.2}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    /// Vertical colour bar for `log10` values in `[lo, hi]`.
    pub fn colour_bar(&mut self, lo: f64, hi: f64) {
        let x = MARGIN + self.frame.w + 24.0;
        let h = self.frame.h;
        let steps = 48;
        for s in 0..steps {
            let t = (s as f64 + 0.5) / steps as f64;
            let y = MARGIN + h * (1.0 - (s + 1) as f64 / steps as f64);
            let _ = writeln!(
                self.overlay,
                r#"<rect x="{x:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
                h / steps as f64 + 0.3,
                ramp(t)
            );
        }
        for (v, y) in [(hi, MARGIN + 4.0), (lo, MARGIN + h)] {
            let _ = writeln!(
                self.overlay,
                r#"<text x="{:.2}" y="{y:.2}" font-size="11">{v}</text>"#,
                x + 20.0
            );
        }
        self.extra_width = BAR;
    }

    fn axes(&self) -> String {
        let f = self.frame;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
            f.w, f.h
        );
        let ticks = [
            (f.lo[0], MARGIN, MARGIN + f.h + 16.0, "middle"),
            (f.hi[0], MARGIN + f.w, MARGIN + f.h + 16.0, "middle"),
        ];
        for (v, x, y, anchor) in ticks {
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" font-size="11" text-anchor="{anchor}">{v}</text>"#);
        }
        for (v, y) in [(f.lo[1], MARGIN + f.h), (f.hi[1], MARGIN + 4.0)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end">{v}</text>"#, MARGIN - 6.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">ξ1</text>"#,
            MARGIN + f.w / 2.0,
            MARGIN + f.h + 34.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">ξ2</text>"#,
            MARGIN - 30.0,
            MARGIN + f.h / 2.0,
            MARGIN - 30.0,
            MARGIN + f.h / 2.0
        );
        s
    }

    /// Complete document, with the resolved configuration as metadata.
    pub fn finish(self, config: &RunConfig) -> String {
        let width = 2.0 * MARGIN + self.frame.w + self.extra_width;
        let height = 2.0 * MARGIN + self.frame.h;
        let meta = serde_json::to_string(config).expect("config serializes");
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}" font-family="sans-serif">"#,
                "\n<metadata>{meta}</metadata>\n",
                r##"<rect width="100%" height="100%" fill="#ffffff"/>"##,
                "\n<text x=\"{m}\" y=\"{ty}\" font-size=\"13\">{title}</text>\n",
                "<defs><clipPath id=\"plot\"><rect x=\"{m}\" y=\"{m}\" width=\"{pw:.2}\" height=\"{ph:.2}\"/></clipPath></defs>\n",
                "<g clip-path=\"url(#plot)\">\n{body}</g>\n{overlay}{axes}</svg>\n"
            ),
            w = width,
            h = height,
            meta = esc(&meta),
            m = MARGIN,
            ty = MARGIN - 16.0,
            title = esc(&self.title),
            pw = self.frame.w,
            ph = self.frame.h,
            body = self.body,
            overlay = self.overlay,
            axes = self.axes(),
        )
    }
}
