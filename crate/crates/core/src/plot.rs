//! Minimal SVG scatter plots of real vs generated samples.
//!
//! One-dimensional data is drawn as two horizontal strips (real above,
//! generated below) with centers as vertical ticks.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

pub struct Scatter<'a> {
    pub real: &'a Matrix,
    pub generated: &'a Matrix,
    pub centers: &'a Matrix,
    pub title: String,
}

struct Frame {
    lo: [f64; 2],
    span: f64,
}

impl Frame {
    fn fit(mats: &[&Matrix]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for m in mats {
            for row in m.iter_rows() {
                for (j, &v) in row.iter().enumerate().take(2) {
                    if v.is_finite() {
                        lo[j] = lo[j].min(v);
                        hi[j] = hi[j].max(v);
                    }
                }
            }
        }
        for j in 0..2 {
            if !lo[j].is_finite() {
                lo[j] = -1.0;
                hi[j] = 1.0;
            }
        }
        // Square frame so the ring stays round.
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        Frame {
            lo: [mid[0] - span / 2.0, mid[1] - span / 2.0],
            span,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let inner = SIZE - 2.0 * MARGIN;
        (
            MARGIN + (x - self.lo[0]) / self.span * inner,
            SIZE - MARGIN - (y - self.lo[1]) / self.span * inner,
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Scatter<'_> {
    pub fn to_svg(&self) -> Result<String> {
        let dim = self.real.cols();
        if !(dim == 1 || dim == 2) || self.generated.cols() != dim || self.centers.cols() != dim {
            return Err(Error::Shape(format!(
                "scatter needs matching 1D or 2D inputs, got {}/{}/{} columns",
                self.real.cols(),
                self.generated.cols(),
                self.centers.cols()
            )));
        }
        // Lift 1D data onto fixed heights.
        let lift = |m: &Matrix, y: f64| -> Matrix {
            if dim == 2 {
                m.clone()
            } else {
                Matrix::from_fn(m.rows(), 2, |i, j| if j == 0 { m.get(i, 0) } else { y })
            }
        };
        let (real, generated, centers) = (
            lift(self.real, 0.5),
            lift(self.generated, -0.5),
            lift(self.centers, 0.0),
        );
        let frame = if dim == 2 {
            Frame::fit(&[&real, &generated, &centers])
        } else {
            let mut f = Frame::fit(&[&real, &generated]);
            f.lo[1] = -f.span / 2.0;
            f
        };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="16" font-family="monospace" font-size="12">{}</text>"#,
            xml_escape(&self.title)
        );
        for (m, class, color) in [(&real, "real", "#9a9a9a"), (&generated, "generated", "#1f6fd1")] {
            let _ = writeln!(svg, r#"<g class="{class}" fill="{color}" fill-opacity="0.6">"#);
            for row in m.iter_rows() {
                if row.iter().all(|v| v.is_finite()) {
                    let (x, y) = frame.px(row[0], row[1]);
                    let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6"/>"#);
                }
            }
            let _ = writeln!(svg, "</g>");
        }
        let _ = writeln!(svg, r##"<g class="centers" stroke="#d1261f" stroke-width="2">"##);
        for row in centers.iter_rows() {
            let (x, y) = frame.px(row[0], row[1]);
            let _ = writeln!(
                svg,
                r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}"/>"#,
                x - 5.0,
                y - 5.0,
                x + 5.0,
                y + 5.0,
                x - 5.0,
                y + 5.0,
                x + 5.0,
                y - 5.0
            );
        }
        let _ = writeln!(svg, "</g>\n</svg>");
        Ok(svg)
    }
}
