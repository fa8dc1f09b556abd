//! Dependency-free SVG plots.
//!
//! Every byte is a pure function of the input data: no timestamps, no
//! randomness, fixed palettes, and coordinates rounded to two decimals.
//! Rendering the same data twice must produce identical files.

use std::fmt::Write as _;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Five-stop dark-to-bright ramp for heatmaps.
const RAMP: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct Figure {
    pub width: f64,
    pub height: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Figure {
        Figure {
            width: 640.0,
            height: 420.0,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y: false,
        }
    }

    pub fn log_y(mut self) -> Figure {
        self.log_y = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
    pub markers: bool,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Series {
        Series {
            label: label.into(),
            points,
            line: true,
            markers: false,
        }
    }

    pub fn scatter(label: &str, points: Vec<(f64, f64)>) -> Series {
        Series {
            label: label.into(),
            points,
            line: false,
            markers: true,
        }
    }
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick step of the form {1, 2, 5} x 10^k near `range / target`.
fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let factor = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    factor * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let step = nice_step(hi - lo, 5);
    let decimals = {
        let mut d = 0usize;
        let mut s = step;
        while d < 12 && (s - s.round()).abs() > 1e-9 * step.abs() {
            s *= 10.0;
            d += 1;
        }
        d
    };
    // Guard the divisions against cases like 1.0 / 0.2 = 4.999...
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last)
        .map(|k| {
            let v = k as f64 * step;
            (v, format!("{v:.decimals$}"))
        })
        .collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let first = lo.ceil() as i64;
    let last = hi.floor() as i64;
    (first..=last).map(|p| (p as f64, format!("1e{p}"))).collect()
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    /// Data range padded by 4%, degenerate ranges widened to unit size. Log
    /// axes work in log10 space and ignore non-positive values.
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if !v.is_finite() || (log && v <= 0.0) {
                continue;
            }
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            (lo, hi) = (0.0, 1.0);
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn place(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some(((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            log_ticks(self.lo, self.hi)
        } else {
            linear_ticks(self.lo, self.hi)
        }
    }
}

fn open_svg(out: &mut String, figure: &Figure) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
        w = px(figure.width),
        h = px(figure.height),
    );
    let _ = write!(
        out,
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        px(figure.width),
        px(figure.height)
    );
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        px(figure.width / 2.0),
        esc(&figure.title)
    );
}

fn draw_frame_and_axes(out: &mut String, figure: &Figure, x: &Axis, y: &Axis) {
    let plot_w = figure.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = figure.height - MARGIN_TOP - MARGIN_BOTTOM;
    for (v, label) in x.ticks() {
        let fx = MARGIN_LEFT + (v - x.lo) / (x.hi - x.lo) * plot_w;
        let _ = write!(
            out,
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"11\">{label}</text>\n",
            x = px(fx),
            y1 = px(MARGIN_TOP),
            y2 = px(MARGIN_TOP + plot_h),
            ty = px(MARGIN_TOP + plot_h + 16.0),
            label = if x.log { label } else { esc(&label) },
        );
    }
    for (v, label) in y.ticks() {
        let fy = MARGIN_TOP + (1.0 - (v - y.lo) / (y.hi - y.lo)) * plot_h;
        let _ = write!(
            out,
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\" font-size=\"11\">{label}</text>\n",
            y = px(fy),
            x1 = px(MARGIN_LEFT),
            x2 = px(MARGIN_LEFT + plot_w),
            tx = px(MARGIN_LEFT - 6.0),
            ty = px(fy + 4.0),
            label = esc(&label),
        );
    }
    let _ = write!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        px(MARGIN_LEFT),
        px(MARGIN_TOP),
        px(plot_w),
        px(plot_h)
    );
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        px(MARGIN_LEFT + plot_w / 2.0),
        px(figure.height - 12.0),
        esc(&figure.x_label)
    );
    let _ = write!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        px(MARGIN_TOP + plot_h / 2.0),
        px(MARGIN_TOP + plot_h / 2.0),
        esc(&figure.y_label)
    );
}

/// Line/scatter plot. Non-finite points are skipped; on a log axis,
/// non-positive values are clamped to the bottom edge so the series stays
/// visible.
pub fn line_plot(figure: &Figure, series: &[Series]) -> String {
    let x_axis = Axis::fit(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        false,
    );
    let y_axis = Axis::fit(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        figure.log_y,
    );
    let plot_w = figure.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = figure.height - MARGIN_TOP - MARGIN_BOTTOM;
    let place = |x: f64, y: f64| -> Option<(f64, f64)> {
        let fx = x_axis.place(x)?;
        // Clamp instead of dropping when only y is out of log range.
        let fy = y_axis.place(y).unwrap_or(0.0);
        Some((MARGIN_LEFT + fx * plot_w, MARGIN_TOP + (1.0 - fy) * plot_h))
    };

    let mut out = String::new();
    open_svg(&mut out, figure);
    draw_frame_and_axes(&mut out, figure, &x_axis, &y_axis);

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if s.line {
            let mut path = String::new();
            for &(x, y) in &s.points {
                if let Some((fx, fy)) = place(x, y) {
                    let _ = write!(path, "{},{} ", px(fx), px(fy));
                }
            }
            if !path.is_empty() {
                let _ = write!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    path.trim_end()
                );
            }
        }
        if s.markers {
            for &(x, y) in &s.points {
                if let Some((fx, fy)) = place(x, y) {
                    let _ = write!(
                        out,
                        "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                        px(fx),
                        px(fy)
                    );
                }
            }
        }
    }

    let labelled = series.iter().filter(|s| !s.label.is_empty()).count();
    if labelled > 0 {
        let mut ly = MARGIN_TOP + 14.0;
        for (si, s) in series.iter().enumerate() {
            if s.label.is_empty() {
                continue;
            }
            let color = PALETTE[si % PALETTE.len()];
            let lx = MARGIN_LEFT + plot_w - 150.0;
            let _ = write!(
                out,
                "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{tx}\" y=\"{ty}\" font-size=\"11\">{label}</text>\n",
                x1 = px(lx),
                x2 = px(lx + 18.0),
                y = px(ly),
                tx = px(lx + 24.0),
                ty = px(ly + 4.0),
                label = esc(&s.label),
            );
            ly += 16.0;
        }
    }

    out.push_str("</svg>\n");
    out
}

fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let seg = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - seg as f64;
    let (r0, g0, b0) = RAMP[seg];
    let (r1, g1, b1) = RAMP[seg + 1];
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r0, r1), mix(g0, g1), mix(b0, b1))
}

/// Log-compressed position of `v` inside [min, max]: 0 at the minimum, 1 at
/// the maximum, with three decades of visible dynamic range. Non-finite
/// values map to 1.
fn color_position(v: f64, min: f64, range: f64) -> f64 {
    if !v.is_finite() {
        return 1.0;
    }
    if range <= 0.0 {
        return 0.5;
    }
    let scale = range / 1e3;
    ((v - min) / scale).ln_1p() / (1e3f64).ln_1p()
}

/// Heatmap over a rectilinear grid, with an optional trajectory drawn on
/// top (white path and dots) and one highlighted point (white ring).
/// `values` is row-major over `xs` then `ys`.
pub fn heatmap_plot(
    figure: &Figure,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
    overlay: &[(f64, f64)],
    highlight: Option<(f64, f64)>,
) -> String {
    assert_eq!(values.len(), xs.len() * ys.len(), "grid shape mismatch");
    let plot_w = figure.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = figure.height - MARGIN_TOP - MARGIN_BOTTOM;
    let x_axis = Axis::fit(xs.iter().copied(), false);
    let y_axis = Axis::fit(ys.iter().copied(), false);

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min > max {
        (min, max) = (0.0, 1.0);
    }
    let range = max - min;

    // Cell edges sit halfway between neighbouring grid points.
    let edges = |grid: &[f64]| -> Vec<f64> {
        let n = grid.len();
        let mut e = Vec::with_capacity(n + 1);
        if n == 1 {
            e.push(grid[0] - 0.5);
            e.push(grid[0] + 0.5);
            return e;
        }
        e.push(grid[0] - 0.5 * (grid[1] - grid[0]));
        for i in 1..n {
            e.push(0.5 * (grid[i - 1] + grid[i]));
        }
        e.push(grid[n - 1] + 0.5 * (grid[n - 1] - grid[n - 2]));
        e
    };
    let x_edges = edges(xs);
    let y_edges = edges(ys);
    let fx = |v: f64| MARGIN_LEFT + (v - x_axis.lo) / (x_axis.hi - x_axis.lo) * plot_w;
    let fy = |v: f64| MARGIN_TOP + (1.0 - (v - y_axis.lo) / (y_axis.hi - y_axis.lo)) * plot_h;

    let mut out = String::new();
    open_svg(&mut out, figure);

    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = values[i * ys.len() + j];
            let color = ramp_color(color_position(v, min, range));
            let x0 = fx(x_edges[i]);
            let x1 = fx(x_edges[i + 1]);
            let y0 = fy(y_edges[j + 1]);
            let y1 = fy(y_edges[j]);
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
                px(x0),
                px(y0),
                px(x1 - x0),
                px(y1 - y0),
            );
        }
    }

    if !overlay.is_empty() {
        let mut path = String::new();
        for &(x, y) in overlay {
            let _ = write!(path, "{},{} ", px(fx(x)), px(fy(y)));
        }
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1.2\"/>\n",
            path.trim_end()
        );
        for &(x, y) in overlay {
            let _ = write!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.2\" fill=\"#ffffff\"/>\n",
                px(fx(x)),
                px(fy(y))
            );
        }
    }
    if let Some((x, y)) = highlight {
        let _ = write!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"2\"/>\n",
            px(fx(x)),
            px(fy(y))
        );
    }

    draw_frame_and_axes(&mut out, figure, &x_axis, &y_axis);
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">J in [{:.3e}, {:.3e}]</text>\n",
        px(MARGIN_LEFT),
        px(MARGIN_TOP - 6.0),
        min,
        max
    );
    out.push_str("</svg>\n");
    out
}

/// Tiles equally sized child SVGs into a grid, left to right then down.
pub fn panel(cells: &[String], cols: usize, cell_w: f64, cell_h: f64) -> String {
    assert!(cols > 0, "panel needs at least one column");
    let rows = cells.len().div_ceil(cols);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n",
        w = px(cols as f64 * cell_w),
        h = px(rows as f64 * cell_h),
    );
    for (k, cell) in cells.iter().enumerate() {
        let x = (k % cols) as f64 * cell_w;
        let y = (k / cols) as f64 * cell_h;
        out.push_str(&cell.replacen(
            "<svg ",
            &format!("<svg x=\"{}\" y=\"{}\" ", px(x), px(y)),
            1,
        ));
    }
    out.push_str("</svg>\n");
    out
}
