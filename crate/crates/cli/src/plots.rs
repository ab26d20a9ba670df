//! Self-contained SVG charts: ICC grids, the test information curve with its
//! standard error, and predicted-versus-observed scatter plots.

use std::fmt::Write as _;

use psychfit_core::irt::{icc, theta_grid, ItemParams, TestInformation};

pub const THETA_RANGE: (f64, f64) = (-4.0, 4.0);
pub const CURVE_SAMPLES: usize = 161;

const PANEL_W: f64 = 160.0;
const PANEL_H: f64 = 120.0;
const MARGIN: f64 = 24.0;

/// Linear map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub px_lo: f64,
    pub px_hi: f64,
}

impl Axis {
    pub fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn polyline(xs: &[f64], ys: &[f64], x: Axis, y: Axis) -> String {
    let mut d = String::new();
    for (i, (&a, &b)) in xs.iter().zip(ys).enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(d, "{cmd}{:.3},{:.3} ", x.map(a), y.map(b)).unwrap();
    }
    d.pop();
    d
}

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" \
         font-family=\"sans-serif\" font-size=\"10\">\n<title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Panel-local axes for the ICC grid cell at (`col`, `row`).
pub fn icc_axes(col: usize, row: usize) -> (Axis, Axis) {
    let x0 = MARGIN + col as f64 * (PANEL_W + MARGIN);
    let y0 = MARGIN + row as f64 * (PANEL_H + MARGIN);
    (
        Axis { lo: THETA_RANGE.0, hi: THETA_RANGE.1, px_lo: x0, px_hi: x0 + PANEL_W },
        Axis { lo: 0.0, hi: 1.0, px_lo: y0 + PANEL_H, px_hi: y0 },
    )
}

/// One panel per item, curves sampled at 161 points over θ ∈ [−4, 4].
pub fn icc_grid_svg(title: &str, item_ids: &[String], items: &[ItemParams]) -> String {
    let cols = (items.len() as f64).sqrt().ceil().max(1.0) as usize;
    let rows = items.len().div_ceil(cols).max(1);
    let w = MARGIN + cols as f64 * (PANEL_W + MARGIN);
    let h = MARGIN + rows as f64 * (PANEL_H + MARGIN);
    let thetas = theta_grid(THETA_RANGE.0, THETA_RANGE.1, CURVE_SAMPLES);
    let mut svg = header(w, h, title);
    for (k, (id, p)) in item_ids.iter().zip(items).enumerate() {
        let (x, y) = icc_axes(k % cols, k / cols);
        let probs: Vec<f64> = thetas.iter().map(|&t| icc(p, t)).collect();
        writeln!(
            svg,
            "<g class=\"item\" data-item=\"{}\">\n<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{PANEL_W:.3}\" height=\"{PANEL_H:.3}\" fill=\"none\" stroke=\"#999\"/>",
            escape(id),
            x.px_lo,
            y.px_hi
        )
        .unwrap();
        writeln!(
            svg,
            "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#ddd\"/>",
            x.px_lo,
            y.map(0.5),
            x.px_hi,
            y.map(0.5)
        )
        .unwrap();
        writeln!(svg, "<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>", polyline(&thetas, &probs, x, y))
            .unwrap();
        writeln!(svg, "<text x=\"{:.3}\" y=\"{:.3}\">{} (a={:.3}, b={:.3}, c={:.3})</text>\n</g>", x.px_lo + 2.0, y.px_hi - 4.0, escape(id), p.a, p.b, p.c)
            .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

const PLOT_W: f64 = 520.0;
const PLOT_H: f64 = 320.0;
const PAD: f64 = 48.0;

fn nice_max(v: f64) -> f64 {
    if !(v.is_finite() && v > 0.0) {
        return 1.0;
    }
    (v * 1.1 * 10.0).ceil() / 10.0
}

/// Axes of the information plot: θ horizontally, information on the left
/// scale; the SE curve uses its own right-hand scale.
pub fn tif_axes(info: &TestInformation) -> (Axis, Axis, Axis) {
    let x = Axis { lo: info.points[0].theta, hi: info.points[info.points.len() - 1].theta, px_lo: PAD, px_hi: PLOT_W - PAD };
    let info_max = nice_max(info.points.iter().map(|p| p.information).fold(0.0, f64::max));
    let y = Axis { lo: 0.0, hi: info_max, px_lo: PLOT_H - PAD, px_hi: PAD / 2.0 };
    let se_max = nice_max(info.points.iter().map(|p| p.se).filter(|s| s.is_finite()).fold(0.0, f64::max).min(10.0));
    let se = Axis { lo: 0.0, hi: se_max, px_lo: PLOT_H - PAD, px_hi: PAD / 2.0 };
    (x, y, se)
}

/// Test information and standard error, with the information peak marked.
pub fn tif_svg(info: &TestInformation) -> String {
    let (x, y, se_axis) = tif_axes(info);
    let thetas: Vec<f64> = info.points.iter().map(|p| p.theta).collect();
    let values: Vec<f64> = info.points.iter().map(|p| p.information).collect();
    let ses: Vec<f64> = info.points.iter().map(|p| p.se.min(se_axis.hi)).collect();
    let mut svg = header(PLOT_W, PLOT_H, "Test information function");
    axes_frame(&mut svg, x, y, "θ", "information");
    writeln!(svg, "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">SE (max {:.3})</text>", PLOT_W - 4.0, PAD / 2.0 - 6.0, se_axis.hi).unwrap();
    writeln!(svg, "<path class=\"information\" d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>", polyline(&thetas, &values, x, y))
        .unwrap();
    writeln!(
        svg,
        "<path class=\"se\" d=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>",
        polyline(&thetas, &ses, x, se_axis)
    )
    .unwrap();
    writeln!(
        svg,
        "<circle class=\"peak\" data-theta=\"{}\" data-information=\"{}\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"#1f77b4\"/>",
        info.peak_theta,
        info.peak_value,
        x.map(info.peak_theta),
        y.map(info.peak_value)
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\">peak {:.3} at θ = {:.3}</text>",
        x.map(info.peak_theta) + 6.0,
        y.map(info.peak_value) - 6.0,
        info.peak_value,
        info.peak_theta
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

fn axes_frame(svg: &mut String, x: Axis, y: Axis, xlabel: &str, ylabel: &str) {
    writeln!(
        svg,
        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"#999\"/>",
        x.px_lo,
        y.px_hi,
        x.px_hi - x.px_lo,
        y.px_lo - y.px_hi
    )
    .unwrap();
    for (v, anchor) in [(x.lo, "start"), (x.hi, "end")] {
        writeln!(svg, "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"{anchor}\">{:.3}</text>", x.map(v), y.px_lo + 14.0, v).unwrap();
    }
    for v in [y.lo, y.hi] {
        writeln!(svg, "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{:.3}</text>", x.px_lo - 4.0, y.map(v) + 3.0, v).unwrap();
    }
    writeln!(svg, "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\">{}</text>", (x.px_lo + x.px_hi) / 2.0, y.px_lo + 30.0, escape(xlabel))
        .unwrap();
    writeln!(svg, "<text x=\"12\" y=\"{:.3}\" transform=\"rotate(-90 12 {:.3})\" text-anchor=\"middle\">{}</text>", (y.px_lo + y.px_hi) / 2.0, (y.px_lo + y.px_hi) / 2.0, escape(ylabel))
        .unwrap();
}

/// Fitted against observed values, with the identity line.
pub fn pred_vs_obs_svg(observed: &[f64], fitted: &[f64]) -> String {
    let all = observed.iter().chain(fitted).copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !(lo < hi) {
        (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = Axis { lo, hi, px_lo: PAD, px_hi: PLOT_W - PAD };
    let y = Axis { lo, hi, px_lo: PLOT_H - PAD, px_hi: PAD / 2.0 };
    let mut svg = header(PLOT_W, PLOT_H, "Predicted versus observed");
    axes_frame(&mut svg, x, y, "predicted", "observed");
    writeln!(
        svg,
        "<line class=\"identity\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
        x.map(lo),
        y.map(lo),
        x.map(hi),
        y.map(hi)
    )
    .unwrap();
    for (o, f) in observed.iter().zip(fitted) {
        writeln!(svg, "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>", x.map(*f), y.map(*o)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icc_path_passes_through_midpoint() {
        let svg = icc_grid_svg("t", &["q1".into()], &[ItemParams::two_pl(1.0, 0.0)]);
        let (x, y) = icc_axes(0, 0);
        let point = format!("{:.3},{:.3}", x.map(0.0), y.map(0.5));
        assert!(svg.contains(&format!("L{point}")), "{point} missing");
        let path = svg.lines().find(|l| l.starts_with("<path")).unwrap();
        assert_eq!(path.matches(['M', 'L']).count(), CURVE_SAMPLES);
    }

    #[test]
    fn tif_marker_carries_exact_peak() {
        let items = [ItemParams::two_pl(1.2, -0.8), ItemParams::two_pl(0.9, -0.5)];
        let thetas = theta_grid(-4.0, 4.0, 161);
        let info = TestInformation::from_items(&items, &thetas);
        let svg = tif_svg(&info);
        let tag = svg.lines().find(|l| l.contains("class=\"peak\"")).unwrap();
        let theta: f64 = tag.split("data-theta=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
        assert_eq!(theta, info.peak_theta);
        assert_eq!(tif_svg(&info), svg);
    }

    #[test]
    fn scatter_handles_constant_values() {
        let svg = pred_vs_obs_svg(&[1.0, 1.0], &[1.0, 1.0]);
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
