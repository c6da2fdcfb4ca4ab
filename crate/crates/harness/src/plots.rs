//! Minimal SVG charts, each with a CSV twin holding the plotted numbers.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 8] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"];

/// One x-axis group of a grouped bar chart: `(mean, spread)` per series.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub values: Vec<(f64, f64)>,
}

/// `(x, y, half-width of the shaded band)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    )
}

fn legend(out: &mut String, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let y = TOP + 16.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>", y, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{}</text>", x + 14.0, y + 9.0, escape(n));
    }
}

/// Maps data values to pixel rows, linearly or on a log10 scale.
struct YAxis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl YAxis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let vals: Vec<f64> = values.filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
        let (mut lo, mut hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if vals.is_empty() {
            (lo, hi) = if log { (1.0, 10.0) } else { (0.0, 1.0) };
        }
        if log {
            lo = lo.log10().floor();
            hi = hi.log10().ceil().max(lo + 1.0);
        } else {
            lo = lo.min(0.0);
            hi = if hi > lo { hi * 1.05 } else { lo + 1.0 };
        }
        YAxis { lo, hi, log }
    }

    fn px(&self, v: f64) -> f64 {
        let t = if self.log { v.max(10f64.powf(self.lo)).log10() } else { v };
        let frac = ((t - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        H - BOTTOM - frac * (H - TOP - BOTTOM)
    }

    fn draw(&self, out: &mut String, label: &str) {
        let ticks: Vec<f64> = if self.log {
            (self.lo as i32..=self.hi as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=5).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0).collect()
        };
        let _ = writeln!(out, "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>", H - BOTTOM);
        let _ = writeln!(out, "<line x1=\"{LEFT}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>", H - BOTTOM, W - RIGHT);
        for t in ticks {
            let y = self.px(t);
            let text = if self.log || t.abs() >= 100.0 { format!("{t:.0}") } else { format!("{t:.2}") };
            let _ = writeln!(out, "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{LEFT}\" y2=\"{y:.1}\" stroke=\"black\"/>", LEFT - 4.0);
            let _ = writeln!(out, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{text}</text>", LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
            (TOP + H - BOTTOM) / 2.0,
            escape(label)
        );
    }
}

/// Grouped bars with `mean ± spread` whiskers. A spread of zero draws no whisker.
pub fn grouped_bar_chart(title: &str, y_label: &str, series: &[String], groups: &[BarGroup], log_y: bool) -> String {
    let axis = YAxis::new(groups.iter().flat_map(|g| g.values.iter().flat_map(|&(m, s)| [m, m + s])), log_y);
    let mut out = header(title);
    axis.draw(&mut out, y_label);
    let plot_w = W - LEFT - RIGHT;
    let slot = plot_w / groups.len().max(1) as f64;
    let bar = slot * 0.8 / series.len().max(1) as f64;
    for (gi, g) in groups.iter().enumerate() {
        let x0 = LEFT + slot * gi as f64 + slot * 0.1;
        for (si, &(mean, spread)) in g.values.iter().enumerate() {
            if !mean.is_finite() {
                continue;
            }
            let x = x0 + bar * si as f64;
            let y = axis.px(mean);
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
                bar * 0.9,
                H - BOTTOM - y,
                PALETTE[si % PALETTE.len()]
            );
            if spread > 0.0 {
                let cx = x + bar * 0.45;
                let _ = writeln!(
                    out,
                    "<line class=\"err\" x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                    axis.px(mean - spread),
                    axis.px(mean + spread)
                );
            }
        }
        let lx = x0 + slot * 0.4;
        let ly = H - BOTTOM + 12.0;
        let _ = writeln!(out, "<text x=\"{lx:.1}\" y=\"{ly}\" text-anchor=\"end\" transform=\"rotate(-40 {lx:.1} {ly})\">{}</text>", escape(&g.label));
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

pub fn grouped_bar_csv(series: &[String], groups: &[BarGroup]) -> String {
    let mut out = String::from("group,series,mean,spread\n");
    for g in groups {
        for (name, (m, s)) in series.iter().zip(&g.values) {
            let _ = writeln!(out, "{},{name},{m},{s}", g.label);
        }
    }
    out
}

/// Lines with optional shaded bands. `x_ticks` labels integer x positions.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x_ticks: Option<&[String]>, series: &[Series]) -> String {
    let axis = YAxis::new(series.iter().flat_map(|s| s.points.iter().flat_map(|&(_, y, b)| [y - b, y + b])), false);
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_lo, mut x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let x_lo = if x_lo.is_finite() { x_lo } else { 0.0 };
    if !(x_hi > x_lo) {
        x_hi = x_lo + 1.0;
    }
    let px = |x: f64| LEFT + 10.0 + (x - x_lo) / (x_hi - x_lo) * (W - LEFT - RIGHT - 20.0);
    let mut out = header(title);
    axis.draw(&mut out, y_label);
    match x_ticks {
        Some(labels) => {
            for (i, l) in labels.iter().enumerate() {
                let x = px(i as f64);
                let ly = H - BOTTOM + 12.0;
                let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{ly}\" text-anchor=\"end\" transform=\"rotate(-40 {x:.1} {ly})\">{}</text>", escape(l));
            }
        }
        None => {
            let mut seen: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
            seen.sort_by(f64::total_cmp);
            seen.dedup();
            for x in seen {
                let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{x}</text>", px(x), H - BOTTOM + 16.0);
            }
        }
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", (LEFT + W - RIGHT) / 2.0, H - 10.0, escape(x_label));
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<&(f64, f64, f64)> = s.points.iter().filter(|p| p.1.is_finite()).collect();
        if pts.iter().any(|p| p.2 > 0.0) {
            let upper = pts.iter().map(|p| format!("{:.1},{:.1}", px(p.0), axis.px(p.1 + p.2)));
            let lower = pts.iter().rev().map(|p| format!("{:.1},{:.1}", px(p.0), axis.px(p.1 - p.2)));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(out, "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\"/>", poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", px(p.0), axis.px(p.1))).collect();
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", line.join(" "));
        for p in &pts {
            let _ = writeln!(out, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>", px(p.0), axis.px(p.1));
        }
    }
    let names: Vec<String> = series.iter().map(|s| s.name.clone()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

pub fn line_csv(series: &[Series]) -> String {
    let mut out = String::from("series,x,y,band\n");
    for s in series {
        for (x, y, b) in &s.points {
            let _ = writeln!(out, "{},{x},{y},{b}", s.name);
        }
    }
    out
}
