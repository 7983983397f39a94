//! Minimal self-contained SVG: scatter plus fitted and reference lines.

const W: f64 = 560.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

pub struct Series<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub label: String,
    pub dashed: bool,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.08 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Log-log scatter: the caller passes already-logged coordinates, the
/// tick labels show the log values directly.
pub fn scatter_with_lines(
    title: &str,
    x_label: &str,
    y_label: &str,
    data: &Series,
    lines: &[Line],
) -> String {
    let (x_lo, x_hi) = span(data.xs.iter().copied());
    let (y_lo, y_hi) = span(data.ys.iter().copied().chain(lines.iter().flat_map(|l| {
        [l.intercept + l.slope * x_lo, l.intercept + l.slope * x_hi]
    })));
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        MARGIN,
        MARGIN,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n",
        W / 2.0,
        H - 14.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        H / 2.0,
        H / 2.0
    ));
    // Four ticks per axis.
    for i in 0..=3 {
        let f = i as f64 / 3.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2}</text>\n",
            px(xv),
            H - MARGIN + 18.0,
            xv
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            MARGIN - 6.0,
            py(yv) + 4.0,
            yv
        ));
    }
    for (idx, line) in lines.iter().enumerate() {
        let color = if idx == 0 { "#1f6fb2" } else { "#b23a1f" };
        let dash = if line.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            px(x_lo),
            py(line.intercept + line.slope * x_lo),
            px(x_hi),
            py(line.intercept + line.slope * x_hi),
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>\n",
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * idx as f64,
            line.label
        ));
    }
    for (&x, &y) in data.xs.iter().zip(data.ys) {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>\n",
            px(x),
            py(y)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Plain curve (already in plotting coordinates), for time histories.
pub fn curve(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = scatter_with_lines(title, x_label, y_label, &Series { xs, ys }, &[]);
    // Connect consecutive points.
    let (x_lo, x_hi) = span(xs.iter().copied());
    let (y_lo, y_hi) = span(ys.iter().copied());
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);
    let mut path = String::from("<path d=\"");
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        path.push_str(&format!("{cmd}{:.2} {:.2} ", px(x), py(y)));
    }
    path.push_str("\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>\n</svg>\n");
    s.truncate(s.len() - "</svg>\n".len());
    s.push_str(&path);
    s
}
