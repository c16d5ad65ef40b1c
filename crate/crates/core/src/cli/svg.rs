//! Minimal deterministic SVG line plots for the `report` subcommand.
//!
//! Text output only: no timestamps, no randomness, so identical inputs
//! produce byte-identical files (up to the embedded generator version).

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    let s = if (1e-3..1e6).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    };
    // trim trailing zeros of plain decimals
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Render one or more series as polylines with axes, ticks and labels.
pub fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xs.push(*x);
                ys.push(*y);
            }
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = pad_bounds(bounds(&ys));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min).max(1e-300) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min).max(1e-300) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<!-- generated by twinphoton report v{} -->\n",
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // axes
    out.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM,
    ));
    for i in 0..=5 {
        let fx = i as f64 / 5.0;
        let x = x_min + fx * (x_max - x_min);
        let y = y_min + fx * (y_max - y_min);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{b}\" x2=\"{px:.2}\" y2=\"{b2}\" stroke=\"black\"/>\n<text x=\"{px:.2}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{lx}</text>\n",
            px = sx(x),
            b = HEIGHT - MARGIN_BOTTOM,
            b2 = HEIGHT - MARGIN_BOTTOM + 5.0,
            ty = HEIGHT - MARGIN_BOTTOM + 18.0,
            lx = fmt(x),
        ));
        out.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{py:.2}\" x2=\"{l2}\" y2=\"{py:.2}\" stroke=\"black\"/>\n<text x=\"{tx}\" y=\"{py2:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{ly}</text>\n",
            l = MARGIN_LEFT,
            l2 = MARGIN_LEFT - 5.0,
            py = sy(y),
            py2 = sy(y) + 4.0,
            tx = MARGIN_LEFT - 8.0,
            ly = fmt(y),
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        for (x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                points.push_str(&format!("{:.2},{:.2} ", sx(*x), sy(*y)));
            }
        }
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        if series.len() > 1 {
            let ly = MARGIN_TOP + 14.0 * (idx as f64 + 1.0);
            out.push_str(&format!(
                "<line x1=\"{x1}\" y1=\"{ly:.2}\" x2=\"{x2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{tx}\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
                x1 = WIDTH - MARGIN_RIGHT - 120.0,
                x2 = WIDTH - MARGIN_RIGHT - 100.0,
                tx = WIDTH - MARGIN_RIGHT - 94.0,
                ty = ly + 4.0,
                label = escape(&s.label),
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn pad_bounds((lo, hi): (f64, f64)) -> (f64, f64) {
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
