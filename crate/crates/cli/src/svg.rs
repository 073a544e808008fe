//! Minimal SVG figures: stacked line plots and heat maps.

use std::fmt::Write;

use kerrtraj::analysis::histogram::Histogram;
use kerrtraj::analysis::wigner::WignerGrid;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 150.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 28.0;

/// Shortest decimal that still separates tick labels.
fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One panel per series, sharing the horizontal axis `t`.
pub fn line_plot(title: &str, x_label: &str, t: &[f64], series: &[(&str, &[f64])]) -> String {
    let height = MARGIN_TOP + series.len() as f64 * (PANEL_HEIGHT + GAP) + 20.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let (t0, t1) = range(t);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let sx = |v: f64| MARGIN_LEFT + (v - t0) / (t1 - t0) * plot_w;
    for (k, (name, values)) in series.iter().enumerate() {
        let top = MARGIN_TOP + k as f64 * (PANEL_HEIGHT + GAP);
        let (y0, y1) = range(values);
        let sy = |v: f64| top + PANEL_HEIGHT - (v - y0) / (y1 - y0) * PANEL_HEIGHT;
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#
        );
        for v in [y0, 0.5 * (y0 + y1), y1] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 4.0,
                sy(v) + 4.0,
                label(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            top + PANEL_HEIGHT / 2.0,
            escape(name)
        );
        let mut path = String::new();
        let mut pen_down = false;
        for (&ti, &vi) in t.iter().zip(values.iter()) {
            if !vi.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(ti), sy(vi));
            pen_down = true;
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1"/>"#, path.trim_end());
    }
    let bottom = MARGIN_TOP + series.len() as f64 * (PANEL_HEIGHT + GAP) - GAP + 14.0;
    for v in [t0, 0.5 * (t0 + t1), t1] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{bottom:.2}" text-anchor="middle">{}</text>"#, sx(v), label(v));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        bottom + 14.0,
        escape(x_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Bar chart of a histogram.
pub fn histogram_plot(title: &str, x_label: &str, hist: &Histogram) -> String {
    let height = MARGIN_TOP + PANEL_HEIGHT * 2.0 + 50.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT * 2.0;
    let (x0, x1) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
    let top_count = hist.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let sx = |v: f64| MARGIN_LEFT + (v - x0) / (x1 - x0) * plot_w;
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for (k, &c) in hist.counts.iter().enumerate() {
        let h = c as f64 / top_count * plot_h;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"/>"#,
            sx(hist.edges[k]),
            MARGIN_TOP + plot_h - h,
            sx(hist.edges[k + 1]) - sx(hist.edges[k])
        );
    }
    let bottom = MARGIN_TOP + plot_h + 14.0;
    for v in [x0, 0.5 * (x0 + x1), x1] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{bottom:.2}" text-anchor="middle">{}</text>"#, sx(v), label(v));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        bottom + 14.0,
        escape(x_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Diverging blue-white-red map, symmetric about zero.
fn color(v: f64, scale: f64) -> String {
    let s = (v / scale).clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * (1.0 - s.abs()) + c * s.abs()).round() as u8;
    let (r, g, b) = if s >= 0.0 {
        (fade(178.0), fade(24.0), fade(43.0))
    } else {
        (fade(33.0), fade(102.0), fade(172.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map of a Wigner grid with `x` horizontal and `p` vertical.
pub fn wigner_heatmap(title: &str, grid: &WignerGrid) -> String {
    let side = WIDTH - MARGIN_LEFT - MARGIN_RIGHT - 100.0;
    let height = MARGIN_TOP + side + 50.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let (nx, np) = (grid.x_axis.len(), grid.p_axis.len());
    let cw = side / nx as f64;
    let ch = side / np as f64;
    let scale = grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..nx {
        for j in 0..np {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN_LEFT + i as f64 * cw,
                MARGIN_TOP + (np - 1 - j) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                color(grid.at(i, j), scale)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    let (xa, xb) = (grid.x_axis[0], grid.x_axis[nx - 1]);
    let (pa, pb) = (grid.p_axis[0], grid.p_axis[np - 1]);
    let bottom = MARGIN_TOP + side + 14.0;
    let _ = writeln!(out, r#"<text x="{MARGIN_LEFT}" y="{bottom}" text-anchor="middle">{}</text>"#, label(xa));
    let _ = writeln!(out, r#"<text x="{}" y="{bottom}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + side, label(xb));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#, MARGIN_LEFT + side / 2.0, bottom + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 4.0, MARGIN_TOP + side, label(pa));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 4.0, MARGIN_TOP + 10.0, label(pb));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">p</text>"#, MARGIN_LEFT - 4.0, MARGIN_TOP + side / 2.0);
    // color bar
    let bar_x = MARGIN_LEFT + side + 30.0;
    for k in 0..50 {
        let v = scale * (1.0 - 2.0 * k as f64 / 49.0);
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            MARGIN_TOP + k as f64 * side / 50.0,
            side / 50.0 + 0.05,
            color(v, scale)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, bar_x + 20.0, MARGIN_TOP + 10.0, label(scale));
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, bar_x + 20.0, MARGIN_TOP + side, label(-scale));
    out.push_str("</svg>\n");
    out
}
