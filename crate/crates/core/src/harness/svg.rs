//! Static SVG 1.1 rendering of empirical distribution panels.

use super::output::format_float;
use std::fmt::Write as _;

/// One panel: conditional estimate drawn as points, unconditional as a line.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub grid: Vec<f64>,
    pub conditional: Vec<f64>,
    pub unconditional: Vec<f64>,
}

const WIDTH: f64 = 420.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn coord(v: f64) -> String {
    format_float((v * 100.0).round() / 100.0)
}

/// Panels side by side in one document.
pub fn render(panels: &[Panel]) -> String {
    let total_w = WIDTH * panels.len() as f64;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    s.push_str(
        "<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 1.1//EN\" \"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd\">\n",
    );
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        coord(total_w),
        coord(HEIGHT),
        coord(total_w),
        coord(HEIGHT)
    );
    s.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, p) in panels.iter().enumerate() {
        panel(&mut s, p, WIDTH * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel(s: &mut String, p: &Panel, x0: f64) {
    let lo = p.grid.first().copied().unwrap_or(0.0);
    let hi = p.grid.last().copied().unwrap_or(1.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |y: f64| x0 + MARGIN + (y - lo) / span * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - v.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(s, "<g>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        coord(x0 + WIDTH / 2.0),
        coord(MARGIN / 2.0),
        escape(&p.title)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>",
        coord(x0 + MARGIN),
        coord(MARGIN),
        coord(WIDTH - 2.0 * MARGIN),
        coord(HEIGHT - 2.0 * MARGIN)
    );
    for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            coord(x0 + MARGIN - 4.0),
            coord(py(v) + 3.0),
            label
        );
    }
    for (y, label) in [(lo, format_float(lo)), (hi, format_float(hi))] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            coord(px(y)),
            coord(HEIGHT - MARGIN + 14.0),
            escape(&label)
        );
    }
    let points: Vec<String> = p
        .grid
        .iter()
        .zip(&p.unconditional)
        .map(|(&y, &v)| format!("{},{}", coord(px(y)), coord(py(v))))
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        points.join(" ")
    );
    for (&y, &v) in p.grid.iter().zip(&p.conditional) {
        let _ = writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"crimson\"/>",
            coord(px(y)),
            coord(py(v))
        );
    }
    let _ = writeln!(s, "</g>");
}
