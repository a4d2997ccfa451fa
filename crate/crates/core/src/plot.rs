//! Standalone SVG rendering of stopping-time comparisons: one panel per
//! instance, mean episodes per mu0 with 3-sigma error bars, one polyline per
//! algorithm, numeric annotations embedded so the figure can be checked
//! against the CSV summary without a plotting stack.

use crate::error::Error;
use crate::harness::CellSummary;

pub struct PlotPanel {
    pub title: String,
    pub cells: Vec<CellSummary>,
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Render panels into one SVG document.
pub fn emit_plot(panels: &[PlotPanel]) -> Result<String, Error> {
    if panels.is_empty() {
        return Err(Error::InvalidParameter("no panels to plot".into()));
    }
    for panel in panels {
        if panel.cells.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "panel {:?} has no data",
                panel.title
            )));
        }
        let mut algs: Vec<String> = Vec::new();
        for c in &panel.cells {
            let name = c.algorithm.to_string();
            if !algs.contains(&name) {
                algs.push(name);
            }
        }
        if algs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "panel {:?} has {} algorithm(s); a comparison needs at least 2",
                panel.title,
                algs.len()
            )));
        }
    }

    let width = PANEL_W * panels.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{PANEL_H}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{PANEL_H}\" fill=\"white\"/>\n"
    ));
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i as f64 * PANEL_W);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_panel(svg: &mut String, panel: &PlotPanel, x0: f64) {
    let mut mu0s: Vec<f64> = panel.cells.iter().map(|c| c.mu0).collect();
    mu0s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mu0s.dedup();
    let mut algs: Vec<String> = Vec::new();
    for c in &panel.cells {
        let name = c.algorithm.to_string();
        if !algs.contains(&name) {
            algs.push(name);
        }
    }
    let y_top = panel
        .cells
        .iter()
        .map(|c| c.mean_tau + 3.0 * c.std_tau)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1.0);

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let x_of = |mu0: f64| -> f64 {
        let idx = mu0s.iter().position(|&m| m == mu0).unwrap() as f64;
        let slots = mu0s.len().max(2) as f64 - 1.0;
        x0 + MARGIN_L + plot_w * if mu0s.len() == 1 { 0.5 } else { idx / slots }
    };
    let y_of = |tau: f64| -> f64 { MARGIN_T + plot_h * (1.0 - (tau / (1.05 * y_top)).clamp(0.0, 1.0)) };

    // Frame, title, axis labels.
    svg.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{MARGIN_T}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#999\"/>\n",
        x0 + MARGIN_L
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        x0 + MARGIN_L + plot_w / 2.0,
        xml_escape(&panel.title)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">reward threshold mu0</text>\n",
        x0 + MARGIN_L + plot_w / 2.0,
        PANEL_H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {:.1} {:.1})\">episodes to stop (lower is better)</text>\n",
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0,
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0
    ));
    for &mu0 in &mu0s {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x_of(mu0),
            MARGIN_T + plot_h + 16.0,
            mu0
        ));
    }

    for (ai, alg) in algs.iter().enumerate() {
        let color = COLORS[ai % COLORS.len()];
        let mut points = Vec::new();
        for &mu0 in &mu0s {
            if let Some(cell) = panel
                .cells
                .iter()
                .find(|c| c.algorithm.to_string() == *alg && c.mu0 == mu0)
            {
                points.push((x_of(mu0), cell));
            }
        }
        let path: Vec<String> = points
            .iter()
            .map(|(x, c)| format!("{:.1},{:.1}", x, y_of(c.mean_tau)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for (x, cell) in &points {
            let y = y_of(cell.mean_tau);
            // 3-sigma error bar; zero-length for single-trial cells.
            let y_lo = y_of(cell.mean_tau - 3.0 * cell.std_tau);
            let y_hi = y_of(cell.mean_tau + 3.0 * cell.std_tau);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{y_hi:.1}\" x2=\"{x:.1}\" y2=\"{y_lo:.1}\" stroke=\"{color}\"/>\n"
            ));
            svg.push_str(&format!(
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" fill=\"{color}\">{:.1}</text>\n",
                x + 5.0,
                y - 4.0,
                cell.mean_tau
            ));
        }
        // Legend.
        let ly = MARGIN_T + 14.0 * (ai as f64 + 1.0);
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            x0 + MARGIN_L + 8.0,
            ly - 9.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>\n",
            x0 + MARGIN_L + 22.0,
            xml_escape(alg)
        ));
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
