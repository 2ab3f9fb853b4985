//! Zone matrices as plain text, SVG or HTML.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ResultsBundle, ZonePanel};
use crate::dm::{Zone, LEVELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    #[default]
    Text,
    Svg,
    Html,
}

impl FromStr for RenderFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(RenderFormat::Text),
            "svg" => Ok(RenderFormat::Svg),
            "html" => Ok(RenderFormat::Html),
            other => Err(Error::Config(format!("unknown render format '{other}'"))),
        }
    }
}

const ZONES: [Zone; 7] = [
    Zone::DarkGreen,
    Zone::Green,
    Zone::LightGreen,
    Zone::Yellow,
    Zone::LightRed,
    Zone::Red,
    Zone::DarkRed,
];

fn fill(zone: Option<Zone>) -> &'static str {
    match zone {
        None => "#e0e0e0",
        Some(Zone::DarkGreen) => "#1b5e20",
        Some(Zone::Green) => "#43a047",
        Some(Zone::LightGreen) => "#a5d6a7",
        Some(Zone::Yellow) => "#fff176",
        Some(Zone::LightRed) => "#ef9a9a",
        Some(Zone::Red) => "#e53935",
        Some(Zone::DarkRed) => "#8e0000",
    }
}

fn ink(zone: Option<Zone>) -> &'static str {
    match zone {
        Some(Zone::DarkGreen | Zone::Green | Zone::Red | Zone::DarkRed) => "#ffffff",
        _ => "#000000",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn level_label(zone: Zone) -> String {
    let pct = |x: f64| format!("{}%", x * 100.0);
    match zone {
        Zone::Yellow => "neither side rejected at 10%".to_string(),
        z => {
            let i = match z {
                Zone::LightRed | Zone::LightGreen => 0,
                Zone::Red | Zone::Green => 1,
                _ => 2,
            };
            let side = if z.is_red() { "column worse" } else { "column better" };
            format!("{side} at {}", pct(LEVELS[i]))
        }
    }
}

fn panel_title(panel: &ZonePanel) -> String {
    format!("{} / {}", panel.loss, panel.proxy.short_label())
}

fn cell_value(panel: &ZonePanel, row: usize, col: usize) -> (String, Option<Zone>) {
    match panel.cell(row, col) {
        None => (String::new(), None),
        Some(c) => match c.statistic {
            Some(s) => (format!("{s:.3}"), c.zone),
            None => ("n/a".to_string(), None),
        },
    }
}

pub fn render_matrix(bundle: &ResultsBundle, format: RenderFormat) -> String {
    match format {
        RenderFormat::Text => render_text(bundle),
        RenderFormat::Svg => render_svg(bundle),
        RenderFormat::Html => render_html(bundle),
    }
}

fn render_text(bundle: &ResultsBundle) -> String {
    let models = &bundle.matrix.models;
    let width = models.iter().map(String::len).max().unwrap_or(0).max(12) + 2;
    let mut out = String::new();
    let reps = bundle.replications.len();
    let _ = writeln!(out, "Averaged DM statistics over {reps} replications (rows: benchmark, columns: compared forecast)");
    for panel in &bundle.matrix.panels {
        let _ = writeln!(out, "\n{}", panel_title(panel));
        let _ = write!(out, "{:width$}", "");
        for m in models {
            let _ = write!(out, "{m:>width$}");
        }
        out.push('\n');
        for (i, row) in models.iter().enumerate() {
            let _ = write!(out, "{row:width$}");
            for j in 0..models.len() {
                let (value, zone) = cell_value(panel, i, j);
                let text = match (i == j, zone) {
                    (true, _) => "-".to_string(),
                    (false, Some(z)) => format!("{value} {:>2}", z.tag()),
                    (false, None) => value,
                };
                let _ = write!(out, "{text:>width$}");
            }
            out.push('\n');
        }
    }
    out.push_str("\nLegend:\n");
    for z in ZONES {
        let _ = writeln!(out, "  {:>2}  {:<11} {}", z.tag(), z.name(), level_label(z));
    }
    for w in &bundle.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

const CELL_W: usize = 96;
const CELL_H: usize = 28;
const LABEL_W: usize = 120;
const TITLE_H: usize = 28;
const MARGIN: usize = 16;
const LEGEND_ROW: usize = 20;

fn render_svg(bundle: &ResultsBundle) -> String {
    let models = &bundle.matrix.models;
    let k = models.len();
    let panel_h = TITLE_H + CELL_H * (k + 1);
    let width = 2 * MARGIN + LABEL_W + CELL_W * k.max(3);
    let legend_top = MARGIN + bundle.matrix.panels.len() * (panel_h + MARGIN);
    let height = legend_top + LEGEND_ROW * (ZONES.len() + 1) + MARGIN;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##);
    for (p, panel) in bundle.matrix.panels.iter().enumerate() {
        let top = MARGIN + p * (panel_h + MARGIN);
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{}" font-size="14" font-weight="bold">{}</text>"#,
            top + 18,
            escape(&panel_title(panel))
        );
        let grid = top + TITLE_H;
        for (j, m) in models.iter().enumerate() {
            let x = MARGIN + LABEL_W + j * CELL_W + CELL_W / 2;
            let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, grid + 18, escape(m));
        }
        for (i, m) in models.iter().enumerate() {
            let y = grid + (i + 1) * CELL_H;
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, MARGIN, y + 18, escape(m));
            for j in 0..k {
                let x = MARGIN + LABEL_W + j * CELL_W;
                let (value, zone) = cell_value(panel, i, j);
                let color = if i == j { "#ffffff" } else { fill(zone) };
                let _ = writeln!(
                    out,
                    r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{color}" stroke="#9e9e9e"/>"##
                );
                if i != j {
                    let _ = writeln!(
                        out,
                        r#"<text x="{}" y="{}" text-anchor="middle" fill="{}">{}</text>"#,
                        x + CELL_W / 2,
                        y + 18,
                        ink(zone),
                        value
                    );
                }
            }
        }
    }
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}" font-weight="bold">Legend</text>"#, legend_top + 14);
    for (i, z) in ZONES.iter().enumerate() {
        let y = legend_top + (i + 1) * LEGEND_ROW;
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{y}" width="28" height="14" fill="{}" stroke="#9e9e9e"/>"##,
            fill(Some(*z))
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{} {}: {}</text>"#,
            MARGIN + 36,
            y + 12,
            z.tag(),
            z.name(),
            level_label(*z)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn render_html(bundle: &ResultsBundle) -> String {
    let models = &bundle.matrix.models;
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Zone matrices</title>\n");
    out.push_str("<style>table{border-collapse:collapse;margin-bottom:1.5em}td,th{border:1px solid #9e9e9e;padding:4px 10px;text-align:center;font-family:sans-serif}</style>\n");
    out.push_str("</head>\n<body>\n");
    let _ = writeln!(
        out,
        "<p>Averaged DM statistics over {} replications. Rows: benchmark; columns: compared forecast.</p>",
        bundle.replications.len()
    );
    for panel in &bundle.matrix.panels {
        let _ = writeln!(out, "<h2>{}</h2>\n<table>", escape(&panel_title(panel)));
        out.push_str("<tr><th></th>");
        for m in models {
            let _ = write!(out, "<th>{}</th>", escape(m));
        }
        out.push_str("</tr>\n");
        for (i, row) in models.iter().enumerate() {
            let _ = write!(out, "<tr><th>{}</th>", escape(row));
            for j in 0..models.len() {
                if i == j {
                    out.push_str("<td></td>");
                    continue;
                }
                let (value, zone) = cell_value(panel, i, j);
                let _ = write!(
                    out,
                    r#"<td style="background:{};color:{}">{}</td>"#,
                    fill(zone),
                    ink(zone),
                    value
                );
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
    }
    out.push_str("<h2>Legend</h2>\n<table>\n");
    for z in ZONES {
        let _ = writeln!(
            out,
            r#"<tr><td style="background:{}">&nbsp;&nbsp;&nbsp;</td><td>{} {}</td><td>{}</td></tr>"#,
            fill(Some(z)),
            z.tag(),
            z.name(),
            level_label(z)
        );
    }
    out.push_str("</table>\n");
    for w in &bundle.warnings {
        let _ = writeln!(out, "<p>warning: {}</p>", escape(w));
    }
    out.push_str("</body>\n</html>\n");
    out
}
