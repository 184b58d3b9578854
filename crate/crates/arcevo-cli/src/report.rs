//! Render a convergence log as a single SVG line chart: best-ever and
//! per-generation mean score against the generation axis. Output bytes are
//! a deterministic function of the log contents.

use crate::CliError;

pub const LOG_HEADER: &str = "generation,best_gen,mean_gen,best_ever,evals,failures";

struct LogRow {
    generation: u32,
    mean_gen: f64,
    best_ever: f64,
}

fn parse_log(text: &str) -> Result<Vec<LogRow>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == LOG_HEADER => {}
        Some(other) => {
            return Err(CliError::Runtime(format!(
                "malformed log: expected header '{LOG_HEADER}', got '{other}'"
            )))
        }
        None => return Err(CliError::Runtime("malformed log: empty file".into())),
    }
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::Runtime(format!(
                "malformed log: line {} has {} fields, expected 6",
                number + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            CliError::Runtime(format!("malformed log: line {} has invalid {what}", number + 2))
        };
        rows.push(LogRow {
            generation: fields[0].parse().map_err(|_| bad("generation"))?,
            mean_gen: fields[2].parse().map_err(|_| bad("mean_gen"))?,
            best_ever: fields[3].parse().map_err(|_| bad("best_ever"))?,
        });
        let _: f64 = fields[1].parse().map_err(|_| bad("best_gen"))?;
        let _: u64 = fields[4].parse().map_err(|_| bad("evals"))?;
        let _: u32 = fields[5].parse().map_err(|_| bad("failures"))?;
    }
    if rows.is_empty() {
        return Err(CliError::Runtime("malformed log: no data rows".into()));
    }
    Ok(rows)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Build the chart from log text. Exactly two polylines: best-ever (solid
/// red) and per-generation mean (blue).
pub fn render_svg(log_text: &str) -> Result<String, CliError> {
    let rows = parse_log(log_text)?;

    let g_lo = f64::from(rows.first().expect("non-empty").generation);
    let g_hi = f64::from(rows.last().expect("non-empty").generation);
    let g_span = if g_hi > g_lo { g_hi - g_lo } else { 1.0 };
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for row in &rows {
        y_lo = y_lo.min(row.mean_gen).min(row.best_ever);
        y_hi = y_hi.max(row.mean_gen).max(row.best_ever);
    }
    if !(y_hi - y_lo).is_normal() {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = (y_hi - y_lo) * 0.05;
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |g: f64| MARGIN_LEFT + (g - g_lo) / g_span * plot_w;
    let y = |v: f64| MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let points = |select: &dyn Fn(&LogRow) -> f64| {
        rows.iter()
            .map(|row| format!("{:.2},{:.2}", x(f64::from(row.generation)), y(select(row))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\"/>\n"
    ));

    // Axis ticks: at most eight on each axis, snapped to whole generations.
    let x_ticks = 8.min(rows.len());
    let mut drawn = Vec::new();
    for i in 0..x_ticks {
        let g = if x_ticks == 1 {
            rows[0].generation
        } else {
            let t = i as f64 / (x_ticks - 1) as f64;
            (g_lo + t * (g_hi - g_lo)).round() as u32
        };
        if drawn.contains(&g) {
            continue;
        }
        drawn.push(g);
        let px = x(f64::from(g));
        svg.push_str(&format!(
            "  <line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{g}</text>\n",
            MARGIN_TOP + plot_h + 22.0
        ));
    }
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let v = y_lo + t * (y_hi - y_lo);
        let py = y(v);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{MARGIN_LEFT}\" y2=\"{py:.2}\" stroke=\"#333333\"/>\n",
            MARGIN_LEFT - 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.3}</text>\n",
            MARGIN_LEFT - 10.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">generation</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    ));

    svg.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"{}\"/>\n",
        points(&|row| row.best_ever)
    ));
    svg.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n",
        points(&|row| row.mean_gen)
    ));

    let legend_x = MARGIN_LEFT + 14.0;
    svg.push_str(&format!(
        "  <line x1=\"{legend_x}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
        MARGIN_TOP + 14.0,
        legend_x + 26.0,
        MARGIN_TOP + 14.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\">best ever</text>\n",
        legend_x + 32.0,
        MARGIN_TOP + 18.0
    ));
    svg.push_str(&format!(
        "  <line x1=\"{legend_x}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
        MARGIN_TOP + 34.0,
        legend_x + 26.0,
        MARGIN_TOP + 34.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\">generation mean</text>\n",
        legend_x + 32.0,
        MARGIN_TOP + 38.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
