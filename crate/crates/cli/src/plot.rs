//! Deterministic SVG rendering of the CLI's CSV artifacts.
//!
//! Two layouts are understood, told apart by the header row: class intensity
//! curves (`step,class1,class2,class3,class4`, one polyline per class) and a
//! training loss trace (`step,loss`, a single polyline).  Rendering is a
//! pure function of the CSV text — the same input always yields the same
//! SVG bytes — and malformed rows are rejected with their line number.

use std::fmt;
use std::fmt::Write as _;

/// Header of an intensity CSV written by `classify`.
pub const INTENSITY_HEADER: &str = "step,class1,class2,class3,class4";

/// Header of a loss CSV written by `train`.
pub const LOSS_HEADER: &str = "step,loss";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 44.0;

const SERIES_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const SERIES_LABELS: [&str; 4] = ["class 1", "class 2", "class 3", "class 4"];

/// A CSV row the renderer cannot use, located by its 1-based line.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for PlotError {}

fn row_err(line: usize, message: String) -> PlotError {
    PlotError { line, message }
}

/// Renders `csv` as a self-contained SVG chart.
pub fn render(csv: &str) -> Result<String, PlotError> {
    let header = csv.lines().next().map(str::trim).unwrap_or("");
    let (n_series, title, y_label) = match header {
        INTENSITY_HEADER => (4, "forecast intensity per class", "intensity"),
        LOSS_HEADER => (1, "training loss", "loss"),
        other => {
            return Err(row_err(
                1,
                format!(
                    "unrecognized header '{other}' \
                     (expected '{INTENSITY_HEADER}' or '{LOSS_HEADER}')"
                ),
            ))
        }
    };

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); n_series];
    for (i, raw) in csv.lines().enumerate().skip(1) {
        let line_no = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != n_series + 1 {
            return Err(row_err(
                line_no,
                format!(
                    "expected {} comma-separated values, found {}",
                    n_series + 1,
                    fields.len()
                ),
            ));
        }
        let parse = |field: &str| -> Result<f64, PlotError> {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| row_err(line_no, format!("bad number '{}'", field.trim())))?;
            if !v.is_finite() {
                return Err(row_err(line_no, format!("non-finite value '{}'", field.trim())));
            }
            Ok(v)
        };
        xs.push(parse(fields[0])?);
        for (k, series) in ys.iter_mut().enumerate() {
            series.push(parse(fields[k + 1])?);
        }
    }
    if xs.is_empty() {
        return Err(row_err(1, "no data rows after the header".to_string()));
    }

    // Axis ranges; degenerate spans widen by one so mapping stays finite.
    let (mut x_lo, mut x_hi) = min_max(&xs);
    if x_lo == x_hi {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    let (mut y_lo, mut y_hi) = min_max(&ys.concat());
    let pad = if y_lo == y_hi { 1.0 } else { (y_hi - y_lo) * 0.05 };
    y_lo -= pad;
    y_hi += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let map_x = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let map_y = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;
    let x_axis_y = HEIGHT - MARGIN_BOTTOM;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .expect("string write");
    let mut push = |s: String| writeln!(svg, "{s}").expect("string write");
    push(format!(
        r##"  <rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    ));
    push(format!(
        r#"  <text x="{:.2}" y="20" font-family="monospace" font-size="14" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    ));

    // Axes with min/max tick labels.
    push(format!(
        r##"  <line x1="{MARGIN_LEFT}" y1="{x_axis_y}" x2="{:.2}" y2="{x_axis_y}" stroke="#333333" stroke-width="1"/>"##,
        WIDTH - MARGIN_RIGHT
    ));
    push(format!(
        r##"  <line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{x_axis_y}" stroke="#333333" stroke-width="1"/>"##
    ));
    push(format!(
        r#"  <text x="{MARGIN_LEFT}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
        x_axis_y + 16.0,
        fmt_tick(x_lo)
    ));
    push(format!(
        r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
        WIDTH - MARGIN_RIGHT,
        x_axis_y + 16.0,
        fmt_tick(x_hi)
    ));
    push(format!(
        r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
        MARGIN_LEFT - 6.0,
        x_axis_y + 4.0,
        fmt_tick(y_lo)
    ));
    push(format!(
        r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 4.0,
        fmt_tick(y_hi)
    ));
    push(format!(
        r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="middle">step</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        x_axis_y + 32.0
    ));
    push(format!(
        r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="end">{y_label}</text>"#,
        MARGIN_LEFT - 6.0,
        MARGIN_TOP - 10.0
    ));

    // One polyline per series; legend swatches are rects, so an intensity
    // chart holds exactly four polyline elements.
    for (k, series) in ys.iter().enumerate() {
        let mut points = String::new();
        for (x, y) in xs.iter().zip(series) {
            if !points.is_empty() {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", map_x(*x), map_y(*y)).expect("string write");
        }
        push(format!(
            r#"  <polyline fill="none" stroke="{}" stroke-width="1.5" points="{points}"/>"#,
            SERIES_COLORS[k]
        ));
    }
    if n_series > 1 {
        for k in 0..n_series {
            let x = WIDTH - MARGIN_RIGHT - 86.0;
            let y = MARGIN_TOP + 8.0 + k as f64 * 18.0;
            push(format!(
                r#"  <rect x="{x:.2}" y="{y:.2}" width="12" height="12" fill="{}"/>"#,
                SERIES_COLORS[k]
            ));
            push(format!(
                r#"  <text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11">{}</text>"#,
                x + 16.0,
                y + 10.0,
                SERIES_LABELS[k]
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Tick label: four decimals with trailing zeros trimmed.
fn fmt_tick(v: f64) -> String {
    let mut s = format!("{v:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn intensity_csv() -> String {
        let mut csv = String::from("step,class1,class2,class3,class4\n");
        for s in 1..=16 {
            let t = s as f64 / 16.0;
            writeln!(
                csv,
                "{s},{:.6},{:.6},{:.6},{:.6}",
                1.0 - t,
                t,
                0.1,
                0.05 * t
            )
            .unwrap();
        }
        csv
    }

    #[test]
    fn intensity_chart_has_exactly_four_polylines() {
        let svg = render(&intensity_csv()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("class 3"));
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn loss_chart_has_exactly_one_polyline() {
        let svg = render("step,loss\n1,0.9\n2,0.7\n3,0.6\n").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("training loss"));
    }

    #[test]
    fn rendering_is_byte_deterministic() {
        let csv = intensity_csv();
        assert_eq!(render(&csv).unwrap(), render(&csv).unwrap());
        // A changed value must change the output.
        let other = csv.replace("0.100000", "0.200000");
        assert_ne!(render(&csv).unwrap(), render(&other).unwrap());
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let err = render("step,loss\n1,0.9\n2\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("expected 2"));

        let err = render("step,loss\n1,0.9\n2,spoon\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("'spoon'"));

        let err = render("step,loss\n1,NaN\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("non-finite"));
    }

    #[test]
    fn unknown_header_and_empty_body_are_rejected() {
        let err = render("a,b,c\n1,2,3\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("unrecognized header"));

        let err = render("step,loss\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("no data rows"));
    }

    #[test]
    fn flat_and_single_point_series_stay_finite() {
        let svg = render("step,loss\n1,0.5\n2,0.5\n3,0.5\n").unwrap();
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
        let svg = render("step,loss\n1,0.25\n").unwrap();
        assert!(!svg.contains("NaN"));
    }
}
