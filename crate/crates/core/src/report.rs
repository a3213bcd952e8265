//! Output files: CSV tables, a JSON summary and static SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::ARTIFACT_VERSION;

/// A CSV body with its file stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    pub fn new<T: Serialize>(name: &str, rows: &[T]) -> Result<Self> {
        Ok(Table {
            name: name.to_string(),
            csv: to_csv(rows)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub name: String,
    pub svg: String,
}

/// Everything a command produces before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    pub charts: Vec<Chart>,
}

impl Output {
    /// One table and the serialized report.
    pub fn simple<T: Serialize, S: Serialize>(name: &str, rows: &[T], summary: &S) -> Result<Self> {
        Ok(Output {
            tables: vec![Table::new(name, rows)?],
            summary: serde_json::to_value(summary).map_err(|e| Error::Parse(format!("json: {e}")))?,
            charts: Vec::new(),
        })
    }
}

/// Rows as CSV with a header taken from the field names; `None` is empty.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv: {e}")))
}

/// Write tables, charts and `summary.json` into `dir`; returns the paths written.
pub fn write_output(dir: &Path, out: &Output, config: &ExperimentConfig, elapsed: Duration) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for t in &out.tables {
        let p = dir.join(format!("{}.csv", t.name));
        fs::write(&p, &t.csv).map_err(io)?;
        written.push(p);
    }
    for c in &out.charts {
        let p = dir.join(format!("{}.svg", c.name));
        fs::write(&p, &c.svg).map_err(io)?;
        written.push(p);
    }
    let doc = serde_json::json!({
        "artifact_version": ARTIFACT_VERSION,
        "config": config,
        "wall_clock_seconds": elapsed.as_secs_f64(),
        "summary": out.summary,
    });
    let p = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(format!("json: {e}")))?;
    fs::write(&p, text + "\n").map_err(io)?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.to_string(),
            points,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// A static line chart with markers, axes and five ticks per axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (bx, by) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{bx} {MARGIN} V{by} H{}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(xv),
            by + 18.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            bx - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        if ser.points.len() <= 50 {
            for p in &pts {
                let (x, y) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<u32>,
        c: u128,
    }

    #[test]
    fn csv_header_and_empty_options() {
        let rows = [
            Row { a: 1, b: None, c: u128::MAX },
            Row { a: 2, b: Some(3), c: 0 },
        ];
        let text = to_csv(&rows).unwrap();
        assert_eq!(
            text,
            format!("a,b,c\n1,,{}\n2,3,0\n", u128::MAX)
        );
    }

    #[test]
    fn chart_is_well_formed() {
        let svg = line_chart("t <1>", "x", "y", &[Series::new("s", vec![(1.0, 2.0), (2.0, 3.0)])]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("t &lt;1&gt;"));
        let empty = line_chart("e", "x", "y", &[]);
        assert!(empty.contains("</svg>"));
    }

    #[test]
    fn writes_files() {
        let dir = std::env::temp_dir().join(format!("brwcover-report-{}", std::process::id()));
        let out = Output {
            tables: vec![Table::new("t", &[Row { a: 1, b: None, c: 2 }]).unwrap()],
            summary: serde_json::json!({"x": 1}),
            charts: vec![Chart {
                name: "c".into(),
                svg: "<svg/>".into(),
            }],
        };
        let paths = write_output(&dir, &out, &ExperimentConfig::default(), Duration::from_millis(5)).unwrap();
        assert_eq!(paths.len(), 3);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["artifact_version"], ARTIFACT_VERSION);
        assert_eq!(json["config"]["d"], 3);
        let _ = fs::remove_dir_all(&dir);
    }
}
