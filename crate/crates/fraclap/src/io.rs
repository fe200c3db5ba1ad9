//! Run artifacts: CSV tables, SVG plots, and manifests. All output is
//! deterministic byte-for-byte for identical inputs: numbers are printed
//! with 17 significant digits, newlines are "\n", and writes go through a
//! temp-file rename.

use crate::error::{FracError, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One table cell. Floats round-trip bit-exactly through the 17-digit form.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> Result<String> {
        match self {
            Cell::Int(v) => Ok(v.to_string()),
            Cell::Num(v) => {
                if !v.is_finite() {
                    return Err(FracError::Input(format!("non-finite cell value {v}")));
                }
                Ok(format!("{v:.16e}"))
            }
            Cell::Text(s) => {
                if s.contains(',') || s.contains('\n') {
                    return Err(FracError::Input(format!(
                        "text cells may not contain separators: {s:?}"
                    )));
                }
                Ok(s.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            if row.len() != self.columns.len() {
                return Err(FracError::Input(format!(
                    "row width {} does not match header width {}",
                    row.len(),
                    self.columns.len()
                )));
            }
            let rendered: Vec<String> =
                row.iter().map(|c| c.render()).collect::<Result<_>>()?;
            out.push_str(&rendered.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Write a table as CSV (atomic, UTF-8, "\n" newlines, 17 significant
/// digits).
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let body = table.render_csv()?;
    atomic_write(path, body.as_bytes())
}

/// Re-parse an emitted CSV. Numeric fields come back as Num, integer-looking
/// fields as Int, everything else as Text; floats written by emit_csv are
/// recovered bit-exactly.
pub fn parse_csv(content: &str) -> Result<Table> {
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| FracError::Input("empty CSV".into()))?;
    let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<Cell> = line
            .split(',')
            .map(|field| {
                if let Ok(i) = field.parse::<i64>() {
                    Cell::Int(i)
                } else if let Ok(v) = field.parse::<f64>() {
                    Cell::Num(v)
                } else {
                    Cell::Text(field.to_string())
                }
            })
            .collect();
        if row.len() != columns.len() {
            return Err(FracError::Input(format!(
                "CSV row width {} does not match header width {}",
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Write bytes through a sibling temp file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One plot series.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlotStyle {
    pub log_x: bool,
    pub log_y: bool,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 5] = ["#1b6ca8", "#c43d3d", "#2e8540", "#8247ad", "#b8860b"];

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Self-contained deterministic SVG line plot with optional log axes.
pub fn emit_svg_plot(series: &[Series], path: &Path, style: PlotStyle) -> Result<()> {
    if series.is_empty() {
        return Err(FracError::Input("no series to plot".into()));
    }
    let transform = |v: f64, log: bool| -> Result<f64> {
        if log {
            if v <= 0.0 {
                return Err(FracError::Input(format!(
                    "log-scale plot requires positive values, got {v}"
                )));
            }
            Ok(v.log10())
        } else {
            Ok(v)
        }
    };
    let mut pts_t: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        let mut bad = Vec::new();
        for (i, (x, y)) in s.points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                bad.push(i);
            }
        }
        if !bad.is_empty() {
            return Err(FracError::Input(format!(
                "series {:?} has non-finite points at indices {:?}",
                s.label, bad
            )));
        }
        let t: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|&(x, y)| Ok((transform(x, style.log_x)?, transform(y, style.log_y)?)))
            .collect::<Result<_>>()?;
        pts_t.push(t);
    }
    let all: Vec<(f64, f64)> = pts_t.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(FracError::Input("series contain no points".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = (PLOT_W - 2.0 * MARGIN) / (x1 - x0);
    let sy = (PLOT_H - 2.0 * MARGIN) / (y1 - y0);
    let px = |x: f64| MARGIN + (x - x0) * sx;
    let py = |y: f64| PLOT_H - MARGIN - (y - y0) * sy;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_coord(MARGIN),
        fmt_coord(PLOT_H - MARGIN),
        fmt_coord(PLOT_W - MARGIN),
        fmt_coord(PLOT_H - MARGIN)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt_coord(MARGIN),
        fmt_coord(MARGIN),
        fmt_coord(MARGIN),
        fmt_coord(PLOT_H - MARGIN)
    );
    // ticks: 5 per axis with numeric labels in data space
    for k in 0..=4 {
        let tx = x0 + (x1 - x0) * k as f64 / 4.0;
        let label = if style.log_x {
            format!("1e{tx:.2}")
        } else {
            format!("{tx:.3}")
        };
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/><text x=\"{0}\" y=\"{3}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>",
            fmt_coord(px(tx)),
            fmt_coord(PLOT_H - MARGIN),
            fmt_coord(PLOT_H - MARGIN + 5.0),
            fmt_coord(PLOT_H - MARGIN + 18.0)
        );
        let ty = y0 + (y1 - y0) * k as f64 / 4.0;
        let label = if style.log_y {
            format!("1e{ty:.2}")
        } else {
            format!("{ty:.3}")
        };
        let _ = writeln!(
            svg,
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/><text x=\"{3}\" y=\"{0}\" font-size=\"11\" text-anchor=\"end\">{label}</text>",
            fmt_coord(py(ty)),
            fmt_coord(MARGIN - 5.0),
            fmt_coord(MARGIN),
            fmt_coord(MARGIN - 8.0)
        );
    }
    for (si, (s, pts)) in series.iter().zip(pts_t.iter()).enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if pts.len() > 1 {
            let path_d: Vec<String> = pts
                .iter()
                .enumerate()
                .map(|(i, (x, y))| {
                    format!(
                        "{}{},{}",
                        if i == 0 { "M" } else { "L" },
                        fmt_coord(px(*x)),
                        fmt_coord(py(*y))
                    )
                })
                .collect();
            let _ = writeln!(
                svg,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path_d.join(" ")
            );
        }
        for (x, y) in pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>",
                fmt_coord(px(*x)),
                fmt_coord(py(*y))
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>",
            fmt_coord(PLOT_W - MARGIN - 150.0),
            fmt_coord(MARGIN + 16.0 * (si as f64 + 1.0)),
            s.label
        );
    }
    svg.push_str("</svg>\n");
    atomic_write(path, svg.as_bytes())
}

/// Record of one run: the invocation, a config snapshot, its hash, and the
/// artifact list. Reproducing the command with the same config must
/// reproduce the CSV artifacts byte for byte.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub unix_time: u64,
    pub artifacts: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value) -> Self {
        let canonical =
            serde_json::to_string(&config).unwrap_or_else(|_| String::from("null"));
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let config_hash = format!("{:x}", hasher.finalize());
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command,
            config,
            config_hash,
            unix_time,
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| FracError::Input(format!("manifest serialization: {e}")))?;
        atomic_write(path, body.as_bytes())
    }
}
