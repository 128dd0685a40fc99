//! CSV and SVG output for plottable series.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Scatter,
}

/// One plottable series; `markers` are highlighted points drawn over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub style: Style,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
    pub markers: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, style: Style, x: &str, y: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            style,
            columns: [x.to_string(), y.to_string()],
            points,
            markers: Vec::new(),
        }
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, s: &Series) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(&s.columns).map_err(|e| io(path, e))?;
    for (x, y) in &s.points {
        w.write_record([format!("{x:e}"), format!("{y:e}")]).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

fn bounds(pts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let fold = |f: fn(&(f64, f64)) -> f64| {
        pts.iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let pad = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        let w = (hi - lo).max(1e-12 * lo.abs().max(1.0));
        (lo - 0.05 * w, hi + 0.05 * w)
    };
    (pad(fold(|p| p.0)), pad(fold(|p| p.1)))
}

fn render_svg(s: &Series) -> Result<String, String> {
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let ((x0, x1), (y0, y1)) = bounds(&s.points);
        let mut chart = ChartBuilder::on(&root)
            .caption(&s.name, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc(s.columns[0].as_str())
            .y_desc(s.columns[1].as_str())
            .draw()
            .map_err(|e| e.to_string())?;
        let pts = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite());
        match s.style {
            Style::Line => chart
                .draw_series(LineSeries::new(pts, &BLUE))
                .map(|_| ())
                .map_err(|e| e.to_string())?,
            Style::Scatter => chart
                .draw_series(pts.map(|p| Circle::new(p, 1, BLUE.filled())))
                .map(|_| ())
                .map_err(|e| e.to_string())?,
        }
        if !s.markers.is_empty() {
            chart
                .draw_series(s.markers.iter().map(|&p| Cross::new(p, 4, RED.stroke_width(1))))
                .map_err(|e| e.to_string())?;
        }
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(out)
}

/// Writes `<name>.csv` and `<name>.svg` for each selected series. Requested
/// names with no matching series are returned as warnings and skipped.
pub fn emit_plot_data(
    series: &[Series],
    wanted: Option<&[String]>,
    dir: &Path,
) -> Result<(Vec<PathBuf>, Vec<String>), CliError> {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let selected: Vec<&Series> = match wanted {
        None => series.iter().collect(),
        Some(names) => {
            for n in names {
                if !series.iter().any(|s| &s.name == n) {
                    let avail: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
                    warnings.push(format!("unknown plot series `{n}` skipped (available: {})", avail.join(", ")));
                }
            }
            series.iter().filter(|s| names.contains(&s.name)).collect()
        }
    };
    for s in selected {
        let csv_path = dir.join(format!("{}.csv", s.name));
        write_csv(&csv_path, s)?;
        files.push(csv_path);
        let svg_path = dir.join(format!("{}.svg", s.name));
        let svg = render_svg(s).map_err(|e| io(&svg_path, e))?;
        std::fs::write(&svg_path, svg).map_err(|e| io(&svg_path, e))?;
        files.push(svg_path);
    }
    Ok((files, warnings))
}
