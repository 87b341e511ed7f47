//! SVG figures: the four trace panels and the rod-shape fan.

use std::ops::Range;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::output::{ShapeFile, TraceRow};

const SIZE: (u32, u32) = (720, 440);

pub struct Series<'a> {
    pub label: String,
    pub rows: &'a [TraceRow],
}

struct Panel {
    file: &'static str,
    title: &'static str,
    y_desc: &'static str,
    value: fn(&TraceRow) -> f64,
}

const PANELS: [Panel; 4] = [
    Panel {
        file: "tip_x.svg",
        title: "(a) tip x",
        y_desc: "x (mm)",
        value: |r| r.tip_x_mm,
    },
    Panel {
        file: "tip_z.svg",
        title: "(b) tip z",
        y_desc: "z (mm)",
        value: |r| r.tip_z_mm,
    },
    Panel {
        file: "displacement.svg",
        title: "(c) tendon displacement",
        y_desc: "displacement (mm)",
        value: |r| r.displacement_mm,
    },
    Panel {
        file: "error.svg",
        title: "(d) position error",
        y_desc: "error (mm)",
        value: |r| r.error_mm,
    },
];

fn padded(lo: f64, hi: f64) -> Range<f64> {
    let span = (hi - lo).abs().max(1e-6);
    (lo - 0.05 * span)..(hi + 0.05 * span)
}

fn bounds(points: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = points.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    padded(lo, hi)
}

fn draw_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot draw {}: {e}", path.display()))
}

/// Writes the four panels into `dir` and returns their paths.
pub fn trace_panels(series: &[Series], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for panel in &PANELS {
        let path = dir.join(panel.file);
        let mut svg = String::new();
        {
            let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
            root.fill(&WHITE).map_err(|e| draw_error(&path, e))?;
            let last = series
                .iter()
                .flat_map(|s| s.rows.iter())
                .map(|r| r.iteration)
                .max()
                .unwrap_or(1);
            let mut values: Vec<f64> = series
                .iter()
                .flat_map(|s| s.rows.iter().map(panel.value))
                .collect();
            let reference: Option<Vec<(f64, f64)>> = (panel.file == "tip_x.svg").then(|| {
                series[0]
                    .rows
                    .iter()
                    .map(|r| (r.iteration as f64, r.tip_x_mm + r.error_mm))
                    .collect()
            });
            if let Some(points) = &reference {
                values.extend(points.iter().map(|p| p.1));
            }
            let mut chart = ChartBuilder::on(&root)
                .caption(panel.title, ("sans-serif", 20))
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d(0f64..last as f64, bounds(values.into_iter()))
                .map_err(|e| draw_error(&path, e))?;
            chart
                .configure_mesh()
                .x_desc("iteration")
                .y_desc(panel.y_desc)
                .draw()
                .map_err(|e| draw_error(&path, e))?;
            if let Some(points) = reference {
                chart
                    .draw_series(DashedLineSeries::new(points, 6, 4, BLACK.stroke_width(1)))
                    .map_err(|e| draw_error(&path, e))?
                    .label("reference")
                    .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
            }
            for (i, s) in series.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                chart
                    .draw_series(LineSeries::new(
                        s.rows
                            .iter()
                            .map(|r| (r.iteration as f64, (panel.value)(r))),
                        color.stroke_width(2),
                    ))
                    .map_err(|e| draw_error(&path, e))?
                    .label(s.label.clone())
                    .legend(move |(x, y)| {
                        PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
                    });
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| draw_error(&path, e))?;
            root.present().map_err(|e| draw_error(&path, e))?;
        }
        std::fs::write(&path, svg)
            .map_err(CliError::io(format!("cannot write {}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Snapshot indices for a stride: 0, k, 2k, … or only the last one when the
/// stride exceeds the run.
pub fn shape_indices(count: usize, every: usize) -> Vec<usize> {
    let horizon = count.saturating_sub(1);
    if every > horizon {
        vec![horizon]
    } else {
        (0..=horizon).step_by(every).collect()
    }
}

/// Overlays x–z centerlines at the given stride.
pub fn rod_shapes(file: &ShapeFile, every: usize, path: &Path) -> Result<(), CliError> {
    if file.shapes.is_empty() {
        return Err(CliError::Input("shape file holds no shapes".into()));
    }
    let picked = shape_indices(file.shapes.len(), every);
    let points = || picked.iter().flat_map(|&k| file.shapes[k].iter());
    let xs = bounds(points().map(|p| p[0]));
    let zs = bounds(points().map(|p| p[2]));
    // Equal scales on both axes.
    let half = (xs.end - xs.start).max(zs.end - zs.start) / 2.0;
    let (cx, cz) = ((xs.start + xs.end) / 2.0, (zs.start + zs.end) / 2.0);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (600, 600)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| draw_error(path, e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(
                format!("{}: rod shape every {every} iterations", file.name),
                ("sans-serif", 18),
            )
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d((cx - half)..(cx + half), (cz - half)..(cz + half))
            .map_err(|e| draw_error(path, e))?;
        chart
            .configure_mesh()
            .x_desc("x (mm)")
            .y_desc("z (mm)")
            .draw()
            .map_err(|e| draw_error(path, e))?;
        let n = picked.len().max(2) - 1;
        for (i, &k) in picked.iter().enumerate() {
            let shade = ViridisRGB::get_color_normalized(i as f64, 0.0, n as f64);
            chart
                .draw_series(LineSeries::new(
                    file.shapes[k].iter().map(|p| (p[0], p[2])),
                    shade.stroke_width(2),
                ))
                .map_err(|e| draw_error(path, e))?;
        }
        root.present().map_err(|e| draw_error(path, e))?;
    }
    std::fs::write(path, svg).map_err(CliError::io(format!("cannot write {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_selection() {
        assert_eq!(shape_indices(101, 25), vec![0, 25, 50, 75, 100]);
        assert_eq!(shape_indices(11, 3), vec![0, 3, 6, 9]);
        assert_eq!(shape_indices(11, 50), vec![10]);
        assert_eq!(shape_indices(11, 10), vec![0, 10]);
    }
}
