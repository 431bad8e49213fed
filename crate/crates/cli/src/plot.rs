//! SVG rendering of the tab-separated result files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plotters::prelude::*;

use crate::workspace;
use crate::Common;

const SIZE: (u32, u32) = (800, 600);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .with_context(|| format!("{} is empty", path.display()))?
            .split('\t')
            .map(str::to_string)
            .collect();
        let rows = lines.map(|l| l.split('\t').map(str::to_string).collect()).collect();
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).with_context(|| format!("missing column {name:?}"))
    }

    fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r.get(c)
                    .with_context(|| format!("short row in column {name:?}"))?
                    .parse::<f64>()
                    .with_context(|| format!("bad number in column {name:?}"))
            })
            .collect()
    }

    fn strings(&self, name: &str) -> Result<Vec<String>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| r.get(c).cloned().with_context(|| format!("short row in column {name:?}"))).collect()
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned())
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).abs().max(1e-6);
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn svg_error<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow::anyhow!("rendering failed: {e:?}")
}

/// Renders every input; vertex lists share one figure.
pub fn plot(common: &Common, inputs: &[PathBuf]) -> Result<()> {
    let out = workspace::out_dir(common)?;
    let mut shapes = Vec::new();
    for input in inputs {
        let table = Table::read(input)?;
        let target = out.join(format!("{}.svg", stem(input)));
        match table.header.first().map(String::as_str) {
            Some("scene") => localization(&table, &target)?,
            Some("label") => histograms(&table, &target)?,
            Some("epoch") => loss(&table, &target)?,
            Some("predictor") => scalar_bars(&table, &target)?,
            Some("x") => {
                shapes.push((stem(input), table));
                continue;
            }
            _ => bail!("{}: unrecognized result file", input.display()),
        }
        println!("wrote {}", target.display());
    }
    if !shapes.is_empty() {
        let target = out.join("geometry.svg");
        geometry(&shapes, &target)?;
        println!("wrote {}", target.display());
    }
    Ok(())
}

/// Pooled mean error per regime with one-std whiskers.
fn localization(table: &Table, target: &Path) -> Result<()> {
    let scenes = table.strings("scene")?;
    let regimes = table.strings("regime")?;
    let means = table.floats("mean")?;
    let stds = table.floats("std")?;
    let bars: Vec<(String, f64, f64)> =
        (0..scenes.len()).filter(|&i| scenes[i] == "all").map(|i| (regimes[i].clone(), means[i], stds[i])).collect();
    if bars.is_empty() {
        bail!("no pooled rows to plot");
    }
    let top = bars.iter().map(|b| b.1 + b.2).fold(0.0, f64::max).max(1e-3) * 1.1;
    let root = SVGBackend::new(target, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(svg_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Localization error", ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5f64..bars.len() as f64 - 0.5, 0.0..top)
        .map_err(svg_error)?;
    let labels: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(bars.len())
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < labels.len() {
                labels[i as usize].clone()
            } else {
                String::new()
            }
        })
        .y_desc("Frechet distance (m)")
        .draw()
        .map_err(svg_error)?;
    for (i, (_, mean, std)) in bars.iter().enumerate() {
        let x = i as f64;
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(std::iter::once(Rectangle::new([(x - 0.3, 0.0), (x + 0.3, *mean)], color.filled())))
            .map_err(svg_error)?;
        chart
            .draw_series(std::iter::once(PathElement::new(
                vec![(x, (mean - std).max(0.0)), (x, mean + std)],
                BLACK.stroke_width(2),
            )))
            .map_err(svg_error)?;
    }
    root.present().map_err(svg_error)
}

/// One outline per label over shared bins.
fn histograms(table: &Table, target: &Path) -> Result<()> {
    let labels = table.strings("label")?;
    let lo = table.floats("lo")?;
    let hi = table.floats("hi")?;
    let counts = table.floats("count")?;
    let mut series: BTreeMap<&str, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for i in 0..labels.len() {
        series.entry(&labels[i]).or_default().push((lo[i], hi[i], counts[i]));
    }
    let xmax = hi.iter().copied().fold(0.0, f64::max).max(1e-3);
    let ymax = counts.iter().copied().fold(0.0, f64::max).max(1.0) * 1.1;
    let root = SVGBackend::new(target, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(svg_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Error distribution", ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..xmax, 0.0..ymax)
        .map_err(svg_error)?;
    chart.configure_mesh().x_desc("Frechet distance (m)").y_desc("pairs").draw().map_err(svg_error)?;
    for (k, (label, bins)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = Vec::with_capacity(bins.len() * 2);
        for &(l, h, c) in bins {
            points.push((l, c));
            points.push((h, c));
        }
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))
            .map_err(svg_error)?
            .label(label.to_string())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(svg_error)?;
    root.present().map_err(svg_error)
}

fn loss(table: &Table, target: &Path) -> Result<()> {
    let epochs = table.floats("epoch")?;
    let values = table.floats("loss")?;
    if values.is_empty() {
        bail!("empty loss history");
    }
    let (ylo, yhi) = padded(
        values.iter().copied().fold(f64::INFINITY, f64::min),
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let root = SVGBackend::new(target, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(svg_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Training loss", ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..epochs.last().copied().unwrap_or(1.0).max(1.0), ylo..yhi)
        .map_err(svg_error)?;
    chart.configure_mesh().x_desc("epoch").y_desc("loss").draw().map_err(svg_error)?;
    chart
        .draw_series(LineSeries::new(epochs.into_iter().zip(values), PALETTE[0].stroke_width(2)))
        .map_err(svg_error)?;
    root.present().map_err(svg_error)
}

/// Bars for the last numeric column of grounding or stability tables.
fn scalar_bars(table: &Table, target: &Path) -> Result<()> {
    let name = table.header.last().context("empty header")?.clone();
    let predictors = table.strings("predictor")?;
    let values = table.floats(&name)?;
    let top = values.iter().copied().fold(0.0, f64::max).max(1e-3) * 1.1;
    let root = SVGBackend::new(target, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(svg_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&name, ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5f64..values.len() as f64 - 0.5, 0.0..top)
        .map_err(svg_error)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(values.len())
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < predictors.len() {
                predictors[i as usize].clone()
            } else {
                String::new()
            }
        })
        .draw()
        .map_err(svg_error)?;
    chart
        .draw_series(values.iter().enumerate().map(|(i, v)| {
            let x = i as f64;
            Rectangle::new([(x - 0.3, 0.0), (x + 0.3, *v)], PALETTE[i % PALETTE.len()].filled())
        }))
        .map_err(svg_error)?;
    root.present().map_err(svg_error)
}

/// Obstacle hulls as closed filled polygons, paths as polylines.
fn geometry(shapes: &[(String, Table)], target: &Path) -> Result<()> {
    let mut all = Vec::new();
    let mut parsed = Vec::new();
    for (name, table) in shapes {
        let points: Vec<(f64, f64)> = table.floats("x")?.into_iter().zip(table.floats("y")?).collect();
        all.extend(points.iter().copied());
        parsed.push((name.clone(), points));
    }
    if all.is_empty() {
        bail!("no vertices to plot");
    }
    let (xlo, xhi) = padded(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (ylo, yhi) = padded(
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let root = SVGBackend::new(target, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(svg_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Task obstacle and path", ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xlo..xhi, ylo..yhi)
        .map_err(svg_error)?;
    chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw().map_err(svg_error)?;
    for (k, (name, points)) in parsed.into_iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if name.starts_with("obstacle") {
            chart
                .draw_series(std::iter::once(Polygon::new(points.clone(), color.mix(0.3).filled())))
                .map_err(svg_error)?;
            let mut closed = points;
            if let Some(first) = closed.first().copied() {
                closed.push(first);
            }
            chart.draw_series(LineSeries::new(closed, color.stroke_width(2))).map_err(svg_error)?;
        } else {
            chart.draw_series(LineSeries::new(points, color.stroke_width(2))).map_err(svg_error)?;
        }
    }
    root.present().map_err(svg_error)
}
