//! SVG rendering of the CSV series. Nothing here feeds back into reports.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

/// A curve with a symmetric band, e.g. mean ± std across seeds.
#[derive(Debug, Clone)]
pub struct BandSeries {
    pub label: String,
    pub mean: Vec<f64>,
    /// Half-width of the band at each point; all zeros draws no band.
    pub spread: Vec<f64>,
}

/// One bar with an error whisker.
#[derive(Debug, Clone)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub error: f64,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

/// Line chart over an integer x axis with shaded bands.
pub fn band_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[BandSeries]) -> Result<()> {
    let len = series.iter().map(|s| s.mean.len()).max().unwrap_or(0).max(2);
    let lo = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.spread).map(|(m, d)| m - d))
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.spread).map(|(m, d)| m + d))
        .fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = padded_range(lo, hi);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..(len - 1) as f64, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.spread.iter().any(|d| *d > 0.0) {
            let upper = s.mean.iter().zip(&s.spread).enumerate().map(|(x, (m, d))| (x as f64, m + d));
            let lower: Vec<_> = s
                .mean
                .iter()
                .zip(&s.spread)
                .enumerate()
                .map(|(x, (m, d))| (x as f64, m - d))
                .rev()
                .collect();
            let outline: Vec<_> = upper.chain(lower).collect();
            chart
                .draw_series(std::iter::once(Polygon::new(outline, color.mix(0.2).filled())))
                .map_err(plot_err)?;
        }
        chart
            .draw_series(LineSeries::new(
                s.mean.iter().enumerate().map(|(x, m)| (x as f64, *m)),
                color.stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Bar chart with ± error whiskers.
pub fn bar_chart(path: &Path, title: &str, y_label: &str, bars: &[Bar]) -> Result<()> {
    let lo = bars.iter().map(|b| b.value - b.error).fold(0.0, f64::min);
    let hi = bars.iter().map(|b| b.value + b.error).fold(0.0, f64::max);
    let (y0, y1) = padded_range(lo, hi);
    let n = bars.len().max(1);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..n as f64, y0..y1)
        .map_err(plot_err)?;
    let labels: Vec<String> = bars.iter().map(|b| b.label.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n * 2 + 1)
        .x_label_formatter(&|x| {
            let i = (x - 0.5).round();
            if (x - 0.5 - i).abs() < 1e-6 && i >= 0.0 {
                labels.get(i as usize).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;

    for (i, bar) in bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = i as f64;
        chart
            .draw_series(std::iter::once(Rectangle::new(
                [(x + 0.15, 0.0), (x + 0.85, bar.value)],
                color.filled(),
            )))
            .map_err(plot_err)?;
        chart
            .draw_series(std::iter::once(ErrorBar::new_vertical(
                x + 0.5,
                bar.value - bar.error,
                bar.value,
                bar.value + bar.error,
                BLACK.stroke_width(2),
                12,
            )))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}
