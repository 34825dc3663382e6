use plotters::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::InternalConsistency(format!("plotting failed: {e}"))
}

/// Renders the series as an SVG line chart. With `log_y` nonpositive values are dropped.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> Result<String> {
    let keep = |y: f64| y.is_finite() && (!log_y || y > 0.0);
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && keep(p.1));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::invalid("nothing to plot"));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 /= 1.5;
        y1 *= 1.5;
    } else {
        let pad = 0.05 * (y1 - y0).max(y1.abs()).max(1e-12);
        y0 -= pad;
        y1 += pad;
    }

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut builder = ChartBuilder::on(&root);
        builder.caption(title, ("sans-serif", 22)).margin(12).x_label_area_size(40).y_label_area_size(70);
        let colors = |i: usize| Palette99::pick(i).to_rgba();
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
                for (i, s) in series.iter().enumerate() {
                    let color = colors(i);
                    let data: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| keep(p.1)).collect();
                    chart
                        .draw_series(LineSeries::new(data.clone(), color.stroke_width(2)))
                        .map_err(plot_err)?
                        .label(s.name.clone())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
                    chart.draw_series(data.into_iter().map(|p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }};
        }
        if log_y {
            draw!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale()).map_err(plot_err)?);
        } else {
            draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?);
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}
