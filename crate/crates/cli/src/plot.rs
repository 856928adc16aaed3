//! Mean metric curves rendered to SVG.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use embal_core::harness::EpisodeRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Steps,
    Annotations,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "steps" => Ok(Axis::Steps),
            "annotations" => Ok(Axis::Annotations),
            _ => Err(format!("axis must be steps or annotations, got `{s}`")),
        }
    }
}

/// mIoU of one episode at `x`: the latest curve point not beyond `x`.
fn value_at(r: &EpisodeRecord, axis: Axis, x: usize) -> Option<f64> {
    let key = |p: &embal_core::harness::CurvePoint| match axis {
        Axis::Steps => p.step,
        Axis::Annotations => p.n_annotate,
    };
    let end = match axis {
        Axis::Steps => r.n_steps,
        Axis::Annotations => r.n_annotate,
    };
    if x > end {
        return None;
    }
    r.curve.iter().rev().find(|p| key(p) <= x).map(|p| p.miou)
}

/// Per-method mean curves over the x values each method reaches in every
/// one of its episodes.
pub fn mean_curves(records: &[EpisodeRecord], axis: Axis) -> BTreeMap<String, Vec<(usize, f64)>> {
    let mut by_method: BTreeMap<String, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method.clone()).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(m, rs)| {
            let stride = if axis == Axis::Steps {
                rs[0].config.curve_every.max(1)
            } else {
                1
            };
            let mut pts = Vec::new();
            let mut x = 0;
            loop {
                let vals: Vec<f64> = rs.iter().filter_map(|r| value_at(r, axis, x)).collect();
                if vals.len() < rs.len() {
                    break;
                }
                pts.push((x, vals.iter().sum::<f64>() / vals.len() as f64));
                x += stride;
            }
            (m, pts)
        })
        .collect()
}

pub fn plot_curves(records: &[EpisodeRecord], axis: Axis, out: &Path) -> Result<()> {
    let curves = mean_curves(records, axis);
    let x_max = curves
        .values()
        .flat_map(|c| c.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(1);
    let y_max = curves
        .values()
        .flat_map(|c| c.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(0.1)
        * 1.1;

    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0..x_max, 0.0..y_max)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc(if axis == Axis::Steps {
            "steps"
        } else {
            "annotations"
        })
        .y_desc("mIoU")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (i, (method, pts)) in curves.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(method.as_str())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}
