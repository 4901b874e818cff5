//! Inclusive linear grids.

use crate::error::{invalid, Error, Result};

/// `start, start + step, ...` up to and including `stop` (within `1e-9` steps).
///
/// Points are rounded to twelve decimals so that decimal grids such as
/// `0.1, 0.2, ..., 2.5` come out as the nearest binary64 of each decimal.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(invalid("grid", "bounds and step must be finite"));
    }
    if step <= 0.0 {
        return Err(invalid("grid", "step must be > 0"));
    }
    if stop < start {
        return Err(Error::EmptyGrid);
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| snap(start + k as f64 * step)).collect())
}

fn snap(x: f64) -> f64 {
    let scaled = (x * 1e12).round() / 1e12;
    if (scaled - x).abs() <= 1e-12 * x.abs().max(1.0) {
        scaled
    } else {
        x
    }
}
