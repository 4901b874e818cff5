//! Delta as a function of epsilon, for a fixed pmf or along the calibrated family.

use std::io::Write;

use serde::Serialize;

use crate::accounting::{best_delta_numeric, delta_of_epsilon, GammaGrid};
use crate::calibration::{calibrated_delta, calibrated_pmf, KappaRule};
use crate::error::{Error, Result};
use crate::format_f64;
use crate::noise::pmf_from_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSweepMode {
    /// One pmf with shape exponent `gamma` for every epsilon.
    FixedGamma(f64),
    /// The calibrated pmf for each epsilon.
    Calibrated(KappaRule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSweep {
    pub d: u32,
    pub mode: DeltaSweepMode,
    pub epsilons: Vec<f64>,
    /// Grid for the numeric minimum column; `None` leaves the column empty.
    pub numeric_grid: Option<GammaGrid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSweepRow {
    pub epsilon: f64,
    pub delta_analytical: f64,
    pub delta_numeric_min: Option<f64>,
    #[serde(rename = "D")]
    pub d: u32,
    pub gamma: f64,
    #[serde(rename = "V")]
    pub variance: f64,
}

/// One row per epsilon, in ascending epsilon order.
pub fn delta_sweep(sweep: &DeltaSweep) -> Result<Vec<DeltaSweepRow>> {
    if sweep.epsilons.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut epsilons = sweep.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    let fixed = match sweep.mode {
        DeltaSweepMode::FixedGamma(gamma) => Some(pmf_from_gamma(sweep.d, gamma)?),
        DeltaSweepMode::Calibrated(_) => None,
    };
    epsilons
        .into_iter()
        .map(|epsilon| {
            let (delta, gamma, variance) = match (&fixed, sweep.mode) {
                (Some(pmf), _) => (
                    delta_of_epsilon(pmf, epsilon)?.delta,
                    pmf.gamma(),
                    pmf.variance(),
                ),
                (None, DeltaSweepMode::Calibrated(rule)) => {
                    let kappa = rule.kappa(epsilon, sweep.d)?;
                    let pmf = calibrated_pmf(epsilon, sweep.d, kappa)?;
                    (
                        calibrated_delta(epsilon, sweep.d, kappa)?,
                        pmf.gamma(),
                        pmf.variance(),
                    )
                }
                (None, DeltaSweepMode::FixedGamma(_)) => unreachable!("fixed pmf built above"),
            };
            let numeric = sweep
                .numeric_grid
                .map(|grid| best_delta_numeric(sweep.d, epsilon, &grid).map(|o| o.point.delta))
                .transpose()?;
            Ok(DeltaSweepRow {
                epsilon,
                delta_analytical: delta,
                delta_numeric_min: numeric,
                d: sweep.d,
                gamma,
                variance,
            })
        })
        .collect()
}

pub const DELTA_SWEEP_CSV_HEADER: [&str; 6] = [
    "epsilon",
    "delta_analytical",
    "delta_numeric_min",
    "D",
    "gamma",
    "V",
];

/// Writes rows as CSV; a missing numeric minimum is an empty field.
pub fn write_delta_sweep_csv<W: Write>(rows: &[DeltaSweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DELTA_SWEEP_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.epsilon),
            format_f64(r.delta_analytical),
            r.delta_numeric_min.map(format_f64).unwrap_or_default(),
            r.d.to_string(),
            format_f64(r.gamma),
            format_f64(r.variance),
        ])?;
    }
    w.flush()
}
