//! Choosing noise parameters from a privacy target.
//!
//! For a fixed `(epsilon, D)` the plateau of the closed-form delta is avoided
//! by tying the shape exponent to epsilon: any `gamma` in
//! `[epsilon / (2D + 1), epsilon / (2D - 1))` makes the violation set exactly
//! `{-D}`, so delta collapses to the single endpoint mass. The calibrated
//! family uses `gamma = epsilon / (2D - 1) - kappa` for a small positive
//! offset `kappa <= 2 epsilon / (4D^2 - 1)`.

use serde::Serialize;

use crate::error::{check_epsilon, invalid, Error, Result};
use crate::noise::{check_d, pmf_from_gamma, tail_sum, variance_from_gamma, weight, NoisePmf};

/// Largest admissible offset `2 epsilon / (4D^2 - 1)`.
pub fn kappa_max(epsilon: f64, d: u32) -> f64 {
    let d = f64::from(d);
    2.0 * epsilon / (4.0 * d * d - 1.0)
}

/// How the offset `kappa` below `epsilon / (2D - 1)` is chosen for each probed `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    /// `kappa = fraction * 2 epsilon / (4D^2 - 1)`, with `0 < fraction <= 1`.
    FractionOfMax(f64),
    /// The same `kappa` for every `D`; rejected once it exceeds the admissible maximum.
    Fixed(f64),
}

impl Default for KappaRule {
    fn default() -> Self {
        KappaRule::FractionOfMax(0.1)
    }
}

impl KappaRule {
    pub fn kappa(&self, epsilon: f64, d: u32) -> Result<f64> {
        check_epsilon(epsilon)?;
        check_d(d)?;
        let kappa = match *self {
            KappaRule::FractionOfMax(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(invalid(
                        "kappa_rule",
                        format!("fraction must lie in (0, 1], got {f}"),
                    ));
                }
                f * kappa_max(epsilon, d)
            }
            KappaRule::Fixed(k) => k,
        };
        check_kappa(epsilon, d, kappa)?;
        Ok(kappa)
    }
}

fn check_kappa(epsilon: f64, d: u32, kappa: f64) -> Result<()> {
    let max = kappa_max(epsilon, d);
    if kappa > 0.0 && kappa <= max {
        Ok(())
    } else {
        Err(invalid(
            "kappa",
            format!("must lie in (0, {max:e}] for epsilon = {epsilon}, D = {d}; got {kappa:e}"),
        ))
    }
}

/// Half-open interval `[lo, hi)` of shape exponents whose violation set is `{-D}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRange {
    pub lo: f64,
    pub hi: f64,
}

impl GammaRange {
    pub fn contains(&self, gamma: f64) -> bool {
        self.lo <= gamma && gamma < self.hi
    }
}

pub fn gamma_range(epsilon: f64, d: u32) -> Result<GammaRange> {
    check_epsilon(epsilon)?;
    check_d(d)?;
    let d = f64::from(d);
    Ok(GammaRange {
        lo: epsilon / (2.0 * d + 1.0),
        hi: epsilon / (2.0 * d - 1.0),
    })
}

/// Interval `(lo, hi]` of variances matching [`GammaRange`]; variance decreases in gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRange {
    pub lo: f64,
    pub hi: f64,
}

impl VarianceRange {
    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v <= self.hi
    }
}

pub fn variance_range(epsilon: f64, d: u32) -> Result<VarianceRange> {
    let gammas = gamma_range(epsilon, d)?;
    Ok(VarianceRange {
        lo: variance_from_gamma(d, gammas.hi)?,
        hi: variance_from_gamma(d, gammas.lo)?,
    })
}

/// Shape exponent of the calibrated family.
pub fn calibrated_gamma(epsilon: f64, d: u32, kappa: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_d(d)?;
    check_kappa(epsilon, d, kappa)?;
    Ok(epsilon / (2.0 * f64::from(d) - 1.0) - kappa)
}

/// Max-entropy pmf with `gamma = epsilon / (2D - 1) - kappa`.
pub fn calibrated_pmf(epsilon: f64, d: u32, kappa: f64) -> Result<NoisePmf> {
    pmf_from_gamma(d, calibrated_gamma(epsilon, d, kappa)?)
}

/// Delta of the calibrated pmf, `e^{-gamma D^2} / (2 sum_{z=1..D} e^{-gamma z^2} + 1)`.
///
/// Evaluated in the same order as [`pmf_from_gamma`], so it equals the pmf's
/// mass at `-D` bit for bit.
pub fn calibrated_delta(epsilon: f64, d: u32, kappa: f64) -> Result<f64> {
    let gamma = calibrated_gamma(epsilon, d, kappa)?;
    let c = 1.0 / (2.0 * tail_sum(gamma, d) + 1.0);
    Ok(c * weight(gamma, d))
}

/// Target for [`design_noise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationInput {
    pub epsilon: f64,
    pub delta_target: f64,
    pub kappa_rule: KappaRule,
    pub d_max: u32,
}

impl CalibrationInput {
    pub const DEFAULT_D_MAX: u32 = 200;

    pub fn new(epsilon: f64, delta_target: f64) -> Self {
        Self {
            epsilon,
            delta_target,
            kappa_rule: KappaRule::default(),
            d_max: Self::DEFAULT_D_MAX,
        }
    }
}

/// Parameters chosen by [`design_noise`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub epsilon: f64,
    pub delta_target: f64,
    #[serde(rename = "D_star")]
    pub d_star: u32,
    pub kappa: f64,
    pub gamma: f64,
    #[serde(rename = "V")]
    pub variance: f64,
    pub delta_achieved: f64,
    pub pmf: NoisePmf,
}

/// Smallest support half-width whose calibrated delta meets the target.
///
/// Probes `D = 1, 2, ..., d_max` in order and stops at the first hit.
pub fn design_noise(input: &CalibrationInput) -> Result<CalibrationResult> {
    let CalibrationInput {
        epsilon,
        delta_target,
        kappa_rule,
        d_max,
    } = *input;
    check_epsilon(epsilon)?;
    if !(delta_target > 0.0 && delta_target < 1.0) {
        return Err(invalid(
            "delta_target",
            format!("must lie in (0, 1), got {delta_target}"),
        ));
    }
    check_d(d_max).map_err(|_| invalid("d_max", "must be >= 1"))?;

    let mut best = (1, f64::INFINITY);
    for d in 1..=d_max {
        let kappa = kappa_rule.kappa(epsilon, d)?;
        let delta = calibrated_delta(epsilon, d, kappa)?;
        if delta < best.1 {
            best = (d, delta);
        }
        if delta <= delta_target {
            let pmf = calibrated_pmf(epsilon, d, kappa)?;
            return Ok(CalibrationResult {
                epsilon,
                delta_target,
                d_star: d,
                kappa,
                gamma: pmf.gamma(),
                variance: pmf.variance(),
                delta_achieved: delta,
                pmf,
            });
        }
    }
    Err(Error::TargetUnreachable {
        delta_target,
        d_max,
        best_d: best.0,
        best_delta: best.1,
    })
}
