//! Exact `(epsilon, delta)` accounting for a sensitivity-1 counting query.
//!
//! Neighbouring datasets shift the noisy count by one, so the privacy loss at
//! output `z` is the ratio `p(z) / p(z - 1)`. For the max-entropy pmf the set of
//! outputs whose ratio exceeds `e^epsilon` is the interval
//! `[-D, max(-D, floor(0.5 - epsilon / (2 gamma)))]`, which yields the closed
//! form in [`delta_of_epsilon`]. [`delta_oracle`] evaluates the same quantity by
//! brute force over every output and both shift directions.

use serde::Serialize;

use crate::error::{check_epsilon, invalid, Error, Result};
use crate::grid::linear_grid;
use crate::noise::{pmf_from_gamma, weight, NoisePmf};

/// How a [`DpPoint`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytical,
    Oracle,
    NumericSearch,
    PostQuantization,
}

/// An `(epsilon, delta)` guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub provenance: Provenance,
}

/// Noise values whose forward likelihood ratio exceeds `e^epsilon`.
///
/// Always an integer interval starting at `-D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViolationSet {
    pub lo: i64,
    pub hi: i64,
}

impl ViolationSet {
    pub fn contains(&self, z: i64) -> bool {
        (self.lo..=self.hi).contains(&z)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn members(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// `floor(0.5 - epsilon / (2 gamma))`, saturated just below `-D` so huge
/// quotients cannot overflow the integer conversion.
fn threshold_index(d: u32, gamma: f64, epsilon: f64) -> i64 {
    let floor = (0.5 - epsilon / (2.0 * gamma)).floor();
    floor.max(-f64::from(d) - 1.0) as i64
}

fn check_shaped(pmf: &NoisePmf) -> Result<()> {
    if pmf.gamma() > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "gamma",
            "the closed-form violation set needs gamma > 0; use delta_oracle for the uniform pmf",
        ))
    }
}

pub fn violation_set(pmf: &NoisePmf, epsilon: f64) -> Result<ViolationSet> {
    check_epsilon(epsilon)?;
    check_shaped(pmf)?;
    let lo = -i64::from(pmf.d());
    let hi = threshold_index(pmf.d(), pmf.gamma(), epsilon).max(lo);
    Ok(ViolationSet { lo, hi })
}

/// Closed-form delta of the max-entropy pmf at `epsilon`.
///
/// Equals `C e^{-gamma D^2}` on the plateau (`z* <= -D`), otherwise adds the
/// excess mass `C sum_{z=-D+1..z*} (e^{-gamma z^2} - e^epsilon e^{-gamma (z-1)^2})`.
pub fn delta_of_epsilon(pmf: &NoisePmf, epsilon: f64) -> Result<DpPoint> {
    let set = violation_set(pmf, epsilon)?;
    let (gamma, c) = (pmf.gamma(), pmf.normaliser());
    let e_eps = epsilon.exp();
    let w = |z: i64| weight(gamma, z.unsigned_abs() as u32);
    let mut delta = c * w(set.lo);
    for z in (set.lo + 1)..=set.hi {
        delta += c * (w(z) - e_eps * w(z - 1));
    }
    Ok(DpPoint {
        epsilon,
        delta,
        provenance: Provenance::Analytical,
    })
}

/// Shift direction of the neighbouring dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Compare `p(z)` with `p(z - 1)`.
    Forward,
    /// Compare `p(z)` with `p(z + 1)`.
    Backward,
}

/// `sum_z max(0, p(z) - e^epsilon p(z -/+ 1))` over a contiguous support, with
/// zero mass outside it.
///
/// The backward sum runs in mirror order so that symmetric masses give
/// bit-identical results in both directions.
pub fn directional_delta(masses: &[f64], epsilon: f64, direction: Direction) -> f64 {
    let e_eps = epsilon.exp();
    let excess = |p: f64, neighbour: f64| (p - e_eps * neighbour).max(0.0);
    match direction {
        Direction::Forward => {
            let mut prev = 0.0;
            let mut total = 0.0;
            for &p in masses {
                total += excess(p, prev);
                prev = p;
            }
            total
        }
        Direction::Backward => {
            let mut next = 0.0;
            let mut total = 0.0;
            for &p in masses.iter().rev() {
                total += excess(p, next);
                next = p;
            }
            total
        }
    }
}

/// Brute-force delta of any pmf on a contiguous integer support: the maximum
/// of the two directional sums.
pub fn delta_oracle_masses(masses: &[f64], epsilon: f64) -> Result<DpPoint> {
    check_epsilon(epsilon)?;
    let forward = directional_delta(masses, epsilon, Direction::Forward);
    let backward = directional_delta(masses, epsilon, Direction::Backward);
    Ok(DpPoint {
        epsilon,
        delta: forward.max(backward),
        provenance: Provenance::Oracle,
    })
}

pub fn delta_oracle(pmf: &NoisePmf, epsilon: f64) -> Result<DpPoint> {
    delta_oracle_masses(pmf.masses(), epsilon)
}

/// `p(-D)`, which every delta of this pmf is at least.
pub fn delta_lower_bound(pmf: &NoisePmf) -> f64 {
    pmf.mass(-i64::from(pmf.d()))
}

/// Linear grid of shape exponents, `lo, lo + step, ..., <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self {
            lo: 0.0001,
            hi: 0.3,
            step: 0.0001,
        }
    }
}

impl GammaGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.lo.is_nan() || self.lo <= 0.0 {
            return Err(invalid("gamma_grid", "lo must be > 0"));
        }
        linear_grid(self.lo, self.hi, self.step)
    }
}

/// Minimum delta found by the grid search and the shape exponent attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptimum {
    pub point: DpPoint,
    pub gamma: f64,
}

/// Smallest closed-form delta over a grid of shape exponents at fixed `D` and `epsilon`.
///
/// Ties resolve to the smallest `gamma`, so the result does not depend on the
/// order in which grid points are evaluated.
pub fn best_delta_numeric(d: u32, epsilon: f64, grid: &GammaGrid) -> Result<GridOptimum> {
    check_epsilon(epsilon)?;
    let mut best: Option<(f64, f64)> = None;
    for gamma in grid.points()? {
        let delta = delta_of_epsilon(&pmf_from_gamma(d, gamma)?, epsilon)?.delta;
        best = match best {
            Some((g, dl)) if dl < delta || (dl == delta && g <= gamma) => Some((g, dl)),
            _ => Some((gamma, delta)),
        };
    }
    let (gamma, delta) = best.ok_or(Error::EmptyGrid)?;
    Ok(GridOptimum {
        point: DpPoint {
            epsilon,
            delta,
            provenance: Provenance::NumericSearch,
        },
        gamma,
    })
}
