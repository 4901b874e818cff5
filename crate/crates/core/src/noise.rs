//! Maximum-entropy symmetric integer noise.
//!
//! Among all pmfs on `[-D, D]` with zero mean and a variance constraint, the
//! entropy maximiser has the discrete-Gaussian shape `p(z) = C exp(-gamma z^2)`.
//! This module builds that pmf from either `(D, gamma)` or `(D, V)`. The
//! latter requires the root of the sparse polynomial
//!
//! ```text
//! f(x) = sum_{z=1..D} (2z^2 - 2V) x^(z^2) - V,   x = exp(-gamma)
//! ```
//!
//! on `(0, 1)`, which exists exactly when `0 < V < D(D+1)/3`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result, VarianceBoundSide};

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_WIDTH: f64 = 1e-15;
const RESIDUAL_TOL: f64 = 1e-13;

/// Support half-width and shape exponent of the noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    d: u32,
    gamma: f64,
}

impl NoiseParams {
    pub fn new(d: u32, gamma: f64) -> Result<Self> {
        check_d(d)?;
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid(
                "gamma",
                format!("must be finite and >= 0, got {gamma}"),
            ));
        }
        Ok(Self { d, gamma })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Exclusive upper bound `D(D+1)/3` on the variance of a pmf that decreases in `|z|`.
///
/// The bound is attained by the uniform pmf on `[-D, D]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBound {
    pub d: u32,
    pub upper: f64,
}

impl VarianceBound {
    /// True when `0 < v < upper`.
    pub fn admits(&self, v: f64) -> bool {
        v > 0.0 && v < self.upper
    }
}

pub fn variance_bound(d: u32) -> Result<VarianceBound> {
    check_d(d)?;
    let d_f = f64::from(d);
    Ok(VarianceBound {
        d,
        upper: d_f * (d_f + 1.0) / 3.0,
    })
}

/// Unnormalised weight `exp(-gamma z^2)`.
pub(crate) fn weight(gamma: f64, z: u32) -> f64 {
    let z2 = f64::from(z) * f64::from(z);
    (-gamma * z2).exp()
}

/// `sum_{z=1..D} exp(-gamma z^2)`, accumulated from `z = D` down.
pub(crate) fn tail_sum(gamma: f64, d: u32) -> f64 {
    (1..=d).rev().map(|z| weight(gamma, z)).sum()
}

pub(crate) fn check_d(d: u32) -> Result<()> {
    if d >= 1 {
        Ok(())
    } else {
        Err(invalid("D", "support half-width must be >= 1"))
    }
}

/// Value of the variance polynomial at `x` together with the sum of the
/// magnitudes of its terms (used to scale the residual test).
fn variance_polynomial(d: u32, v: f64, x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for z in (1..=d).rev() {
        let z2 = f64::from(z) * f64::from(z);
        let term = (2.0 * z2 - 2.0 * v) * x.powf(z2);
        value += term;
        magnitude += term.abs();
    }
    (value - v, magnitude + v)
}

#[cfg(debug_assertions)]
fn sign_changes_on_grid(d: u32, v: f64) -> usize {
    let mut changes = 0;
    let mut prev = variance_polynomial(d, v, 0.0).0.signum();
    for k in 1..=1000 {
        let s = variance_polynomial(d, v, f64::from(k) / 1000.0).0;
        if s == 0.0 {
            continue;
        }
        if s.signum() != prev {
            changes += 1;
            prev = s.signum();
        }
    }
    changes
}

/// Finds the shape exponent `gamma` whose max-entropy pmf on `[-D, D]` has variance `v`.
///
/// Bisects the variance polynomial in `x = exp(-gamma)` on `(0, 1)`. The
/// iteration stops once the residual is below `1e-13` relative to the size of
/// the polynomial's terms, or when the bracket is narrower than `1e-15` and
/// can no longer be split in binary64.
pub fn solve_gamma(d: u32, v: f64) -> Result<f64> {
    let bound = variance_bound(d)?;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::VarianceOutOfRange {
            d,
            variance: v,
            bound: VarianceBoundSide::Lower,
            upper: bound.upper,
        });
    }
    if v >= bound.upper {
        return Err(Error::VarianceOutOfRange {
            d,
            variance: v,
            bound: VarianceBoundSide::Upper,
            upper: bound.upper,
        });
    }
    // Descartes' rule of signs gives a single positive root; re-checked on a grid in debug builds.
    #[cfg(debug_assertions)]
    debug_assert_eq!(
        sign_changes_on_grid(d, v),
        1,
        "variance polynomial root not unique"
    );

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut residual = f64::INFINITY;
    for _ in 0..BISECTION_MAX_ITER {
        let x = 0.5 * (lo + hi);
        let (fx, magnitude) = variance_polynomial(d, v, x);
        residual = fx.abs();
        if residual <= RESIDUAL_TOL * magnitude.max(1.0) {
            return Ok(-x.ln());
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_WIDTH && (mid == lo || mid == hi) {
            return Ok(-x.ln());
        }
    }
    Err(Error::NonConvergence {
        iterations: BISECTION_MAX_ITER,
        residual,
    })
}

/// `V = sum 2 z^2 e^{-gamma z^2} / (2 sum e^{-gamma z^2} + 1)`, computed without building the pmf.
pub fn variance_from_gamma(d: u32, gamma: f64) -> Result<f64> {
    let params = NoiseParams::new(d, gamma)?;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for z in (1..=params.d).rev() {
        let w = weight(params.gamma, z);
        weighted += 2.0 * f64::from(z) * f64::from(z) * w;
        total += w;
    }
    Ok(weighted / (2.0 * total + 1.0))
}

/// Builds the pmf `C e^{-gamma z^2}` on `[-D, D]`.
pub fn pmf_from_gamma(d: u32, gamma: f64) -> Result<NoisePmf> {
    let params = NoiseParams::new(d, gamma)?;
    let d = params.d as usize;
    let c = 1.0 / (2.0 * tail_sum(params.gamma, params.d) + 1.0);
    // Masses for |z| = 0..=D.
    let half: Vec<f64> = (0..=params.d)
        .map(|z| c * weight(params.gamma, z))
        .collect();
    let mut masses = Vec::with_capacity(2 * d + 1);
    masses.extend(half.iter().rev());
    masses.extend(&half[1..]);

    let variance = half
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .map(|(z, p)| 2.0 * (z * z) as f64 * p)
        .sum();

    Ok(NoisePmf {
        params,
        c,
        masses,
        variance,
    })
}

/// Maximum-entropy symmetric pmf on `[-D, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePmf {
    params: NoiseParams,
    c: f64,
    masses: Vec<f64>,
    variance: f64,
}

impl NoisePmf {
    /// Solves for `gamma` from the variance and builds the pmf.
    pub fn from_variance(d: u32, v: f64) -> Result<Self> {
        pmf_from_gamma(d, solve_gamma(d, v)?)
    }

    pub fn params(&self) -> NoiseParams {
        self.params
    }

    pub fn d(&self) -> u32 {
        self.params.d
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    /// Normalising constant `C`, which is also the mass at zero.
    pub fn normaliser(&self) -> f64 {
        self.c
    }

    /// Masses for `z = -D..=D`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass at `z`; zero outside the support.
    pub fn mass(&self, z: i64) -> f64 {
        let d = i64::from(self.params.d);
        if (-d..=d).contains(&z) {
            self.masses[(z + d) as usize]
        } else {
            0.0
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .masses
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Serialises to the pmf JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.document()).expect("pmf document serialises")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("pmf document serialises")
    }

    /// Parses a pmf document, rebuilding the pmf from `(D, gamma)` and
    /// rejecting documents whose stored masses disagree with it.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PmfDocument = serde_json::from_str(text).map_err(|e| Error::Malformed {
            what: "pmf document",
            reason: e.to_string(),
        })?;
        let pmf = pmf_from_gamma(doc.d, doc.gamma)?;
        if doc.masses.len() != pmf.masses.len() {
            return Err(Error::Malformed {
                what: "pmf document",
                reason: format!(
                    "expected {} masses for D = {}, found {}",
                    pmf.masses.len(),
                    doc.d,
                    doc.masses.len()
                ),
            });
        }
        let agrees = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let consistent = agrees(doc.c, pmf.c)
            && agrees(doc.variance, pmf.variance)
            && doc
                .masses
                .iter()
                .zip(&pmf.masses)
                .all(|(&a, &b)| agrees(a, b));
        if !consistent {
            return Err(Error::Malformed {
                what: "pmf document",
                reason: "stored masses do not match (D, gamma)".into(),
            });
        }
        Ok(pmf)
    }

    /// SHA-256 of the compact JSON document, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    fn document(&self) -> PmfDocument {
        PmfDocument {
            d: self.params.d,
            gamma: self.params.gamma,
            c: self.c,
            variance: self.variance,
            masses: self.masses.clone(),
        }
    }
}

impl Serialize for NoisePmf {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.document().serialize(serializer)
    }
}

#[derive(Serialize, Deserialize)]
struct PmfDocument {
    #[serde(rename = "D")]
    d: u32,
    gamma: f64,
    #[serde(rename = "C")]
    c: f64,
    variance: f64,
    masses: Vec<f64>,
}
