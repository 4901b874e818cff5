//! Utility and privacy of the quantized noise actually produced by a lookup table.
//!
//! The table defines a pmf with integer numerators over KEYSIZE. Its bias,
//! variance and `(epsilon, delta)` are computed exactly from those numerators;
//! floating point enters only in the final division or logarithm.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::calibration::{calibrated_delta, calibrated_pmf, KappaRule};
use crate::error::{Error, Result};
use crate::format_f64;
use crate::sampler::{build_lookup, LookupTable};

/// Pmf realised by a lookup table: `numerators[z + D] / KEYSIZE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedPmf {
    d: u32,
    keysize_log2: u8,
    numerators: Vec<u64>,
    full_support: bool,
}

impl QuantizedPmf {
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn keysize_log2(&self) -> u8 {
        self.keysize_log2
    }

    pub fn keysize(&self) -> u64 {
        1u64 << self.keysize_log2
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn mass(&self, z: i64) -> f64 {
        let d = i64::from(self.d);
        if (-d..=d).contains(&z) {
            self.numerators[(z + d) as usize] as f64 / self.keysize() as f64
        } else {
            0.0
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let ks = self.keysize() as f64;
        self.numerators.iter().map(|&n| n as f64 / ks).collect()
    }
}

pub fn quantized_pmf(table: &LookupTable) -> QuantizedPmf {
    let mut prev = 0;
    let numerators = table
        .cumulative()
        .iter()
        .map(|&c| {
            let n = c - prev;
            prev = c;
            n
        })
        .collect();
    QuantizedPmf {
        d: table.d(),
        keysize_log2: table.keysize_log2(),
        numerators,
        full_support: table.full_support(),
    }
}

/// Bias `sum z p(z)` and variance `sum z^2 p(z) - bias^2` of the quantized pmf.
///
/// Both are formed as exact integer ratios before the single conversion to
/// binary64.
pub fn bias_variance(q: &QuantizedPmf) -> (f64, f64) {
    let d = i128::from(q.d);
    let ks = i128::from(q.keysize());
    let (mut first, mut second) = (0i128, 0i128);
    for (i, &n) in q.numerators.iter().enumerate() {
        let z = i as i128 - d;
        first += z * i128::from(n);
        second += z * z * i128::from(n);
    }
    let bias = first as f64 / ks as f64;
    let variance = (ks * second - first * first) as f64 / (ks as f64 * ks as f64);
    (bias, variance)
}

/// Smallest epsilons bounding the consecutive-mass ratios of a quantized pmf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEpsilon {
    /// `max_z ln(p(z) / p(z - 1))` over `z in [-D + 1, D]`, floored at 0.
    pub forward: f64,
    /// Larger of `forward` and the reverse-direction maximum `ln(p(z - 1) / p(z))`.
    pub two_sided: f64,
}

/// Compares `a / b` with `c / d` exactly; `x / 0` with `x > 0` is infinite.
fn cmp_ratio(a: u64, b: u64, c: u64, d: u64) -> Ordering {
    match (b, d) {
        (0, 0) => Ordering::Equal,
        (0, _) => Ordering::Greater,
        (_, 0) => Ordering::Less,
        _ => (u128::from(a) * u128::from(d)).cmp(&(u128::from(c) * u128::from(b))),
    }
}

fn max_log_ratio(pairs: impl Iterator<Item = (u64, u64)>) -> f64 {
    // 0/0 positions carry no mass on either side and are skipped.
    let best = pairs
        .filter(|&(num, den)| num > 0 || den > 0)
        .max_by(|&(a, b), &(c, d)| cmp_ratio(a, b, c, d));
    match best {
        None => 0.0,
        Some((_, 0)) => f64::INFINITY,
        Some((num, den)) => (num as f64 / den as f64).ln().max(0.0),
    }
}

/// Ratio epsilons, allowing infinite values when interior masses vanish.
pub fn ratio_epsilons(q: &QuantizedPmf) -> RatioEpsilon {
    let pairs = || q.numerators.windows(2).map(|w| (w[1], w[0]));
    let forward = max_log_ratio(pairs());
    let backward = max_log_ratio(pairs().map(|(hi, lo)| (lo, hi)));
    RatioEpsilon {
        forward,
        two_sided: forward.max(backward),
    }
}

/// Effective epsilon of a full-support quantized pmf.
pub fn epsilon_q(q: &QuantizedPmf) -> Result<RatioEpsilon> {
    if !q.full_support {
        return Err(Error::InsufficientSupport {
            d: q.d,
            keysize_log2: q.keysize_log2,
        });
    }
    Ok(ratio_epsilons(q))
}

/// `max(p(-D), p(D))`.
pub fn delta_q(q: &QuantizedPmf) -> f64 {
    let first = q.numerators[0];
    let last = *q.numerators.last().expect("non-empty");
    first.max(last) as f64 / q.keysize() as f64
}

/// Post-quantization metrics for one design point and key size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantAudit {
    #[serde(rename = "D")]
    pub d: u32,
    pub keysize_log2: u8,
    pub epsilon_design: f64,
    pub delta_design: f64,
    pub variance_design: f64,
    pub full_support: bool,
    pub bias_q: f64,
    pub variance_q: f64,
    /// `(V^Q - V) / V`.
    pub var_rel_err: f64,
    /// Forward ratio epsilon; infinite without full support.
    pub epsilon_q: f64,
    pub epsilon_q_twosided: f64,
    pub delta_q: f64,
}

/// Audits a table against the design it was built from.
///
/// Without full support `epsilon_q` is infinite; `epsilon_q_twosided` keeps
/// whatever the ratios give.
pub fn audit_table(
    table: &LookupTable,
    epsilon_design: f64,
    delta_design: f64,
    variance_design: f64,
) -> QuantAudit {
    let q = quantized_pmf(table);
    let (bias_q, variance_q) = bias_variance(&q);
    let eps = ratio_epsilons(&q);
    QuantAudit {
        d: q.d,
        keysize_log2: q.keysize_log2,
        epsilon_design,
        delta_design,
        variance_design,
        full_support: q.full_support,
        bias_q,
        variance_q,
        var_rel_err: (variance_q - variance_design) / variance_design,
        epsilon_q: if q.full_support {
            eps.forward
        } else {
            f64::INFINITY
        },
        epsilon_q_twosided: eps.two_sided,
        delta_q: delta_q(&q),
    }
}

/// Grid of calibrated designs crossed with key sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct KeysizeSweep {
    pub d: u32,
    pub epsilons: Vec<f64>,
    pub keysize_log2s: Vec<u8>,
    pub kappa_rule: KappaRule,
}

impl Default for KeysizeSweep {
    fn default() -> Self {
        Self {
            d: 10,
            epsilons: (1..=25).map(|i| f64::from(i) / 10.0).collect(),
            keysize_log2s: vec![8, 16, 32],
            kappa_rule: KappaRule::default(),
        }
    }
}

/// Audits every `(KEYSIZE, epsilon)` cell, ordered by key size then epsilon.
///
/// Cells without full support are kept in the output with the flag cleared.
pub fn keysize_sweep(sweep: &KeysizeSweep) -> Result<Vec<QuantAudit>> {
    if sweep.epsilons.is_empty() || sweep.keysize_log2s.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut epsilons = sweep.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    let mut keysizes = sweep.keysize_log2s.clone();
    keysizes.sort_unstable();

    let designs = epsilons
        .iter()
        .map(|&eps| {
            let kappa = sweep.kappa_rule.kappa(eps, sweep.d)?;
            let pmf = calibrated_pmf(eps, sweep.d, kappa)?;
            let delta = calibrated_delta(eps, sweep.d, kappa)?;
            Ok((eps, delta, pmf))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(designs.len() * keysizes.len());
    for &log2 in &keysizes {
        for (eps, delta, pmf) in &designs {
            let table = build_lookup(pmf, log2)?;
            rows.push(audit_table(&table, *eps, *delta, pmf.variance()));
        }
    }
    Ok(rows)
}

pub const AUDIT_CSV_HEADER: [&str; 10] = [
    "epsilon_design",
    "delta_design",
    "keysize_log2",
    "full_support",
    "bias_q",
    "variance_q",
    "var_rel_err",
    "epsilon_q",
    "epsilon_q_twosided",
    "delta_q",
];

/// Writes sweep rows as CSV. Epsilons of cells without full support are `inf`.
pub fn write_audit_csv<W: Write>(rows: &[QuantAudit], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.epsilon_design),
            format_f64(r.delta_design),
            r.keysize_log2.to_string(),
            r.full_support.to_string(),
            format_f64(r.bias_q),
            format_f64(r.variance_q),
            format_f64(r.var_rel_err),
            format_f64(r.epsilon_q),
            format_f64(r.epsilon_q_twosided),
            format_f64(r.delta_q),
        ])?;
    }
    w.flush()
}
