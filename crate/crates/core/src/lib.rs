//! Maximum-entropy integer perturbation noise for counting queries.
//!
//! The noise takes values in `[-D, D]` with `p(z) = C e^{-gamma z^2}`. The
//! crate covers the full path from a privacy target to a perturbed count:
//!
//! * [`noise`] solves for `gamma` given a variance and builds the pmf;
//! * [`accounting`] gives its exact `(epsilon, delta)` for sensitivity 1;
//! * [`calibration`] picks `D` and `gamma` that meet a target delta;
//! * [`cellkey`] derives reproducible cell keys from record keys;
//! * [`sampler`] turns a pmf into an integer lookup table indexed by cell key;
//! * [`audit`] measures what quantization does to the utility and privacy.

pub mod accounting;
pub mod audit;
pub mod calibration;
pub mod cellkey;
pub mod error;
pub mod grid;
pub mod noise;
pub mod sampler;
pub mod sweep;

pub use accounting::{
    best_delta_numeric, delta_lower_bound, delta_of_epsilon, delta_oracle, delta_oracle_masses,
    violation_set, DpPoint, GammaGrid, Provenance, ViolationSet,
};
pub use audit::{
    audit_table, bias_variance, delta_q, epsilon_q, keysize_sweep, quantized_pmf, KeysizeSweep,
    QuantAudit, QuantizedPmf,
};
pub use calibration::{design_noise, CalibrationInput, CalibrationResult, KappaRule};
pub use cellkey::{aggregate_cell_key, CellKey, CellKeyConfig, CellKeyScheme, RecordKey};
pub use error::{Error, Result};
pub use noise::{pmf_from_gamma, solve_gamma, variance_bound, NoiseParams, NoisePmf};
pub use sampler::{build_lookup, perturb, sample, LookupTable, Sample};

/// Formats a number with 17 significant digits, or `inf` / `-inf` / `nan`.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}
