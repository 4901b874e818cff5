//! Integer lookup-table sampling.
//!
//! The cmf of the noise is scaled by KEYSIZE and rounded up, giving a table of
//! `2D + 1` non-decreasing integers ending at KEYSIZE. A cell key `k` maps to
//! the smallest `z` whose entry exceeds `k`. If two consecutive entries are
//! equal the corresponding noise value can never be drawn and the table is
//! flagged as lacking full support.

use serde::{Deserialize, Serialize};

use crate::cellkey::{keysize, CellKey};
use crate::error::{invalid, Error, Result};
use crate::noise::NoisePmf;

const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    d: u32,
    keysize_log2: u8,
    cumulative: Vec<u64>,
    source_pmf_digest: String,
    full_support: bool,
}

/// A noise value drawn from a lookup table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Sample(pub i64);

pub fn build_lookup(pmf: &NoisePmf, keysize_log2: u8) -> Result<LookupTable> {
    LookupTable::from_masses(pmf.masses(), keysize_log2, pmf.digest())
}

/// True iff every value of the support has a non-empty key interval.
pub fn check_full_support(table: &LookupTable) -> bool {
    strictly_increasing(&table.cumulative)
}

fn strictly_increasing(cumulative: &[u64]) -> bool {
    let mut prev = 0;
    for &c in cumulative {
        if c <= prev {
            return false;
        }
        prev = c;
    }
    true
}

impl LookupTable {
    /// Builds a table from masses on `[-D, D]`.
    ///
    /// Masses are accumulated from `-D` upward; `ceil(cmf * KEYSIZE)` is exact
    /// because scaling by a power of two is exact in binary64. The last entry
    /// is pinned to KEYSIZE.
    pub fn from_masses(
        masses: &[f64],
        keysize_log2: u8,
        source_pmf_digest: String,
    ) -> Result<Self> {
        let ks = keysize(keysize_log2)?;
        if masses.len() < 3 || masses.len().is_multiple_of(2) {
            return Err(invalid("masses", "need 2D + 1 masses with D >= 1"));
        }
        if masses.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("masses", "masses must be finite and non-negative"));
        }
        let scale = ks as f64;
        let mut cmf = 0.0;
        let mut cumulative: Vec<u64> = masses
            .iter()
            .map(|&p| {
                cmf += p;
                ((cmf * scale).ceil() as u64).min(ks)
            })
            .collect();
        *cumulative.last_mut().expect("non-empty") = ks;
        let full_support = strictly_increasing(&cumulative);
        Ok(Self {
            d: ((masses.len() - 1) / 2) as u32,
            keysize_log2,
            cumulative,
            source_pmf_digest,
            full_support,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn keysize_log2(&self) -> u8 {
        self.keysize_log2
    }

    pub fn keysize(&self) -> u64 {
        1u64 << self.keysize_log2
    }

    /// Entries for `z = -D..=D`.
    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    /// Entry at `z`, with 0 below the support and KEYSIZE above it.
    pub fn cumulative_at(&self, z: i64) -> u64 {
        let d = i64::from(self.d);
        if z < -d {
            0
        } else if z > d {
            self.keysize()
        } else {
            self.cumulative[(z + d) as usize]
        }
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn source_pmf_digest(&self) -> &str {
        &self.source_pmf_digest
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.document()).expect("table document serialises")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("table document serialises")
    }

    /// Parses and validates a table document.
    pub fn from_json(text: &str) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed {
            what: "lookup table",
            reason,
        };
        let doc: TableDocument =
            serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        if doc.version != TABLE_VERSION {
            return Err(malformed(format!("unsupported version {}", doc.version)));
        }
        let ks = keysize(doc.keysize_log2)?;
        if doc.d == 0 || doc.cumulative.len() != 2 * doc.d as usize + 1 {
            return Err(malformed(format!(
                "expected 2D + 1 = {} entries, found {}",
                2 * u64::from(doc.d) + 1,
                doc.cumulative.len()
            )));
        }
        if doc.cumulative.windows(2).any(|w| w[0] > w[1]) {
            return Err(malformed("entries must be non-decreasing".into()));
        }
        if *doc.cumulative.last().expect("non-empty") != ks {
            return Err(malformed("last entry must equal KEYSIZE".into()));
        }
        let full_support = strictly_increasing(&doc.cumulative);
        if full_support != doc.full_support {
            return Err(malformed(
                "full_support flag disagrees with the entries".into(),
            ));
        }
        Ok(Self {
            d: doc.d,
            keysize_log2: doc.keysize_log2,
            cumulative: doc.cumulative,
            source_pmf_digest: doc.source_pmf_digest,
            full_support,
        })
    }

    fn document(&self) -> TableDocument {
        TableDocument {
            version: TABLE_VERSION,
            d: self.d,
            keysize_log2: self.keysize_log2,
            full_support: self.full_support,
            source_pmf_digest: self.source_pmf_digest.clone(),
            cumulative: self.cumulative.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TableDocument {
    version: u32,
    #[serde(rename = "D")]
    d: u32,
    keysize_log2: u8,
    full_support: bool,
    source_pmf_digest: String,
    cumulative: Vec<u64>,
}

/// Noise value for `cell_key`: `z` such that `c(z - 1) <= key < c(z)`.
pub fn sample(table: &LookupTable, cell_key: CellKey) -> Result<Sample> {
    if !table.full_support {
        return Err(Error::InsufficientSupport {
            d: table.d,
            keysize_log2: table.keysize_log2,
        });
    }
    let key = cell_key.value();
    if key >= table.keysize() {
        return Err(invalid(
            "cell_key",
            format!("{key} is outside [0, 2^{})", table.keysize_log2),
        ));
    }
    let index = table.cumulative.partition_point(|&c| c <= key);
    Ok(Sample(index as i64 - i64::from(table.d)))
}

/// Adds the noise drawn for `cell_key` to a true count of at least `D`.
pub fn perturb(true_count: u64, table: &LookupTable, cell_key: CellKey) -> Result<u64> {
    if true_count < u64::from(table.d) {
        return Err(Error::CountBelowSupport {
            count: true_count,
            d: table.d,
        });
    }
    let noise = sample(table, cell_key)?.0;
    Ok(true_count
        .checked_add_signed(noise)
        .expect("count >= D keeps the result non-negative"))
}
