//! Record keys and cell keys.
//!
//! Every record carries a fixed pseudo-random 32-bit key. A table cell's key is
//! derived from the keys of the records it contains, so the same cell always
//! draws the same noise no matter how often it is requested.

use std::io::BufRead;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{invalid, Error, Result};

/// Largest prime below 2^32.
pub const DEFAULT_BIG_N: u64 = 4_294_967_291;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey(pub u32);

impl RecordKey {
    pub fn value(self) -> u32 {
        self.0
    }
}

/// Cell key in `[0, KEYSIZE)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey(u64);

impl CellKey {
    /// Wraps a raw key, checking it against the key size.
    pub fn new(value: u64, keysize_log2: u8) -> Result<Self> {
        let keysize = keysize(keysize_log2)?;
        if value < keysize {
            Ok(Self(value))
        } else {
            Err(invalid(
                "cell_key",
                format!("{value} is outside [0, 2^{keysize_log2})"),
            ))
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// `2^keysize_log2` for `keysize_log2` in `1..=32`.
pub fn keysize(keysize_log2: u8) -> Result<u64> {
    if (1..=32).contains(&keysize_log2) {
        Ok(1u64 << keysize_log2)
    } else {
        Err(invalid(
            "keysize_log2",
            format!("must lie in [1, 32], got {keysize_log2}"),
        ))
    }
}

/// How record keys are combined into a cell key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellKeyScheme {
    /// Byte `j` of every record key is summed modulo `big_n` into component `j`;
    /// the four components are XORed and reduced modulo KEYSIZE.
    #[default]
    ByteSums,
    /// Whole record keys are summed modulo `big_n`; the sum is cut into
    /// `keysize_log2`-bit chunks which are XORed together. Identical to
    /// XORing the four bytes of the sum when `keysize_log2 = 8`, and stays
    /// close to uniform for every key size.
    FoldedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellKeyConfig {
    keysize_log2: u8,
    big_n: u64,
    scheme: CellKeyScheme,
}

impl CellKeyConfig {
    pub fn new(keysize_log2: u8) -> Result<Self> {
        Self::with_modulus(keysize_log2, DEFAULT_BIG_N, CellKeyScheme::default())
    }

    pub fn with_modulus(keysize_log2: u8, big_n: u64, scheme: CellKeyScheme) -> Result<Self> {
        keysize(keysize_log2)?;
        if big_n <= 255 || big_n > u64::from(u32::MAX) + 1 || !is_prime(big_n) {
            return Err(invalid(
                "big_n",
                format!("must be a prime in (255, 2^32], got {big_n}"),
            ));
        }
        Ok(Self {
            keysize_log2,
            big_n,
            scheme,
        })
    }

    pub fn keysize_log2(&self) -> u8 {
        self.keysize_log2
    }

    pub fn keysize(&self) -> u64 {
        1u64 << self.keysize_log2
    }

    pub fn big_n(&self) -> u64 {
        self.big_n
    }

    pub fn scheme(&self) -> CellKeyScheme {
        self.scheme
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

/// `count` record keys from a ChaCha20 stream seeded with `seed`.
///
/// The stream is fixed by the ChaCha20 algorithm and the seed expansion of
/// `SeedableRng::seed_from_u64`, so keys are reproducible across platforms.
pub fn generate_record_keys(count: usize, seed: u64) -> Result<Vec<RecordKey>> {
    if count == 0 {
        return Err(invalid("count", "must be >= 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| RecordKey(rng.next_u32())).collect())
}

/// Parses newline-delimited unsigned integers; blank lines are skipped.
pub fn read_record_keys<R: BufRead>(reader: R) -> Result<Vec<RecordKey>> {
    let mut keys = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Malformed {
            what: "record key file",
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value = trimmed.parse::<u32>().map_err(|e| Error::Malformed {
            what: "record key file",
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        keys.push(RecordKey(value));
    }
    Ok(keys)
}

/// Combines a cell's record keys into its cell key.
///
/// Component sums are reduced modulo `big_n` after every addition, so
/// intermediates never exceed `big_n + 2^32`. The result only depends on the
/// multiset of keys.
pub fn aggregate_cell_key(keys: &[RecordKey], config: &CellKeyConfig) -> Result<CellKey> {
    if keys.is_empty() {
        return Err(Error::EmptyCell);
    }
    let n = config.big_n;
    let mask = config.keysize() - 1;
    let value = match config.scheme {
        CellKeyScheme::ByteSums => {
            let mut components = [0u64; 4];
            for key in keys {
                for (j, byte) in key.0.to_le_bytes().into_iter().enumerate() {
                    components[j] = (components[j] + u64::from(byte)) % n;
                }
            }
            components.iter().fold(0, |acc, c| acc ^ c) & mask
        }
        CellKeyScheme::FoldedSum => {
            let sum = keys.iter().fold(0u64, |acc, k| (acc + u64::from(k.0)) % n);
            let width = u32::from(config.keysize_log2);
            let mut folded = 0;
            let mut rest = sum;
            while rest > 0 {
                folded ^= rest & mask;
                rest = rest.checked_shr(width).unwrap_or(0);
            }
            folded
        }
    };
    Ok(CellKey(value))
}
