use std::f64::consts::LN_2;

use crate::error::{Error, Result};

use super::murmur::murmur3_x64_128;

pub const MAX_HASHES: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FilterParams {
    pub m_bits: u64,
    pub k_hashes: u32,
}

/// Standard Bloom sizing for `capacity` keys at false-positive rate
/// `fp_target`. The bit count is rounded up to a multiple of 64; the probe
/// count is taken from the unrounded size and clamped to `1..=32`.
pub fn filter_params(capacity: u64, fp_target: f64) -> Result<FilterParams> {
    if capacity == 0 {
        return Err(Error::InvalidArgument(
            "filter capacity must be positive".into(),
        ));
    }
    if !(fp_target > 0.0 && fp_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "false-positive target must lie in (0, 1), got {fp_target}"
        )));
    }
    let exact_bits = (-(capacity as f64) * fp_target.ln() / (LN_2 * LN_2)).ceil();
    let m_bits = ((exact_bits as u64).div_ceil(64) * 64).max(64);
    let k = (exact_bits / capacity as f64 * LN_2).round();
    let k_hashes = (k as u32).clamp(1, MAX_HASHES);
    Ok(FilterParams { m_bits, k_hashes })
}

/// Predicted false-positive probability after `inserted` keys.
pub fn predicted_fp_rate(params: FilterParams, inserted: u64) -> f64 {
    let k = f64::from(params.k_hashes);
    (1.0 - (-k * inserted as f64 / params.m_bits as f64).exp()).powf(k)
}

/// Double-hashing probe sequence `(h1 + i * h2) mod m_bits` over one
/// 128-bit Murmur3 hash of the key.
#[derive(Debug, Clone)]
struct Probes {
    next: u64,
    step: u64,
    m_bits: u64,
    remaining: u32,
}

impl Probes {
    #[inline]
    fn new(key: &[u8], seed: u32, m_bits: u64, k_hashes: u32) -> Self {
        let (h1, h2) = murmur3_x64_128(key, seed);
        Self {
            next: h1 % m_bits,
            step: h2 % m_bits,
            m_bits,
            remaining: k_hashes,
        }
    }
}

impl Iterator for Probes {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let current = self.next;
        // both operands < m_bits <= 2^64 - 1, so the u128 sum cannot overflow
        self.next =
            ((u128::from(current) + u128::from(self.step)) % u128::from(self.m_bits)) as u64;
        Some(current)
    }
}

pub fn hash_probes(key: &[u8], seed: u32, m_bits: u64, k_hashes: u32) -> Vec<u64> {
    Probes::new(key, seed, m_bits, k_hashes).collect()
}

/// Bit array with LSB-first packing: bit `i` is bit `i % 8` of byte `i / 8`.
/// Stored as little-endian `u64` words, which is the same layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    m_bits: u64,
    k_hashes: u32,
    seed: u32,
    n_inserted: u64,
    words: Vec<u64>,
}

impl BloomFilter {
    pub fn new(params: FilterParams, seed: u32) -> Result<Self> {
        Self::check_params(params.m_bits, params.k_hashes)?;
        let words = usize::try_from(params.m_bits / 64)
            .map_err(|_| Error::InvalidArgument("filter too large".into()))?;
        Ok(Self {
            m_bits: params.m_bits,
            k_hashes: params.k_hashes,
            seed,
            n_inserted: 0,
            words: vec![0; words],
        })
    }

    fn check_params(m_bits: u64, k_hashes: u32) -> Result<()> {
        if m_bits < 64 || !m_bits.is_multiple_of(64) {
            return Err(Error::InvalidArgument(format!(
                "m_bits must be a positive multiple of 64, got {m_bits}"
            )));
        }
        if !(1..=MAX_HASHES).contains(&k_hashes) {
            return Err(Error::InvalidArgument(format!(
                "k_hashes must lie in 1..={MAX_HASHES}, got {k_hashes}"
            )));
        }
        Ok(())
    }

    /// Rebuilds a filter from its serialized fields.
    pub fn from_bytes(
        m_bits: u64,
        k_hashes: u32,
        seed: u32,
        n_inserted: u64,
        bytes: &[u8],
    ) -> Result<Self> {
        Self::check_params(m_bits, k_hashes)?;
        if bytes.len() as u64 != m_bits / 8 {
            return Err(Error::InvalidArgument(format!(
                "{m_bits}-bit filter needs {} bytes, got {}",
                m_bits / 8,
                bytes.len()
            )));
        }
        let words = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            m_bits,
            k_hashes,
            seed,
            n_inserted,
            words,
        })
    }

    pub fn m_bits(&self) -> u64 {
        self.m_bits
    }

    pub fn k_hashes(&self) -> u32 {
        self.k_hashes
    }

    pub fn seed(&self) -> u32 {
        self.seed
    }

    /// Number of insert calls, duplicates included.
    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    pub fn params(&self) -> FilterParams {
        FilterParams {
            m_bits: self.m_bits,
            k_hashes: self.k_hashes,
        }
    }

    pub fn insert(&mut self, key: &[u8]) {
        for bit in Probes::new(key, self.seed, self.m_bits, self.k_hashes) {
            self.words[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        self.n_inserted += 1;
    }

    #[inline]
    pub fn contains(&self, key: &[u8]) -> bool {
        Probes::new(key, self.seed, self.m_bits, self.k_hashes)
            .all(|bit| self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0)
    }

    pub fn get_bit(&self, bit: u64) -> bool {
        self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }
}
