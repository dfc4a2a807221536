//! Versioned binary sieve file, little-endian throughout:
//!
//! ```text
//! magic "SKPS" | version u16 = 1 | policy_count u16
//! per filter, in policy order:
//!   policy_tag u8 | sk_batches u8 | sk_first u8 | reserved u8 = 0
//!   seed u32 | m_bits u64 | k_hashes u32 | n_inserted u64
//!   bit array, m_bits / 8 bytes
//! crc32 (IEEE) u32 over every preceding byte
//! ```
//!
//! `policy_tag` is the canonical ordinal, or [`NON_CANONICAL_TAG`] for a
//! hybrid outside the canonical set (described by the two fields after it).

use std::fmt::Write as _;

use crate::error::{Error, FormatError};
use crate::model::Policy;

use super::bank::SieveBank;
use super::bloom::BloomFilter;

pub const FILE_MAGIC: [u8; 4] = *b"SKPS";
pub const FILE_VERSION: u16 = 1;
pub const NON_CANONICAL_TAG: u8 = 0xFF;

const FILE_HEADER_LEN: usize = 8;
const FILTER_HEADER_LEN: usize = 28;
const TRAILER_LEN: usize = 4;

fn policy_fields(policy: Policy) -> [u8; 4] {
    let tag = policy.ordinal().unwrap_or(NON_CANONICAL_TAG);
    // SieveBank guarantees sk_batches fits in a byte.
    [
        tag,
        policy.sk_batches() as u8,
        u8::from(policy.sk_first()),
        0,
    ]
}

fn decode_policy(fields: [u8; 4]) -> Result<Policy, FormatError> {
    let [tag, sk_batches, sk_first, reserved] = fields;
    let bad = |why: &str| FormatError::Malformed(format!("policy fields {fields:02x?}: {why}"));
    if reserved != 0 {
        return Err(bad("reserved byte is not zero"));
    }
    if sk_first > 1 {
        return Err(bad("sk_first is not 0 or 1"));
    }
    let policy = if tag == NON_CANONICAL_TAG {
        if sk_batches == 0 {
            return Err(bad("hybrid with zero Stream-K batches"));
        }
        let p = Policy::Hybrid {
            sk_batches: u32::from(sk_batches),
            sk_first: sk_first == 1,
        };
        if p.ordinal().is_some() {
            return Err(bad("canonical policy stored with the non-canonical tag"));
        }
        p
    } else {
        Policy::from_ordinal(tag).ok_or_else(|| bad("unknown policy tag"))?
    };
    if policy_fields(policy) != fields {
        return Err(bad("fields disagree with the policy tag"));
    }
    Ok(policy)
}

pub fn bank_serialize(bank: &SieveBank) -> Vec<u8> {
    let params = bank.params();
    let mut out = Vec::with_capacity(
        FILE_HEADER_LEN
            + bank.policy_count() * (FILTER_HEADER_LEN + (params.m_bits / 8) as usize)
            + TRAILER_LEN,
    );
    out.extend_from_slice(&FILE_MAGIC);
    out.extend_from_slice(&FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(bank.policy_count() as u16).to_le_bytes());
    for (policy, filter) in bank.filters() {
        out.extend_from_slice(&policy_fields(*policy));
        out.extend_from_slice(&filter.seed().to_le_bytes());
        out.extend_from_slice(&filter.m_bits().to_le_bytes());
        out.extend_from_slice(&filter.k_hashes().to_le_bytes());
        out.extend_from_slice(&filter.n_inserted().to_le_bytes());
        out.extend_from_slice(&filter.to_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        self.array().map(u64::from_le_bytes)
    }
}

/// Parses a sieve file. Truncation, bad magic, an unknown version and a
/// checksum mismatch are reported as distinct [`FormatError`] values.
pub fn bank_deserialize(bytes: &[u8]) -> Result<SieveBank, FormatError> {
    if bytes.len() < FILE_HEADER_LEN + TRAILER_LEN {
        return Err(FormatError::Truncated {
            offset: 0,
            needed: FILE_HEADER_LEN + TRAILER_LEN,
            available: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - TRAILER_LEN);
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    let magic: [u8; 4] = r.array()?;
    if magic != FILE_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = r.u16()?;
    if version != FILE_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let count = r.u16()?;

    // Walk the layout first so a short file reports truncation, not a bad CRC.
    struct RawFilter<'a> {
        fields: [u8; 4],
        seed: u32,
        m_bits: u64,
        k_hashes: u32,
        n_inserted: u64,
        bits: &'a [u8],
    }
    let mut raw = Vec::with_capacity(usize::from(count));
    for _ in 0..count {
        let fields = r.array()?;
        let seed = r.u32()?;
        let m_bits = r.u64()?;
        let k_hashes = r.u32()?;
        let n_inserted = r.u64()?;
        let len = usize::try_from(m_bits.div_ceil(8))
            .map_err(|_| FormatError::Malformed(format!("m_bits {m_bits} too large")))?;
        let bits = r.take(len)?;
        raw.push(RawFilter {
            fields,
            seed,
            m_bits,
            k_hashes,
            n_inserted,
            bits,
        });
    }
    if r.pos != body.len() {
        return Err(FormatError::Malformed(format!(
            "{} unexpected bytes before the checksum",
            body.len() - r.pos
        )));
    }

    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }

    let filters = raw
        .into_iter()
        .map(|f| {
            let policy = decode_policy(f.fields)?;
            let filter =
                BloomFilter::from_bytes(f.m_bits, f.k_hashes, f.seed, f.n_inserted, f.bits)
                    .map_err(|e| FormatError::Malformed(format!("filter for {policy}: {e}")))?;
            Ok((policy, filter))
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    SieveBank::from_filters(filters).map_err(|e| match e {
        Error::InvalidArgument(msg) => FormatError::Malformed(msg),
        other => FormatError::Malformed(other.to_string()),
    })
}

/// Renders the serialized bank as a C++ header holding the file bytes in a
/// `constexpr` array, for builds that compile the lookup table in.
pub fn render_header(bank: &SieveBank, symbol: &str) -> String {
    let bytes = bank_serialize(bank);
    let mut out = String::new();
    out.push_str("// Generated sieve lookup table. Layout: SKPS v1, see the sieve file format.\n");
    out.push_str("#pragma once\n#include <cstddef>\n#include <cstdint>\n\n");
    let _ = writeln!(out, "// policies:");
    for (policy, filter) in bank.filters() {
        let _ = writeln!(
            out,
            "//   {policy}: seed=0x{:08x} inserted={}",
            filter.seed(),
            filter.n_inserted()
        );
    }
    let _ = writeln!(
        out,
        "inline constexpr std::size_t {symbol}_len = {};",
        bytes.len()
    );
    let _ = writeln!(
        out,
        "inline constexpr std::uint8_t {symbol}[{}] = {{",
        bytes.len()
    );
    for chunk in bytes.chunks(16) {
        out.push_str("   ");
        for b in chunk {
            let _ = write!(out, " 0x{b:02x},");
        }
        out.push('\n');
    }
    out.push_str("};\n");
    out
}
