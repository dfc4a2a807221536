use thiserror::Error;

use crate::model::Policy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem too large: iteration count overflows 64 bits")]
    ProblemTooLarge,

    #[error("iteration {iter} out of range (total_iters = {total})")]
    IterOutOfRange { iter: u64, total: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("schedule does not match problem: {0}")]
    ScheduleMismatch(String),

    #[error("policy {0} is not present in the sieve bank")]
    UnknownPolicy(Policy),

    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Failures while decoding a serialized sieve bank.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected \"SKPS\", found {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported sieve format version {0}")]
    UnsupportedVersion(u16),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error(
        "truncated sieve file: needed {needed} bytes at offset {offset}, {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("malformed sieve file: {0}")]
    Malformed(String),
}
