//! Policy sieve: one Bloom filter per scheduling policy, keyed by problem
//! size. A query returns every policy whose filter may contain the size;
//! a policy that was inserted for a size is never missed.

mod bank;
mod bloom;
mod format;
mod murmur;

pub use bank::{
    elimination_stats, elimination_stats_for, expected_elimination, EliminationStats, SieveBank,
};
pub use bloom::{filter_params, hash_probes, predicted_fp_rate, BloomFilter, FilterParams};
pub use format::{bank_deserialize, bank_serialize, render_header, FILE_MAGIC, FILE_VERSION};
pub use murmur::murmur3_x64_128;
