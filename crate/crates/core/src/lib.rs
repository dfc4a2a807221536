//! Stream-K++ scheduling for tiled GEMM.
//!
//! The crate is split along the pipeline:
//!
//! * [`model`] holds the shared value types (problem sizes, tile shapes,
//!   hardware model, scheduling policies).
//! * [`scheduler`] turns a `(size, tile, hardware, policy)` quadruple into a
//!   per-workgroup work assignment and checks exactly-once coverage.
//! * [`executor`] runs a schedule as a real matrix product on the host and
//!   compares it against a naive reference GEMM.
//! * [`costmodel`] ranks policies with a deterministic makespan estimate.
//! * [`sieve`] is the Bloom-filter bank used to narrow the policy search at
//!   query time, with its versioned binary file format.

pub mod costmodel;
pub mod error;
pub mod executor;
pub mod model;
pub mod scheduler;
pub mod sieve;

pub use costmodel::{dp_utilization, estimate, pick_winner, CostEstimate, CostParams, TuneRecord};
pub use error::{Error, FormatError, Result};
pub use executor::{
    execute_schedule, execute_schedule_concurrent, reference_gemm, run_equivalence,
    EquivalenceReport, Matrix,
};
pub use model::{
    canonical_policies, encode_key, GridInfo, HardwareModel, Policy, ProblemSize, TileShape,
    CANONICAL_POLICY_COUNT,
};
pub use scheduler::{
    build_schedule, grid_info, grid_size, locate_iter, streamk_ranges, validate_schedule,
    CoverageReport, IterLocation, Phase, Schedule, WorkItem, WriteMode,
};
pub use sieve::{
    bank_deserialize, bank_serialize, elimination_stats, elimination_stats_for,
    expected_elimination, filter_params, hash_probes, predicted_fp_rate, BloomFilter,
    EliminationStats, FilterParams, SieveBank,
};
