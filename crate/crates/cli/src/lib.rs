//! Command-line pipeline around `streamk-core`: grid generation, tuning,
//! point queries, verification and reports.

pub mod grid;
pub mod query;
pub mod records;
pub mod report;
pub mod tune;
pub mod verify;
