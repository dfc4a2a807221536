//! Point queries against a loaded sieve with per-lookup latency.

use std::hint::black_box;
use std::time::Instant;

use streamk_core::{Policy, ProblemSize, SieveBank};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTiming {
    pub candidates: Vec<Policy>,
    pub repeat: u64,
    pub median_ns: u64,
    pub p99_ns: u64,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Queries `size` `repeat` times on the calling thread, timing each lookup.
/// One untimed query warms the cache first.
pub fn time_queries(bank: &SieveBank, size: ProblemSize, repeat: u64) -> QueryTiming {
    let candidates = bank.query(size);
    let mut samples = Vec::with_capacity(repeat as usize);
    for _ in 0..repeat {
        let start = Instant::now();
        black_box(bank.query(black_box(size)));
        samples.push(start.elapsed().as_nanos() as u64);
    }
    samples.sort_unstable();
    QueryTiming {
        candidates,
        repeat,
        median_ns: percentile(&samples, 0.5),
        p99_ns: percentile(&samples, 0.99),
    }
}

pub fn render(size: ProblemSize, t: &QueryTiming) -> String {
    let names: Vec<String> = t.candidates.iter().map(Policy::to_string).collect();
    format!(
        "size {size}\ncandidates: [{}]\nlatency over {} queries: median {} ns, p99 {} ns\n",
        names.join(", "),
        t.repeat,
        t.median_ns,
        t.p99_ns
    )
}
