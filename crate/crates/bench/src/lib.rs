//! Shared fixtures for the criterion benchmarks.

use streamk_core::{canonical_policies, ProblemSize, SieveBank};

/// Powers-of-two sizes spanning the default tuning grid.
pub fn sample_sizes() -> Vec<ProblemSize> {
    let mut sizes = Vec::new();
    for m in [1, 16, 256, 4096] {
        for n in [64, 512, 8192] {
            for k in [16, 1024, 65536] {
                sizes.push(ProblemSize::new(m, n, k).unwrap());
            }
        }
    }
    sizes
}

/// Canonical bank with `count` pseudo-random sizes spread over the policies.
pub fn loaded_bank(count: u64) -> SieveBank {
    let mut bank = SieveBank::canonical();
    let policies = canonical_policies();
    for i in 0..count {
        let size =
            ProblemSize::new(1 + i % 8192, 64 + (i * 7) % 8192, 16 + (i * 13) % 65536).unwrap();
        bank.insert(size, policies[(i % 7) as usize]).unwrap();
    }
    bank
}
