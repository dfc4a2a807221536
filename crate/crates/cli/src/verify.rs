//! Randomized correctness sweep: exactly-once coverage plus bitwise
//! equivalence with the reference GEMM, in listing order and shuffled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamk_core::executor::{execute_in_order, natural_order, random_operands};
use streamk_core::{
    build_schedule, canonical_policies, reference_gemm, validate_schedule, CoverageReport,
    HardwareModel, Policy, ProblemSize, Schedule, TileShape,
};

/// Largest matrix dimension drawn.
pub const MAX_DIM: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub size: ProblemSize,
    pub tile: TileShape,
    pub hw: HardwareModel,
    pub policy: Policy,
}

/// Dimension in `[1, max]`, log-uniform so small and ragged shapes are
/// common and full-size products stay rare.
fn draw_dim(rng: &mut impl Rng, max: u64) -> u64 {
    let top = 63 - max.leading_zeros();
    let e = rng.random_range(0..=top);
    let lo = 1u64 << e;
    rng.random_range(lo..(lo * 2).min(max + 1))
}

/// Draws one random instance for `policy`.
pub fn sample_case(rng: &mut impl Rng, policy: Policy) -> Case {
    let size = ProblemSize::new(
        draw_dim(rng, MAX_DIM),
        draw_dim(rng, MAX_DIM),
        draw_dim(rng, MAX_DIM),
    )
    .unwrap();
    let blk = [8u64, 16, 32, 64, 128];
    let tile = TileShape::new(
        *blk.choose(rng).unwrap(),
        *blk.choose(rng).unwrap(),
        *blk.choose(rng).unwrap(),
    )
    .unwrap();
    let hw = HardwareModel::new(rng.random_range(1..=40), rng.random_range(1..=2)).unwrap();
    Case {
        size,
        tile,
        hw,
        policy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseResult {
    pub case: Case,
    pub coverage: CoverageReport,
    pub exact_match: bool,
    pub shuffled_match: bool,
    pub max_abs_diff: f64,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.coverage.covered_once && self.exact_match && self.shuffled_match
    }
}

/// Checks one schedule: coverage, then the product in listing order and
/// in a random global order of its work items.
pub fn check_schedule(case: Case, sched: &Schedule, rng: &mut impl Rng) -> Result<CaseResult> {
    let coverage = validate_schedule(sched);
    let (a, b) = random_operands(case.size, rng.random())?;
    let expected = reference_gemm(&a, &b)?;
    let mut order = natural_order(sched);
    let listed = execute_in_order(&a, &b, sched, case.tile, case.size, &order)?;
    order.shuffle(rng);
    let shuffled = execute_in_order(&a, &b, sched, case.tile, case.size, &order)?;
    Ok(CaseResult {
        case,
        coverage,
        exact_match: listed.bit_eq(&expected),
        shuffled_match: shuffled.bit_eq(&expected),
        max_abs_diff: listed
            .max_abs_diff(&expected)
            .max(shuffled.max_abs_diff(&expected)),
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: u64,
    /// Drops one work item from the first case.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOutcome {
    /// `(passed, run)` per policy.
    pub per_policy: BTreeMap<Policy, (u64, u64)>,
    pub failures: Vec<CaseResult>,
}

impl VerifyOutcome {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (policy, (passed, run)) in &self.per_policy {
            let _ = writeln!(s, "{:<8} {passed}/{run} passed", policy.to_string());
        }
        for f in &self.failures {
            let c = f.case;
            let _ = writeln!(
                s,
                "FAIL {} size={} tile={} g={}: gaps={} duplicates={} invalid={} exact={} shuffled={} max_abs_diff={}",
                c.policy,
                c.size,
                c.tile,
                c.hw.grid_size(),
                f.coverage.gaps,
                f.coverage.duplicates,
                f.coverage.invalid_items,
                f.exact_match,
                f.shuffled_match,
                f.max_abs_diff
            );
        }
        s
    }
}

/// Runs `cases` instances cycling through the canonical policies.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyOutcome> {
    let policies = canonical_policies();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcome = VerifyOutcome::default();
    for i in 0..cfg.cases {
        let policy = policies[(i % policies.len() as u64) as usize];
        let case = sample_case(&mut rng, policy);
        let mut sched = build_schedule(case.size, case.tile, case.hw, case.policy)?;
        if cfg.inject_fault && i == 0 {
            if let Some(list) = sched.assignments.iter_mut().find(|l| !l.is_empty()) {
                list.pop();
            }
        }
        let result = check_schedule(case, &sched, &mut rng)?;
        let entry = outcome.per_policy.entry(policy).or_default();
        entry.1 += 1;
        if result.passed() {
            entry.0 += 1;
        } else {
            outcome.failures.push(result);
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen_max = 0;
        for _ in 0..10_000 {
            let d = draw_dim(&mut rng, MAX_DIM);
            assert!((1..=MAX_DIM).contains(&d));
            seen_max = seen_max.max(d);
        }
        assert_eq!(seen_max, MAX_DIM);
    }

    #[test]
    fn small_sweep_passes() {
        let out = run_verify(&VerifyConfig {
            seed: 7,
            cases: 14,
            inject_fault: false,
        })
        .unwrap();
        assert!(out.all_passed(), "{}", out.render());
        assert_eq!(out.per_policy.len(), 7);
        assert!(out.per_policy.values().all(|&(p, r)| p == 2 && r == 2));
    }

    #[test]
    fn injected_fault_is_reported() {
        let out = run_verify(&VerifyConfig {
            seed: 7,
            cases: 3,
            inject_fault: true,
        })
        .unwrap();
        assert_eq!(out.failures.len(), 1);
        let f = out.failures[0];
        assert!(f.coverage.gaps > 0);
        assert!(out.render().contains("FAIL dp"));
    }
}
