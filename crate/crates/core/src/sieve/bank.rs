use crate::costmodel::TuneRecord;
use crate::error::{Error, Result};
use crate::model::{canonical_policies, encode_key, Policy, ProblemSize};

use super::bloom::{filter_params, BloomFilter, FilterParams};

/// Seed multiplier for per-filter hashing (32-bit golden ratio).
const SEED_STEP: u32 = 0x9E37_79B9;

/// Bank of Bloom filters, one per policy, in policy order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SieveBank {
    filters: Vec<(Policy, BloomFilter)>,
}

impl SieveBank {
    pub const DEFAULT_CAPACITY: u64 = 10_000;
    pub const DEFAULT_FP_TARGET: f64 = 0.01;

    /// Seed of the filter at position `index`.
    pub fn seed_for(index: usize) -> u32 {
        SEED_STEP.wrapping_mul(index as u32 + 1)
    }

    pub fn new(policies: &[Policy], capacity: u64, fp_target: f64) -> Result<Self> {
        let params = filter_params(capacity, fp_target)?;
        let mut sorted = policies.to_vec();
        sorted.sort();
        let filters = sorted
            .into_iter()
            .enumerate()
            .map(|(i, p)| Ok((p, BloomFilter::new(params, Self::seed_for(i))?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_filters(filters)
    }

    /// Canonical seven-policy bank at 10,000 keys and 1% false positives.
    pub fn canonical() -> Self {
        Self::new(
            &canonical_policies(),
            Self::DEFAULT_CAPACITY,
            Self::DEFAULT_FP_TARGET,
        )
        .expect("default sieve parameters are valid")
    }

    /// Assembles a bank from prebuilt filters, checking that policies are
    /// distinct and in order, filters share one geometry, and seeds differ.
    pub fn from_filters(filters: Vec<(Policy, BloomFilter)>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::InvalidArgument(
                "a sieve bank needs at least one policy".into(),
            ));
        }
        for pair in filters.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "policies must be distinct and ordered, found {} before {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some((p, _)) = filters
            .iter()
            .find(|(p, _)| p.sk_batches() > u32::from(u8::MAX))
        {
            return Err(Error::InvalidArgument(format!(
                "policy {p} has more Stream-K batches than the sieve format can record"
            )));
        }
        let params = filters[0].1.params();
        if let Some((p, _)) = filters.iter().find(|(_, f)| f.params() != params) {
            return Err(Error::InvalidArgument(format!(
                "filter for {p} does not share the bank's geometry"
            )));
        }
        let mut seeds: Vec<u32> = filters.iter().map(|(_, f)| f.seed()).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != filters.len() {
            return Err(Error::InvalidArgument(
                "filter seeds must be distinct".into(),
            ));
        }
        Ok(Self { filters })
    }

    pub fn params(&self) -> FilterParams {
        self.filters[0].1.params()
    }

    pub fn filters(&self) -> &[(Policy, BloomFilter)] {
        &self.filters
    }

    pub fn policies(&self) -> impl Iterator<Item = Policy> + '_ {
        self.filters.iter().map(|(p, _)| *p)
    }

    pub fn policy_count(&self) -> usize {
        self.filters.len()
    }

    pub fn filter(&self, policy: Policy) -> Option<&BloomFilter> {
        self.filters
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|(_, f)| f)
    }

    pub fn insert(&mut self, size: ProblemSize, policy: Policy) -> Result<()> {
        let filter = self
            .filters
            .iter_mut()
            .find(|(p, _)| *p == policy)
            .map(|(_, f)| f)
            .ok_or(Error::UnknownPolicy(policy))?;
        filter.insert(&encode_key(size));
        Ok(())
    }

    /// Candidate policies for `size`, in bank order.
    pub fn query(&self, size: ProblemSize) -> Vec<Policy> {
        let key = encode_key(size);
        self.filters
            .iter()
            .filter(|(_, f)| f.contains(&key))
            .map(|(p, _)| *p)
            .collect()
    }

    /// Candidate set as a bit mask over bank positions; allocation-free.
    #[inline]
    pub fn query_mask(&self, size: ProblemSize) -> u64 {
        let key = encode_key(size);
        self.filters
            .iter()
            .take(64)
            .enumerate()
            .fold(0, |mask, (i, (_, f))| {
                if f.contains(&key) {
                    mask | 1 << i
                } else {
                    mask
                }
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationStats {
    pub records: u64,
    pub policy_count: u64,
    /// Non-baseline policies the sieve-guided tuner still evaluates.
    pub evaluated_non_baseline: u64,
    pub eliminated_fraction: f64,
    /// Records whose winner is missing from the evaluated set.
    pub false_negatives: u64,
    pub evaluations_saved: u64,
    /// Non-baseline candidates that were not the winner.
    pub false_positives: u64,
}

/// Sieve-guided evaluation over tuning records: each size evaluates its
/// candidates plus `baseline`, and the fraction of skipped non-baseline
/// evaluations is reported.
pub fn elimination_stats(
    bank: &SieveBank,
    records: &[TuneRecord],
    baseline: Policy,
) -> Result<EliminationStats> {
    elimination_stats_for(bank, records.iter().map(|r| (r.size, r.winner)), baseline)
}

/// [`elimination_stats`] over bare `(size, winner)` pairs.
pub fn elimination_stats_for(
    bank: &SieveBank,
    winners: impl IntoIterator<Item = (ProblemSize, Policy)>,
    baseline: Policy,
) -> Result<EliminationStats> {
    if bank.filter(baseline).is_none() {
        return Err(Error::UnknownPolicy(baseline));
    }
    let policy_count = bank.policy_count() as u64;
    let mut records = 0u64;
    let mut evaluated_non_baseline = 0u64;
    let mut false_negatives = 0u64;
    let mut false_positives = 0u64;
    for (size, winner) in winners {
        records += 1;
        let candidates = bank.query(size);
        let non_baseline = candidates.iter().filter(|&&p| p != baseline).count() as u64;
        evaluated_non_baseline += non_baseline;
        let winner_found = winner == baseline || candidates.contains(&winner);
        if !winner_found {
            false_negatives += 1;
        }
        false_positives += candidates
            .iter()
            .filter(|&&p| p != baseline && p != winner)
            .count() as u64;
    }
    if records == 0 {
        return Err(Error::InvalidArgument(
            "elimination stats need at least one record".into(),
        ));
    }
    let possible = records * (policy_count - 1);
    let eliminated_fraction = if possible == 0 {
        1.0
    } else {
        1.0 - evaluated_non_baseline as f64 / possible as f64
    };
    Ok(EliminationStats {
        records,
        policy_count,
        evaluated_non_baseline,
        eliminated_fraction,
        false_negatives,
        evaluations_saved: possible - evaluated_non_baseline,
        false_positives,
    })
}

/// Elimination rate of a false-positive-free sieve: only sizes won by a
/// non-baseline policy cost one extra evaluation.
pub fn expected_elimination(
    winners: impl IntoIterator<Item = Policy>,
    baseline: Policy,
    policy_count: usize,
) -> f64 {
    let (mut total, mut non_baseline) = (0u64, 0u64);
    for w in winners {
        total += 1;
        if w != baseline {
            non_baseline += 1;
        }
    }
    let possible = total * (policy_count as u64).saturating_sub(1);
    if possible == 0 {
        1.0
    } else {
        1.0 - non_baseline as f64 / possible as f64
    }
}
