//! Report over a tuning records CSV: winner counts, Stream-K tolerance
//! curve, gain distribution and sieve elimination.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use streamk_core::costmodel::relative_gain;
use streamk_core::{
    elimination_stats_for, expected_elimination, EliminationStats, Policy, ProblemSize, SieveBank,
    CANONICAL_POLICY_COUNT,
};

use crate::records::RecordRow;
use crate::tune::winner_counts;

/// A slow-down margin in percent. `Infinite` accepts any Stream-K makespan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Percent(f64),
    Infinite,
}

impl Tolerance {
    fn admits(&self, sk: f64, dp: f64) -> bool {
        match *self {
            Tolerance::Percent(p) => sk <= (1.0 + p / 100.0) * dp,
            Tolerance::Infinite => true,
        }
    }

    fn sort_key(&self) -> f64 {
        match *self {
            Tolerance::Percent(p) => p,
            Tolerance::Infinite => f64::INFINITY,
        }
    }
}

impl FromStr for Tolerance {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_end_matches('%');
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Tolerance::Infinite);
        }
        let p: f64 = s.parse().with_context(|| format!("bad tolerance {s:?}"))?;
        if !p.is_finite() || p < 0.0 {
            bail!("tolerance must be a non-negative percentage, got {s:?}");
        }
        Ok(Tolerance::Percent(p))
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Percent(p) => write!(f, "{p}%"),
            Tolerance::Infinite => f.write_str("inf"),
        }
    }
}

pub fn parse_tolerances(list: &str) -> Result<Vec<Tolerance>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn default_tolerances() -> Vec<Tolerance> {
    [0.0, 5.0, 10.0, 20.0].map(Tolerance::Percent).to_vec()
}

/// Per-size digest of the records.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub size: ProblemSize,
    pub winner: Policy,
    pub runner_up: Option<Policy>,
    pub gain: f64,
    pub dp_makespan: f64,
    /// Best makespan over the Stream-K-based policies, if any were recorded.
    pub best_sk_makespan: Option<f64>,
}

type SizeGroups<'a> = BTreeMap<(u64, u64, u64), Vec<(Policy, &'a RecordRow)>>;

/// Groups rows by size (in first-seen order) and checks each group has a
/// data-parallel row and exactly one winner.
pub fn summarize(rows: &[RecordRow]) -> Result<Vec<SizeSummary>> {
    let mut order = Vec::new();
    let mut groups = SizeGroups::new();
    for row in rows {
        let key = (row.m, row.n, row.k);
        let group = groups.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        let policy = row.policy()?;
        if group.iter().any(|(p, _)| *p == policy) {
            bail!("size {}x{}x{} lists {policy} twice", row.m, row.n, row.k);
        }
        group.push((policy, row));
    }

    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let label = format!("{}x{}x{}", key.0, key.1, key.2);
            let size = group[0].1.size()?;
            let winners: Vec<_> = group.iter().filter(|(_, r)| r.is_winner == 1).collect();
            let &&(winner, winner_row) = match winners.as_slice() {
                [one] => one,
                _ => bail!("size {label} has {} winners", winners.len()),
            };
            let dp_makespan = group
                .iter()
                .find(|(p, _)| *p == Policy::DataParallel)
                .map(|(_, r)| r.makespan)
                .ok_or_else(|| anyhow!("size {label} has no data-parallel row"))?;
            let best_sk_makespan = group
                .iter()
                .filter(|(p, _)| p.is_stream_k())
                .map(|(_, r)| r.makespan)
                .min_by(f64::total_cmp);
            let runner = group
                .iter()
                .filter(|(p, _)| *p != winner)
                .min_by(|a, b| a.1.makespan.total_cmp(&b.1.makespan).then(a.0.cmp(&b.0)));
            let (runner_up, gain) = match runner {
                Some((p, r)) => (Some(*p), relative_gain(winner_row.makespan, r.makespan)),
                None => (None, 0.0),
            };
            Ok(SizeSummary {
                size,
                winner,
                runner_up,
                gain,
                dp_makespan,
                best_sk_makespan,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TolerancePoint {
    pub label: String,
    /// `None` for the unbounded tolerance.
    pub tolerance_pct: Option<f64>,
    pub fraction: f64,
}

/// Fraction of sizes whose best Stream-K-based makespan is within each
/// tolerance of data-parallel. Points are sorted by tolerance.
pub fn tolerance_curve(sizes: &[SizeSummary], tolerances: &[Tolerance]) -> Vec<TolerancePoint> {
    let mut tolerances = tolerances.to_vec();
    tolerances.sort_by(|a, b| a.sort_key().total_cmp(&b.sort_key()));
    tolerances.dedup();
    tolerances
        .iter()
        .map(|t| {
            let hits = sizes
                .iter()
                .filter(|s| match s.best_sk_makespan {
                    Some(sk) => t.admits(sk, s.dp_makespan),
                    None => false,
                })
                .count();
            TolerancePoint {
                label: t.to_string(),
                tolerance_pct: match t {
                    Tolerance::Percent(p) => Some(*p),
                    Tolerance::Infinite => None,
                },
                fraction: if sizes.is_empty() {
                    0.0
                } else {
                    hits as f64 / sizes.len() as f64
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p95: Option<f64>,
    pub max: Option<f64>,
}

impl GainStats {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let count = values.len();
        if count == 0 {
            return GainStats {
                count,
                mean: None,
                median: None,
                p95: None,
                max: None,
            };
        }
        let median = if count % 2 == 1 {
            values[count / 2]
        } else {
            (values[count / 2 - 1] + values[count / 2]) / 2.0
        };
        // Nearest-rank percentile.
        let rank = ((0.95 * count as f64).ceil() as usize).clamp(1, count);
        GainStats {
            count,
            mean: Some(values.iter().sum::<f64>() / count as f64),
            median: Some(median),
            p95: Some(values[rank - 1]),
            max: values.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationSection {
    /// Elimination implied by the winner distribution with a perfect sieve.
    pub closed_form: f64,
    pub measured: Option<MeasuredElimination>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredElimination {
    pub eliminated_fraction: f64,
    pub evaluations_saved: u64,
    pub evaluated_non_baseline: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl From<EliminationStats> for MeasuredElimination {
    fn from(s: EliminationStats) -> Self {
        MeasuredElimination {
            eliminated_fraction: s.eliminated_fraction,
            evaluations_saved: s.evaluations_saved,
            evaluated_non_baseline: s.evaluated_non_baseline,
            false_positives: s.false_positives,
            false_negatives: s.false_negatives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub sizes: usize,
    pub winner_counts: BTreeMap<String, u64>,
    pub tolerance_curve: Vec<TolerancePoint>,
    pub gain_stats: BTreeMap<String, GainStats>,
    pub elimination: EliminationSection,
}

pub const FAMILY_DP: &str = "data_parallel";
pub const FAMILY_SK: &str = "stream_k";

/// Builds the report. With a sieve the measured elimination is included.
pub fn build_report(
    rows: &[RecordRow],
    tolerances: &[Tolerance],
    sieve: Option<&SieveBank>,
) -> Result<Report> {
    let sizes = summarize(rows)?;
    if sizes.is_empty() {
        bail!("records contain no sizes");
    }

    let winner_counts = winner_counts(sizes.iter().map(|s| s.winner))
        .into_iter()
        .map(|(p, c)| (p.to_string(), c))
        .collect();

    let mut dp_gains = Vec::new();
    let mut sk_gains = Vec::new();
    for s in &sizes {
        if s.winner.is_stream_k() {
            sk_gains.push(s.gain);
        } else {
            dp_gains.push(s.gain);
        }
    }
    let gain_stats = BTreeMap::from([
        (FAMILY_DP.to_string(), GainStats::from_values(dp_gains)),
        (FAMILY_SK.to_string(), GainStats::from_values(sk_gains)),
    ]);

    let policy_count = sieve.map_or(CANONICAL_POLICY_COUNT, SieveBank::policy_count);
    let closed_form = expected_elimination(
        sizes.iter().map(|s| s.winner),
        Policy::DataParallel,
        policy_count,
    );
    let measured = match sieve {
        Some(bank) => Some(
            elimination_stats_for(
                bank,
                sizes.iter().map(|s| (s.size, s.winner)),
                Policy::DataParallel,
            )?
            .into(),
        ),
        None => None,
    };

    Ok(Report {
        sizes: sizes.len(),
        winner_counts,
        tolerance_curve: tolerance_curve(&sizes, tolerances),
        gain_stats,
        elimination: EliminationSection {
            closed_form,
            measured,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: u64, policy: Policy, makespan: f64, winner: bool) -> RecordRow {
        RecordRow {
            m,
            n: 64,
            k: 64,
            policy_ordinal: policy.ordinal().unwrap(),
            sk_batches: policy.sk_batches(),
            sk_first: u8::from(policy.sk_first()),
            makespan,
            utilization: 1.0,
            atomic_writes: 0,
            is_winner: u8::from(winner),
        }
    }

    fn rows() -> Vec<RecordRow> {
        vec![
            row(1, Policy::DataParallel, 100.0, true),
            row(1, Policy::hybrid(1), 104.0, false),
            row(1, Policy::AllStreamK, 120.0, false),
            row(2, Policy::DataParallel, 100.0, false),
            row(2, Policy::hybrid(1), 80.0, true),
            row(2, Policy::AllStreamK, 90.0, false),
            row(4, Policy::DataParallel, 100.0, true),
            row(4, Policy::hybrid(1), 115.0, false),
            row(4, Policy::AllStreamK, 130.0, false),
        ]
    }

    #[test]
    fn tolerances_parse() {
        let t = parse_tolerances("0, 5%,10,inf").unwrap();
        assert_eq!(
            t,
            vec![
                Tolerance::Percent(0.0),
                Tolerance::Percent(5.0),
                Tolerance::Percent(10.0),
                Tolerance::Infinite
            ]
        );
        assert!(parse_tolerances("-1").is_err());
        assert!(parse_tolerances("abc").is_err());
    }

    #[test]
    fn summary_per_size() {
        let s = summarize(&rows()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].winner, Policy::DataParallel);
        assert_eq!(s[0].runner_up, Some(Policy::hybrid(1)));
        assert!((s[0].gain - 4.0 / 104.0).abs() < 1e-12);
        assert_eq!(s[1].winner, Policy::hybrid(1));
        assert!((s[1].gain - 10.0 / 90.0).abs() < 1e-12);
        assert_eq!(s[2].best_sk_makespan, Some(115.0));
    }

    #[test]
    fn curve_matches_hand_count() {
        let s = summarize(&rows()).unwrap();
        let curve = tolerance_curve(
            &s,
            &[
                Tolerance::Infinite,
                Tolerance::Percent(5.0),
                Tolerance::Percent(0.0),
                Tolerance::Percent(20.0),
            ],
        );
        let fr: Vec<f64> = curve.iter().map(|p| p.fraction).collect();
        assert_eq!(fr, vec![1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0]);
        assert_eq!(curve[3].label, "inf");
        assert_eq!(curve[3].tolerance_pct, None);
    }

    #[test]
    fn gain_stats_nearest_rank() {
        let g = GainStats::from_values((1..=20).map(f64::from).collect());
        assert_eq!(g.count, 20);
        assert_eq!(g.mean, Some(10.5));
        assert_eq!(g.median, Some(10.5));
        assert_eq!(g.p95, Some(19.0));
        assert_eq!(g.max, Some(20.0));
        assert_eq!(GainStats::from_values(vec![]).mean, None);
    }

    #[test]
    fn report_json_keys() {
        let report = build_report(&rows(), &default_tolerances(), None).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        for key in [
            "winner_counts",
            "tolerance_curve",
            "gain_stats",
            "elimination",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["winner_counts"]["dp"], 2);
        assert_eq!(v["winner_counts"]["sk1+dp"], 1);
        assert_eq!(v["gain_stats"][FAMILY_SK]["count"], 1);
        // One of three sizes needs one extra evaluation out of six.
        assert!((report.elimination.closed_form - (1.0 - 1.0 / 18.0)).abs() < 1e-12);
        assert!(report.elimination.measured.is_none());
    }

    #[test]
    fn bad_groups_are_rejected() {
        let mut r = rows();
        r[4].is_winner = 0;
        assert!(build_report(&r, &default_tolerances(), None)
            .unwrap_err()
            .to_string()
            .contains("0 winners"));
        let r: Vec<_> = rows()
            .into_iter()
            .filter(|r| r.policy_ordinal != 0)
            .collect();
        assert!(build_report(&r, &default_tolerances(), None).is_err());
        let mut r = rows();
        r.push(r[0].clone());
        assert!(build_report(&r, &default_tolerances(), None).is_err());
    }
}
