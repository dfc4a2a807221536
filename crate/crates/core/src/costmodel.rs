//! Deterministic makespan model used to rank policies.
//!
//! Each workgroup pays `c_mac` per K iteration, `c_store` per whole-tile
//! store and `c_atomic` per partial-tile atomic write. An atomic write is
//! discounted by `overlap` when the same workgroup still has data-parallel
//! work queued behind it, which is where its latency can hide.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridInfo, HardwareModel, Policy, ProblemSize, TileShape};
use crate::scheduler::{build_schedule, Phase, Schedule, WriteMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub c_mac: f64,
    pub c_store: f64,
    pub c_atomic: f64,
    pub overlap: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_mac: 1.0,
            c_store: 4.0,
            c_atomic: 16.0,
            overlap: 0.75,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        non_negative("c_mac", self.c_mac)?;
        non_negative("c_store", self.c_store)?;
        non_negative("c_atomic", self.c_atomic)?;
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::InvalidArgument(format!(
                "overlap must lie in [0, 1], got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Parses a JSON object with any subset of `c_mac`, `c_store`,
    /// `c_atomic`, `overlap`; missing keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let params: CostParams = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("cost params: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    /// All constants multiplied by `factor` (overlap unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c_mac: self.c_mac * factor,
            c_store: self.c_store * factor,
            c_atomic: self.c_atomic * factor,
            overlap: self.overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub makespan: f64,
    pub utilization: f64,
    pub atomic_writes: u64,
    pub full_stores: u64,
    pub per_wg_cost: Vec<f64>,
}

pub fn estimate(sched: &Schedule, params: &CostParams) -> CostEstimate {
    let mut atomic_writes = 0;
    let mut full_stores = 0;
    let per_wg_cost: Vec<f64> = sched
        .assignments
        .iter()
        .map(|list| {
            let last_dp = list.iter().rposition(|i| i.phase == Phase::DataParallel);
            list.iter()
                .enumerate()
                .map(|(pos, item)| {
                    let write = match item.write_mode {
                        WriteMode::FullStore => {
                            full_stores += 1;
                            params.c_store
                        }
                        WriteMode::AtomicPartial => {
                            atomic_writes += 1;
                            if last_dp.is_some_and(|dp| dp > pos) {
                                params.c_atomic * (1.0 - params.overlap)
                            } else {
                                params.c_atomic
                            }
                        }
                    };
                    item.iterations() as f64 * params.c_mac + write
                })
                .sum()
        })
        .collect();

    let makespan = per_wg_cost.iter().copied().fold(0.0, f64::max);
    let utilization = if makespan > 0.0 {
        (sched.grid.total_iters as f64 * params.c_mac) / (sched.g as f64 * makespan)
    } else {
        1.0
    };
    CostEstimate {
        makespan,
        utilization,
        atomic_writes,
        full_stores,
        per_wg_cost,
    }
}

/// Wave-quantization efficiency of a plain data-parallel launch:
/// `T / (ceil(T / g) * g)`.
pub fn dp_utilization(grid: &GridInfo, g: u64) -> f64 {
    let waves = grid.total_tiles.div_ceil(g);
    grid.total_tiles as f64 / (waves as f64 * g as f64)
}

/// Per-size tuning outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneRecord {
    pub size: ProblemSize,
    pub costs: Vec<(Policy, CostEstimate)>,
    pub winner: Policy,
    pub runner_up: Policy,
    /// `(runner_up - winner) / runner_up` in makespan; 0 with a single
    /// policy.
    pub gain: f64,
}

impl TuneRecord {
    pub fn cost_of(&self, policy: Policy) -> Option<&CostEstimate> {
        self.costs
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|(_, c)| c)
    }
}

/// Relative makespan gain of `best` over `next`.
pub fn relative_gain(best: f64, next: f64) -> f64 {
    if next > 0.0 {
        (next - best) / next
    } else {
        0.0
    }
}

pub fn pick_winner(
    size: ProblemSize,
    tile: TileShape,
    hw: HardwareModel,
    policies: &[Policy],
    params: &CostParams,
) -> Result<TuneRecord> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policies to rank".into()));
    }
    let costs = policies
        .iter()
        .map(|&p| Ok((p, estimate(&build_schedule(size, tile, hw, p)?, params))))
        .collect::<Result<Vec<_>>>()?;

    let mut ranked: Vec<(f64, Policy)> = costs.iter().map(|(p, c)| (c.makespan, *p)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (best, winner) = ranked[0];
    let (next, runner_up) = ranked.get(1).copied().unwrap_or(ranked[0]);

    Ok(TuneRecord {
        size,
        costs,
        winner,
        runner_up,
        gain: relative_gain(best, next),
    })
}
