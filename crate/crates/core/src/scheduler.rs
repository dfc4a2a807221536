//! Work decomposition for the Stream-K++ policy family.
//!
//! The unit of work is one `blk_k` iteration of one output tile. Tiles are
//! linearized row-major over `(m_tiles, n_tiles)` and iterations are
//! numbered `tile_idx * iters_per_tile + local_iter`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{GridInfo, HardwareModel, Policy, ProblemSize, TileShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WriteMode {
    /// The item covers the whole K loop of its tile and stores it directly.
    FullStore,
    /// The item covers part of the K loop and must be atomically added.
    AtomicPartial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    StreamK,
    DataParallel,
}

/// A contiguous run of K iterations `[local_iter_begin, local_iter_end)` of
/// one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorkItem {
    pub tile_idx: u64,
    pub local_iter_begin: u64,
    pub local_iter_end: u64,
    pub write_mode: WriteMode,
    pub phase: Phase,
}

impl WorkItem {
    pub fn iterations(&self) -> u64 {
        self.local_iter_end - self.local_iter_begin
    }
}

/// Per-workgroup ordered work lists. `assignments[x]` is what workgroup `x`
/// executes, in order. Empty lists are kept so indices stay stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub grid: GridInfo,
    pub g: u64,
    pub policy: Policy,
    pub assignments: Vec<Vec<WorkItem>>,
}

impl Schedule {
    pub fn items(&self) -> impl Iterator<Item = &WorkItem> + '_ {
        self.assignments.iter().flatten()
    }

    pub fn item_count(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }

    /// Number of tiles in the Stream-K region.
    pub fn sk_tiles(&self) -> u64 {
        sk_region_tiles(self.policy, self.grid.total_tiles, self.g)
    }
}

pub fn grid_info(size: ProblemSize, tile: TileShape) -> Result<GridInfo> {
    let m_tiles = size.m().div_ceil(tile.blk_m());
    let n_tiles = size.n().div_ceil(tile.blk_n());
    let iters_per_tile = size.k().div_ceil(tile.blk_k());
    let total_tiles = m_tiles.checked_mul(n_tiles).ok_or(Error::ProblemTooLarge)?;
    let total_iters = total_tiles
        .checked_mul(iters_per_tile)
        .ok_or(Error::ProblemTooLarge)?;
    Ok(GridInfo {
        m_tiles,
        n_tiles,
        iters_per_tile,
        total_tiles,
        total_iters,
    })
}

pub fn grid_size(hw: HardwareModel) -> u64 {
    hw.grid_size()
}

/// Even split of `[0, total_iters)` into `g` contiguous ranges of
/// `ceil(total_iters / g)` iterations; trailing ranges may be short or empty.
pub fn streamk_ranges(total_iters: u64, g: u64) -> Vec<Range<u64>> {
    assert!(g >= 1, "grid size must be positive");
    let per_wg = total_iters.div_ceil(g);
    (0..g)
        .map(|x| {
            let begin = x.saturating_mul(per_wg).min(total_iters);
            let end = begin.saturating_add(per_wg).min(total_iters);
            begin..end
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterLocation {
    pub tile_idx: u64,
    pub tile_m: u64,
    pub tile_n: u64,
    pub local_iter: u64,
}

pub fn locate_iter(iter: u64, grid: &GridInfo) -> Result<IterLocation> {
    if iter >= grid.total_iters {
        return Err(Error::IterOutOfRange {
            iter,
            total: grid.total_iters,
        });
    }
    let tile_idx = iter / grid.iters_per_tile;
    Ok(IterLocation {
        tile_idx,
        tile_m: tile_idx / grid.n_tiles,
        tile_n: tile_idx % grid.n_tiles,
        local_iter: iter - tile_idx * grid.iters_per_tile,
    })
}

/// Tiles handed to the Stream-K phase: the last (possibly partial) wave plus
/// `sk_batches - 1` full waves. A zero remainder still gives one full wave so
/// that `Hybrid(1)` differs from data-parallel.
fn sk_region_tiles(policy: Policy, total_tiles: u64, g: u64) -> u64 {
    match policy {
        Policy::DataParallel => 0,
        Policy::AllStreamK => total_tiles,
        Policy::Hybrid { sk_batches, .. } => {
            let rem = total_tiles % g;
            let last_wave = if rem > 0 { rem } else { g };
            let full_waves = u64::from(sk_batches.max(1) - 1);
            full_waves
                .saturating_mul(g)
                .saturating_add(last_wave)
                .min(total_tiles)
        }
    }
}

pub fn build_schedule(
    size: ProblemSize,
    tile: TileShape,
    hw: HardwareModel,
    policy: Policy,
) -> Result<Schedule> {
    if let Policy::Hybrid { sk_batches: 0, .. } = policy {
        return Err(Error::InvalidArgument(
            "hybrid policy needs at least one Stream-K batch".into(),
        ));
    }
    let grid = grid_info(size, tile)?;
    let g = hw.grid_size();
    let wg_count = usize::try_from(g)
        .map_err(|_| Error::InvalidArgument(format!("grid size {g} does not fit in memory")))?;

    let sk_tiles = sk_region_tiles(policy, grid.total_tiles, g);
    let dp_tiles = grid.total_tiles - sk_tiles;

    let mut dp_lists: Vec<Vec<WorkItem>> = vec![Vec::new(); wg_count];
    for t in 0..dp_tiles {
        dp_lists[(t % g) as usize].push(WorkItem {
            tile_idx: t,
            local_iter_begin: 0,
            local_iter_end: grid.iters_per_tile,
            write_mode: WriteMode::FullStore,
            phase: Phase::DataParallel,
        });
    }

    let mut sk_lists: Vec<Vec<WorkItem>> = vec![Vec::new(); wg_count];
    if sk_tiles > 0 {
        let region_offset = dp_tiles * grid.iters_per_tile;
        let region_iters = sk_tiles * grid.iters_per_tile;
        for (list, range) in sk_lists.iter_mut().zip(streamk_ranges(region_iters, g)) {
            let mut iter = region_offset + range.start;
            let iter_end = region_offset + range.end;
            while iter < iter_end {
                let loc = locate_iter(iter, &grid)?;
                let tile_iter = iter - loc.local_iter;
                let tile_iter_end = tile_iter + grid.iters_per_tile;
                let local_end = iter_end.min(tile_iter_end) - tile_iter;
                let full = loc.local_iter == 0 && local_end == grid.iters_per_tile;
                list.push(WorkItem {
                    tile_idx: loc.tile_idx,
                    local_iter_begin: loc.local_iter,
                    local_iter_end: local_end,
                    write_mode: if full {
                        WriteMode::FullStore
                    } else {
                        WriteMode::AtomicPartial
                    },
                    phase: Phase::StreamK,
                });
                iter = tile_iter_end;
            }
        }
    }

    let sk_first = !matches!(
        policy,
        Policy::Hybrid {
            sk_first: false,
            ..
        }
    );
    let assignments = dp_lists
        .into_iter()
        .zip(sk_lists)
        .map(|(dp, sk)| {
            let (mut first, second) = if sk_first { (sk, dp) } else { (dp, sk) };
            first.extend(second);
            first
        })
        .collect();

    Ok(Schedule {
        grid,
        g,
        policy,
        assignments,
    })
}

/// Exactly-once coverage check over the `(tile, local_iter)` space.
/// `gaps` and `duplicates` are measured in iterations; items outside the
/// grid are counted in `invalid_items` and ignored otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub covered_once: bool,
    pub duplicates: u64,
    pub gaps: u64,
    pub invalid_items: u64,
}

pub fn validate_schedule(sched: &Schedule) -> CoverageReport {
    let grid = &sched.grid;
    let mut report = CoverageReport::default();

    // (tile, position, depth delta); ends sort before begins at equal positions.
    let mut events: Vec<(u64, u64, i64)> = Vec::with_capacity(sched.item_count() * 2);
    for item in sched.items() {
        if item.tile_idx >= grid.total_tiles
            || item.local_iter_begin >= item.local_iter_end
            || item.local_iter_end > grid.iters_per_tile
        {
            report.invalid_items += 1;
            continue;
        }
        events.push((item.tile_idx, item.local_iter_begin, 1));
        events.push((item.tile_idx, item.local_iter_end, -1));
    }
    events.sort_unstable();

    let mut tiles_seen = 0u64;
    let mut i = 0;
    while i < events.len() {
        let tile = events[i].0;
        tiles_seen += 1;
        let mut depth = 0i64;
        let mut prev = 0u64;
        while i < events.len() && events[i].0 == tile {
            let (_, pos, delta) = events[i];
            let span = pos - prev;
            match depth {
                0 => report.gaps += span,
                1 => {}
                d => report.duplicates += (d as u64 - 1) * span,
            }
            depth += delta;
            prev = pos;
            i += 1;
        }
        report.gaps += grid.iters_per_tile - prev;
    }
    report.gaps += (grid.total_tiles - tiles_seen) * grid.iters_per_tile;

    report.covered_once = report.gaps == 0 && report.duplicates == 0 && report.invalid_items == 0;
    report
}
