//! Tuning sweep: rank every canonical policy per size, record the results
//! and insert each winner into the sieve.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use streamk_core::sieve::render_header;
use streamk_core::{
    bank_serialize, canonical_policies, elimination_stats, pick_winner, CostParams,
    EliminationStats, HardwareModel, Policy, SieveBank, TileShape, TuneRecord,
};

use crate::grid::{gen_problem_grid, GridSpec};
use crate::records::write_records;

#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub grid: GridSpec,
    pub tile: TileShape,
    pub hw: HardwareModel,
    pub params: CostParams,
    pub capacity: u64,
    pub fp_target: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            tile: TileShape::new(256, 128, 32).unwrap(),
            hw: HardwareModel::default(),
            params: CostParams::default(),
            capacity: SieveBank::DEFAULT_CAPACITY,
            fp_target: SieveBank::DEFAULT_FP_TARGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub records: Vec<TuneRecord>,
    pub bank: SieveBank,
    pub stats: EliminationStats,
}

impl TuneOutcome {
    pub fn winner_counts(&self) -> BTreeMap<Policy, u64> {
        winner_counts(self.records.iter().map(|r| r.winner))
    }
}

/// Every canonical policy starts at zero so absent winners still show up.
pub fn winner_counts(winners: impl IntoIterator<Item = Policy>) -> BTreeMap<Policy, u64> {
    let mut counts: BTreeMap<Policy, u64> = canonical_policies().iter().map(|&p| (p, 0)).collect();
    for w in winners {
        *counts.entry(w).or_default() += 1;
    }
    counts
}

pub fn run_tune(cfg: &TuneConfig) -> Result<TuneOutcome> {
    cfg.params.validate()?;
    let sizes = gen_problem_grid(&cfg.grid);
    let policies = canonical_policies();

    // Sizes are independent; results come back in grid order.
    let records = sizes
        .par_iter()
        .map(|&size| pick_winner(size, cfg.tile, cfg.hw, &policies, &cfg.params))
        .collect::<Result<Vec<_>, _>>()?;

    let mut bank = SieveBank::new(&policies, cfg.capacity, cfg.fp_target)?;
    for record in &records {
        bank.insert(record.size, record.winner)?;
    }
    let stats = elimination_stats(&bank, &records, Policy::DataParallel)?;
    Ok(TuneOutcome {
        records,
        bank,
        stats,
    })
}

/// Writes `contents` to a sibling temp file and renames it into place, so
/// a failed write never leaves a partial file behind.
fn write_atomically(
    path: &Path,
    contents: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .with_context(|| format!("{} is not a file path", path.display()))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));

    let result = (|| {
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut out = BufWriter::new(file);
        contents(&mut out)?;
        out.flush()?;
        out.get_ref().sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub sieve: PathBuf,
    pub records: PathBuf,
    pub header: Option<PathBuf>,
}

/// Writes the sieve file, records CSV and optional header. On failure every
/// output already written by this call is removed.
pub fn write_outputs(outcome: &TuneOutcome, paths: &OutputPaths) -> Result<()> {
    let mut written: Vec<&Path> = Vec::new();
    let result = (|| {
        write_atomically(&paths.sieve, |out| {
            out.write_all(&bank_serialize(&outcome.bank))?;
            Ok(())
        })?;
        written.push(&paths.sieve);
        write_atomically(&paths.records, |out| write_records(out, &outcome.records))?;
        written.push(&paths.records);
        if let Some(header) = &paths.header {
            write_atomically(header, |out| {
                out.write_all(render_header(&outcome.bank, "streamk_sieve").as_bytes())?;
                Ok(())
            })?;
        }
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

pub fn summary(outcome: &TuneOutcome) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "tuned {} sizes", outcome.records.len());
    let _ = writeln!(s, "winners:");
    for (policy, count) in outcome.winner_counts() {
        let _ = writeln!(s, "  {:<8} {count}", policy.to_string());
    }
    let st = &outcome.stats;
    let _ = writeln!(
        s,
        "elimination: {:.4} of non-baseline evaluations skipped ({} saved, {} still evaluated, {} false positives, {} false negatives)",
        st.eliminated_fraction, st.evaluations_saved, st.evaluated_non_baseline, st.false_positives, st.false_negatives
    );
    s
}
