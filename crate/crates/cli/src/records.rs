//! Tuning records CSV: one row per `(size, policy)`.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use streamk_core::{Policy, ProblemSize, TuneRecord};

/// Tag written for policies outside the canonical ordinal range.
pub const NON_CANONICAL_ORDINAL: u8 = 255;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub m: u64,
    pub n: u64,
    pub k: u64,
    pub policy_ordinal: u8,
    pub sk_batches: u32,
    pub sk_first: u8,
    pub makespan: f64,
    pub utilization: f64,
    pub atomic_writes: u64,
    pub is_winner: u8,
}

impl RecordRow {
    pub fn size(&self) -> Result<ProblemSize> {
        Ok(ProblemSize::new(self.m, self.n, self.k)?)
    }

    pub fn policy(&self) -> Result<Policy> {
        if self.sk_first > 1 {
            bail!("sk_first must be 0 or 1, got {}", self.sk_first);
        }
        let policy = if self.policy_ordinal == NON_CANONICAL_ORDINAL {
            if self.sk_batches == 0 {
                bail!("non-canonical hybrid with zero Stream-K batches");
            }
            Policy::Hybrid {
                sk_batches: self.sk_batches,
                sk_first: self.sk_first == 1,
            }
        } else {
            Policy::from_ordinal(self.policy_ordinal)
                .ok_or_else(|| anyhow!("unknown policy ordinal {}", self.policy_ordinal))?
        };
        if policy.sk_batches() != self.sk_batches || u8::from(policy.sk_first()) != self.sk_first {
            bail!(
                "policy ordinal {} disagrees with sk_batches={} sk_first={}",
                self.policy_ordinal,
                self.sk_batches,
                self.sk_first
            );
        }
        Ok(policy)
    }
}

pub fn rows_for(record: &TuneRecord) -> impl Iterator<Item = RecordRow> + '_ {
    record.costs.iter().map(move |(policy, cost)| RecordRow {
        m: record.size.m(),
        n: record.size.n(),
        k: record.size.k(),
        policy_ordinal: policy.ordinal().unwrap_or(NON_CANONICAL_ORDINAL),
        sk_batches: policy.sk_batches(),
        sk_first: u8::from(policy.sk_first()),
        makespan: cost.makespan,
        utilization: cost.utilization,
        atomic_writes: cost.atomic_writes,
        is_winner: u8::from(*policy == record.winner),
    })
}

pub fn write_records<W: Write>(out: W, records: &[TuneRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in records {
        for row in rows_for(record) {
            writer.serialize(row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads every row; errors name the offending line.
pub fn read_records<R: Read>(input: R) -> Result<Vec<RecordRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().context("records header")?.clone();
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| match e.position() {
            Some(p) => anyhow!("records line {}: {e}", p.line()),
            None => anyhow!("records: {e}"),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: RecordRow = record
            .deserialize(Some(&headers))
            .map_err(|e| anyhow!("records line {line}: {e}"))?;
        row.policy()
            .with_context(|| format!("records line {line}"))?;
        row.size().with_context(|| format!("records line {line}"))?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use streamk_core::{canonical_policies, pick_winner, CostParams, HardwareModel, TileShape};

    fn sample_record() -> TuneRecord {
        pick_winner(
            ProblemSize::new(256, 512, 1024).unwrap(),
            TileShape::new(64, 64, 32).unwrap(),
            HardwareModel::new(5, 1).unwrap(),
            &canonical_policies(),
            &CostParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn writes_header_and_one_row_per_policy() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample_record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "m,n,k,policy_ordinal,sk_batches,sk_first,makespan,utilization,atomic_writes,is_winner"
        );
        assert_eq!(lines.count(), 7);
        let rows = read_records(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows.iter().map(|r| u32::from(r.is_winner)).sum::<u32>(), 1);
        for (row, policy) in rows.iter().zip(canonical_policies()) {
            assert_eq!(row.policy().unwrap(), policy);
        }
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "m,n,k,policy_ordinal,sk_batches,sk_first,makespan,utilization,atomic_writes,is_winner\n\
                    1,64,16,0,0,0,8,0.5,0,1\n\
                    1,64,16,1,1,1,oops,0.5,0,0\n";
        let err = read_records(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        let text = "m,n,k,policy_ordinal,sk_batches,sk_first,makespan,utilization,atomic_writes,is_winner\n\
                    1,64,16,0,0,0,8,0.5,0,1\n\
                    1,64,16,2,1,1,8,0.5,0,0\n";
        let err = format!("{:#}", read_records(text.as_bytes()).unwrap_err());
        assert!(err.contains("line 3"), "{err}");
    }
}
