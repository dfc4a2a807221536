//! Power-of-two benchmark grids.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use streamk_core::ProblemSize;

/// Inclusive power-of-two range `lo:hi:pow2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimRange {
    pub lo: u64,
    pub hi: u64,
}

impl DimRange {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if !lo.is_power_of_two() || !hi.is_power_of_two() {
            bail!("range bounds must be powers of two, got {lo}:{hi}");
        }
        if lo > hi {
            bail!("range lower bound {lo} exceeds upper bound {hi}");
        }
        Ok(Self { lo, hi })
    }

    pub fn values(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut v = self.lo;
        loop {
            out.push(v);
            if v >= self.hi {
                break;
            }
            v *= 2;
        }
        out
    }
}

impl FromStr for DimRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let (lo, hi) = match parts.as_slice() {
            [lo, hi] | [lo, hi, "pow2"] => (*lo, *hi),
            [_, _, step] => bail!("unsupported range step {step:?} (only pow2)"),
            _ => bail!("expected a range as lo:hi:pow2, got {s:?}"),
        };
        let lo = lo
            .parse()
            .with_context(|| format!("bad range bound {lo:?}"))?;
        let hi = hi
            .parse()
            .with_context(|| format!("bad range bound {hi:?}"))?;
        DimRange::new(lo, hi)
    }
}

impl fmt::Display for DimRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:pow2", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub m: DimRange,
    pub n: DimRange,
    pub k: DimRange,
}

impl Default for GridSpec {
    /// M in 1..8192, N in 64..8192, K in 16..65536.
    fn default() -> Self {
        Self {
            m: DimRange { lo: 1, hi: 8192 },
            n: DimRange { lo: 64, hi: 8192 },
            k: DimRange { lo: 16, hi: 65536 },
        }
    }
}

/// Cross product of the three ranges in lexicographic `(m, n, k)` order.
pub fn gen_problem_grid(spec: &GridSpec) -> Vec<ProblemSize> {
    let (ms, ns, ks) = (spec.m.values(), spec.n.values(), spec.k.values());
    let mut sizes = Vec::with_capacity(ms.len() * ns.len() * ks.len());
    for &m in &ms {
        for &n in &ns {
            for &k in &ks {
                sizes.push(ProblemSize::new(m, n, k).expect("powers of two are positive"));
            }
        }
    }
    sizes
}
