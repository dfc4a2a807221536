//! Shared domain types: problem sizes, tile shapes, the hardware model and
//! the Stream-K++ policy family.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of policies in [`canonical_policies`].
pub const CANONICAL_POLICY_COUNT: usize = 7;

/// GEMM dimensions: `C[m x n] = A[m x k] * B[k x n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProblemSize {
    m: u64,
    n: u64,
    k: u64,
}

impl ProblemSize {
    pub fn new(m: u64, n: u64, k: u64) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "problem dimensions must be positive, got {m}x{n}x{k}"
            )));
        }
        Ok(Self { m, n, k })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }
}

impl fmt::Display for ProblemSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.n, self.k)
    }
}

impl FromStr for ProblemSize {
    type Err = Error;

    /// Parses `MxNxK`, e.g. `1024x1024x4096`.
    fn from_str(s: &str) -> Result<Self> {
        let [m, n, k] = parse_triple(s)?;
        Self::new(m, n, k)
    }
}

/// Output-tile (`blk_m x blk_n`) and K-slice (`blk_k`) block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileShape {
    blk_m: u64,
    blk_n: u64,
    blk_k: u64,
}

impl TileShape {
    pub fn new(blk_m: u64, blk_n: u64, blk_k: u64) -> Result<Self> {
        if blk_m == 0 || blk_n == 0 || blk_k == 0 {
            return Err(Error::InvalidArgument(format!(
                "tile dimensions must be positive, got {blk_m}x{blk_n}x{blk_k}"
            )));
        }
        Ok(Self {
            blk_m,
            blk_n,
            blk_k,
        })
    }

    pub fn blk_m(&self) -> u64 {
        self.blk_m
    }

    pub fn blk_n(&self) -> u64 {
        self.blk_n
    }

    pub fn blk_k(&self) -> u64 {
        self.blk_k
    }
}

impl fmt::Display for TileShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.blk_m, self.blk_n, self.blk_k)
    }
}

impl FromStr for TileShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let [m, n, k] = parse_triple(s)?;
        Self::new(m, n, k)
    }
}

fn parse_triple(s: &str) -> Result<[u64; 3]> {
    let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected three dimensions as AxBxC, got {s:?}"
        )));
    }
    let mut out = [0u64; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dimension {part:?} in {s:?}")))?;
    }
    Ok(out)
}

/// Persistent-kernel launch model: one grid slot per resident workgroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HardwareModel {
    cu_count: u64,
    occupancy: u64,
}

impl HardwareModel {
    /// CUs on one MI250X chiplet.
    pub const DEFAULT_CU_COUNT: u64 = 104;

    pub fn new(cu_count: u64, occupancy: u64) -> Result<Self> {
        if cu_count == 0 || occupancy == 0 {
            return Err(Error::InvalidArgument(format!(
                "cu_count and occupancy must be positive, got {cu_count} and {occupancy}"
            )));
        }
        Ok(Self {
            cu_count,
            occupancy,
        })
    }

    pub fn cu_count(&self) -> u64 {
        self.cu_count
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    /// Workgroup count `g` of the persistent launch.
    pub fn grid_size(&self) -> u64 {
        self.cu_count.saturating_mul(self.occupancy)
    }
}

impl Default for HardwareModel {
    fn default() -> Self {
        Self {
            cu_count: Self::DEFAULT_CU_COUNT,
            occupancy: 1,
        }
    }
}

/// A Stream-K++ scheduling policy.
///
/// The derived ordering matches the canonical ordinal on the canonical set
/// and is used for tie-breaking everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Policy {
    /// Every tile is processed whole by one workgroup, in round-robin waves.
    DataParallel,
    /// `sk_batches` waves of Stream-K work plus data-parallel full waves.
    /// With `sk_first` the Stream-K items run before the data-parallel ones.
    Hybrid { sk_batches: u32, sk_first: bool },
    /// The whole iteration space is split evenly across the grid.
    AllStreamK,
}

impl Policy {
    /// Hybrid policy with Stream-K work first.
    pub const fn hybrid(sk_batches: u32) -> Self {
        Policy::Hybrid {
            sk_batches,
            sk_first: true,
        }
    }

    /// Canonical ordinal (0..=6), or `None` for policies outside the
    /// canonical set.
    pub fn ordinal(&self) -> Option<u8> {
        match *self {
            Policy::DataParallel => Some(0),
            Policy::Hybrid {
                sk_batches,
                sk_first: true,
            } if (1..=5).contains(&sk_batches) => Some(sk_batches as u8),
            Policy::Hybrid { .. } => None,
            Policy::AllStreamK => Some(6),
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        match ordinal {
            0 => Some(Policy::DataParallel),
            1..=5 => Some(Policy::hybrid(ordinal as u32)),
            6 => Some(Policy::AllStreamK),
            _ => None,
        }
    }

    pub fn is_stream_k(&self) -> bool {
        !matches!(self, Policy::DataParallel)
    }

    pub fn sk_batches(&self) -> u32 {
        match *self {
            Policy::Hybrid { sk_batches, .. } => sk_batches,
            _ => 0,
        }
    }

    pub fn sk_first(&self) -> bool {
        matches!(self, Policy::Hybrid { sk_first: true, .. })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Policy::DataParallel => f.write_str("dp"),
            Policy::Hybrid {
                sk_batches,
                sk_first: true,
            } => write!(f, "sk{sk_batches}+dp"),
            Policy::Hybrid {
                sk_batches,
                sk_first: false,
            } => write!(f, "dp+sk{sk_batches}"),
            Policy::AllStreamK => f.write_str("allsk"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    /// Accepts the [`Display`](fmt::Display) forms and bare canonical
    /// ordinals.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown policy {s:?}"));
        if let Ok(ordinal) = s.parse::<u8>() {
            return Policy::from_ordinal(ordinal).ok_or_else(bad);
        }
        match s {
            "dp" => return Ok(Policy::DataParallel),
            "allsk" => return Ok(Policy::AllStreamK),
            _ => {}
        }
        let batches = |t: &str| -> Result<u32> {
            match t.parse::<u32>() {
                Ok(b) if b >= 1 => Ok(b),
                _ => Err(bad()),
            }
        };
        if let Some(rest) = s.strip_prefix("sk").and_then(|r| r.strip_suffix("+dp")) {
            return Ok(Policy::Hybrid {
                sk_batches: batches(rest)?,
                sk_first: true,
            });
        }
        if let Some(rest) = s.strip_prefix("dp+sk") {
            return Ok(Policy::Hybrid {
                sk_batches: batches(rest)?,
                sk_first: false,
            });
        }
        Err(bad())
    }
}

/// The seven shipped policies, in ordinal order: data-parallel, one to five
/// Stream-K batches ahead of data-parallel waves, and all-Stream-K.
pub fn canonical_policies() -> [Policy; CANONICAL_POLICY_COUNT] {
    [
        Policy::DataParallel,
        Policy::hybrid(1),
        Policy::hybrid(2),
        Policy::hybrid(3),
        Policy::hybrid(4),
        Policy::hybrid(5),
        Policy::AllStreamK,
    ]
}

/// Tile-grid geometry of a problem under a tile shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridInfo {
    pub m_tiles: u64,
    pub n_tiles: u64,
    pub iters_per_tile: u64,
    pub total_tiles: u64,
    pub total_iters: u64,
}

/// Hash key of a problem size: `m`, `n`, `k` as little-endian `u64`.
pub fn encode_key(size: ProblemSize) -> [u8; 24] {
    let mut key = [0u8; 24];
    key[0..8].copy_from_slice(&size.m.to_le_bytes());
    key[8..16].copy_from_slice(&size.n.to_le_bytes());
    key[16..24].copy_from_slice(&size.k.to_le_bytes());
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use proptest::prelude::*;

    fn size(m: u64, n: u64, k: u64) -> ProblemSize {
        ProblemSize::new(m, n, k).unwrap()
    }

    #[test]
    fn canonical_set_has_seven_members_in_ordinal_order() {
        let policies = canonical_policies();
        assert_eq!(policies.len(), 7);
        for (i, p) in policies.iter().enumerate() {
            assert_eq!(p.ordinal(), Some(i as u8));
            assert_eq!(Policy::from_ordinal(i as u8), Some(*p));
        }
        assert_eq!(Policy::DataParallel.ordinal(), Some(0));
        assert_eq!(Policy::AllStreamK.ordinal(), Some(6));
        assert_eq!(canonical_policies(), canonical_policies());
        let mut sorted = policies;
        sorted.sort();
        assert_eq!(sorted, policies);
    }

    #[test]
    fn non_canonical_hybrids_have_no_ordinal() {
        assert_eq!(Policy::hybrid(6).ordinal(), None);
        assert_eq!(
            Policy::Hybrid {
                sk_batches: 1,
                sk_first: false
            }
            .ordinal(),
            None
        );
        assert_eq!(Policy::from_ordinal(7), None);
    }

    #[test]
    fn policy_text_round_trips() {
        let mut all = canonical_policies().to_vec();
        all.push(Policy::hybrid(6));
        all.push(Policy::Hybrid {
            sk_batches: 1,
            sk_first: false,
        });
        for p in all {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert_eq!("3".parse::<Policy>().unwrap(), Policy::hybrid(3));
        assert!("sk0+dp".parse::<Policy>().is_err());
        assert!("9".parse::<Policy>().is_err());
    }

    #[test]
    fn key_layout() {
        let one = encode_key(size(1, 1, 1));
        let mut expected = [0u8; 24];
        expected[0] = 1;
        expected[8] = 1;
        expected[16] = 1;
        assert_eq!(one, expected);

        let key = encode_key(size(256, 512, 128));
        let mut expected = [0u8; 24];
        expected[1] = 0x01;
        expected[9] = 0x02;
        expected[16] = 0x80;
        assert_eq!(key, expected);

        assert_ne!(encode_key(size(2, 1, 1)), encode_key(size(1, 2, 1)));
    }

    #[test]
    fn key_is_injective_over_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let mut sizes = HashSet::new();
        let mut keys = HashSet::new();
        for _ in 0..1_000_000 {
            let s = size(
                rng.random_range(1..=u64::MAX),
                rng.random_range(1..=u64::MAX),
                rng.random_range(1..=u64::MAX),
            );
            if sizes.insert(s) {
                assert!(keys.insert(encode_key(s)));
            }
        }
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(ProblemSize::new(0, 1, 1).is_err());
        assert!(TileShape::new(1, 0, 1).is_err());
        assert!(HardwareModel::new(1, 0).is_err());
    }

    #[test]
    fn grid_size_products() {
        assert_eq!(HardwareModel::new(104, 1).unwrap().grid_size(), 104);
        assert_eq!(HardwareModel::new(1, 1).unwrap().grid_size(), 1);
        assert_eq!(HardwareModel::new(104, 2).unwrap().grid_size(), 208);
        assert_eq!(HardwareModel::default().grid_size(), 104);
    }

    #[test]
    fn parses_dimension_triples() {
        assert_eq!(
            "1024x1024x4096".parse::<ProblemSize>().unwrap(),
            size(1024, 1024, 4096)
        );
        assert_eq!(
            "256x128x32".parse::<TileShape>().unwrap(),
            TileShape::new(256, 128, 32).unwrap()
        );
        assert!("1x2".parse::<ProblemSize>().is_err());
        assert!("0x2x3".parse::<ProblemSize>().is_err());
        assert!("ax2x3".parse::<ProblemSize>().is_err());
    }

    proptest! {
        #[test]
        fn key_decodes_back(m in 1u64.., n in 1u64.., k in 1u64..) {
            let key = encode_key(size(m, n, k));
            let field = |i: usize| u64::from_le_bytes(key[i * 8..i * 8 + 8].try_into().unwrap());
            prop_assert_eq!((field(0), field(1), field(2)), (m, n, k));
        }
    }
}
