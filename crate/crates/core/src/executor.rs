//! Host execution of a [`Schedule`] as a real GEMM, with atomic-add
//! accumulation of partial tiles, and the naive reference product used as
//! its oracle.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{HardwareModel, Policy, ProblemSize, TileShape};
use crate::scheduler::{build_schedule, grid_info, Schedule, WorkItem};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Integer-valued entries drawn uniformly from `[lo, hi]`.
    pub fn random_integers(rows: usize, cols: usize, lo: i32, hi: i32, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| f64::from(rng.random_range(lo..=hi)))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Bitwise equality of every element.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `C = A * B` with every `C[i][j]` accumulated in ascending `k` order.
pub fn reference_gemm(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (m, n, k) = (a.rows, b.cols, a.cols);
    let mut c = Matrix::zeros(m, n);
    for i in 0..m {
        let c_row = &mut c.data[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a.data[i * k + p];
            let b_row = &b.data[p * n..(p + 1) * n];
            for (c_ij, b_pj) in c_row.iter_mut().zip(b_row) {
                *c_ij += a_ip * b_pj;
            }
        }
    }
    Ok(c)
}

/// Geometry shared by every work item of one execution.
struct Kernel<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    m: usize,
    n: usize,
    k: usize,
    blk_m: usize,
    blk_n: usize,
    blk_k: usize,
    n_tiles: usize,
}

/// Output region of one work item, clipped to the matrix edges.
struct TileRegion {
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::InvalidArgument(format!("dimension {v} too large")))
}

impl<'a> Kernel<'a> {
    fn new(
        a: &'a Matrix,
        b: &'a Matrix,
        sched: &Schedule,
        tile: TileShape,
        size: ProblemSize,
    ) -> Result<Self> {
        let (m, n, k) = (
            to_usize(size.m())?,
            to_usize(size.n())?,
            to_usize(size.k())?,
        );
        if a.rows != m || a.cols != k || b.rows != k || b.cols != n {
            return Err(Error::DimensionMismatch(format!(
                "problem {size} needs A {m}x{k} and B {k}x{n}, got {}x{} and {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )));
        }
        let grid = grid_info(size, tile)?;
        if grid != sched.grid {
            return Err(Error::ScheduleMismatch(format!(
                "schedule grid {:?} was not built for {size} with tile {tile}",
                sched.grid
            )));
        }
        if let Some(item) = sched.items().find(|item| {
            item.tile_idx >= grid.total_tiles
                || item.local_iter_begin >= item.local_iter_end
                || item.local_iter_end > grid.iters_per_tile
        }) {
            return Err(Error::ScheduleMismatch(format!(
                "work item {item:?} is outside the grid"
            )));
        }
        Ok(Self {
            a,
            b,
            m,
            n,
            k,
            blk_m: to_usize(tile.blk_m())?,
            blk_n: to_usize(tile.blk_n())?,
            blk_k: to_usize(tile.blk_k())?,
            n_tiles: to_usize(grid.n_tiles)?,
        })
    }

    /// Runs the MAC loop of `item` into `accum` (blk_m x blk_n, row-major).
    /// Rows and columns past the matrix edge are never touched.
    fn mac_loop(&self, item: &WorkItem, accum: &mut [f64]) -> TileRegion {
        let tile_idx = item.tile_idx as usize;
        let row0 = (tile_idx / self.n_tiles) * self.blk_m;
        let col0 = (tile_idx % self.n_tiles) * self.blk_n;
        let rows = self.blk_m.min(self.m - row0);
        let cols = self.blk_n.min(self.n - col0);
        let k_begin = item.local_iter_begin as usize * self.blk_k;
        let k_end = (item.local_iter_end as usize * self.blk_k).min(self.k);

        accum.fill(0.0);
        for i in 0..rows {
            let acc_row = &mut accum[i * self.blk_n..i * self.blk_n + cols];
            let a_row = &self.a.data[(row0 + i) * self.k..(row0 + i + 1) * self.k];
            for (p, &a_ip) in a_row.iter().enumerate().take(k_end).skip(k_begin) {
                let b_row = &self.b.data[p * self.n + col0..p * self.n + col0 + cols];
                for (acc, b_pj) in acc_row.iter_mut().zip(b_row) {
                    *acc += a_ip * b_pj;
                }
            }
        }
        TileRegion {
            row0,
            col0,
            rows,
            cols,
        }
    }

    fn add_into(&self, c: &mut Matrix, region: &TileRegion, accum: &[f64]) {
        for i in 0..region.rows {
            let dst = &mut c.data[(region.row0 + i) * self.n + region.col0..][..region.cols];
            for (d, s) in dst.iter_mut().zip(&accum[i * self.blk_n..]) {
                *d += s;
            }
        }
    }

    fn atomic_add_into(&self, c: &[AtomicU64], region: &TileRegion, accum: &[f64]) {
        for i in 0..region.rows {
            let dst = &c[(region.row0 + i) * self.n + region.col0..][..region.cols];
            for (d, s) in dst.iter().zip(&accum[i * self.blk_n..]) {
                atomic_add_f64(d, *s);
            }
        }
    }
}

fn atomic_add_f64(cell: &AtomicU64, value: f64) {
    let mut current = cell.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(current) + value).to_bits();
        match cell.compare_exchange_weak(current, next, Ordering::AcqRel, Ordering::Relaxed) {
            Ok(_) => return,
            Err(actual) => current = actual,
        }
    }
}

/// Every `(workgroup, item index)` pair of the schedule in listing order.
pub fn natural_order(sched: &Schedule) -> Vec<(usize, usize)> {
    sched
        .assignments
        .iter()
        .enumerate()
        .flat_map(|(x, list)| (0..list.len()).map(move |i| (x, i)))
        .collect()
}

/// Runs every work item sequentially, workgroup by workgroup.
pub fn execute_schedule(
    a: &Matrix,
    b: &Matrix,
    sched: &Schedule,
    tile: TileShape,
    size: ProblemSize,
) -> Result<Matrix> {
    execute_in_order(a, b, sched, tile, size, &natural_order(sched))
}

/// Runs the work items in an explicit global order of
/// `(workgroup, item index)` pairs. Every item must appear exactly once.
pub fn execute_in_order(
    a: &Matrix,
    b: &Matrix,
    sched: &Schedule,
    tile: TileShape,
    size: ProblemSize,
    order: &[(usize, usize)],
) -> Result<Matrix> {
    let kernel = Kernel::new(a, b, sched, tile, size)?;
    if order.len() != sched.item_count() {
        return Err(Error::InvalidArgument(format!(
            "execution order lists {} items, schedule has {}",
            order.len(),
            sched.item_count()
        )));
    }
    let mut c = Matrix::zeros(kernel.m, kernel.n);
    let mut accum = vec![0.0; kernel.blk_m * kernel.blk_n];
    for &(x, i) in order {
        let item = sched
            .assignments
            .get(x)
            .and_then(|list| list.get(i))
            .ok_or_else(|| Error::InvalidArgument(format!("no work item ({x}, {i})")))?;
        let region = kernel.mac_loop(item, &mut accum);
        kernel.add_into(&mut c, &region, &accum);
    }
    Ok(c)
}

/// Runs workgroups concurrently; partial tiles are combined with
/// compare-and-swap float adds into a shared output.
pub fn execute_schedule_concurrent(
    a: &Matrix,
    b: &Matrix,
    sched: &Schedule,
    tile: TileShape,
    size: ProblemSize,
) -> Result<Matrix> {
    let kernel = Kernel::new(a, b, sched, tile, size)?;
    let c: Vec<AtomicU64> = (0..kernel.m * kernel.n)
        .map(|_| AtomicU64::new(0))
        .collect();
    sched.assignments.par_iter().for_each(|list| {
        let mut accum = vec![0.0; kernel.blk_m * kernel.blk_n];
        for item in list {
            let region = kernel.mac_loop(item, &mut accum);
            kernel.atomic_add_into(&c, &region, &accum);
        }
    });
    let data = c
        .into_iter()
        .map(|v| f64::from_bits(v.into_inner()))
        .collect();
    Matrix::from_vec(kernel.m, kernel.n, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub exact_match: bool,
    pub max_abs_diff: f64,
}

/// Builds the schedule, multiplies seeded integer matrices (entries in
/// `[-8, 8]`) both ways and compares.
pub fn run_equivalence(
    size: ProblemSize,
    tile: TileShape,
    hw: HardwareModel,
    policy: Policy,
    rng_seed: u64,
) -> Result<EquivalenceReport> {
    let sched = build_schedule(size, tile, hw, policy)?;
    equivalence_for(&sched, size, tile, rng_seed)
}

/// Same as [`run_equivalence`] for a prebuilt, possibly hand-edited,
/// schedule.
pub fn equivalence_for(
    sched: &Schedule,
    size: ProblemSize,
    tile: TileShape,
    rng_seed: u64,
) -> Result<EquivalenceReport> {
    let (a, b) = random_operands(size, rng_seed)?;
    let expected = reference_gemm(&a, &b)?;
    let actual = execute_schedule(&a, &b, sched, tile, size)?;
    Ok(EquivalenceReport {
        exact_match: actual.bit_eq(&expected),
        max_abs_diff: actual.max_abs_diff(&expected),
    })
}

/// Seeded integer-valued `A (m x k)` and `B (k x n)`.
pub fn random_operands(size: ProblemSize, rng_seed: u64) -> Result<(Matrix, Matrix)> {
    let (m, n, k) = (
        to_usize(size.m())?,
        to_usize(size.n())?,
        to_usize(size.k())?,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let a = Matrix::random_integers(m, k, -8, 8, &mut rng);
    let b = Matrix::random_integers(k, n, -8, 8, &mut rng);
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonical_policies;
    use crate::scheduler::WriteMode;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn reference_examples() {
        let i2 = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = m(2, 2, &[3.5, -1.0, 7.0, 2.0]);
        assert_eq!(reference_gemm(&i2, &b).unwrap(), b);

        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(
            reference_gemm(&a, &b).unwrap(),
            m(2, 2, &[19.0, 22.0, 43.0, 50.0])
        );

        let z = reference_gemm(&Matrix::zeros(3, 4), &Matrix::zeros(4, 5)).unwrap();
        assert_eq!(z, Matrix::zeros(3, 5));
    }

    #[test]
    fn reference_rejects_mismatch() {
        let err = reference_gemm(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn single_tile_split_four_ways() {
        let size = ProblemSize::new(1, 64, 16).unwrap();
        let tile = TileShape::new(64, 64, 4).unwrap();
        let hw = HardwareModel::new(4, 1).unwrap();
        let sched = build_schedule(size, tile, hw, Policy::AllStreamK).unwrap();
        assert_eq!(sched.item_count(), 4);
        assert!(sched
            .items()
            .all(|i| i.write_mode == WriteMode::AtomicPartial));

        let (a, b) = random_operands(size, 3).unwrap();
        // Sum of four independent K-quarter products.
        let mut expected = Matrix::zeros(1, 64);
        for q in 0..4 {
            for j in 0..64 {
                let mut part = 0.0;
                for p in q * 4..q * 4 + 4 {
                    part += a.get(0, p) * b.get(p, j);
                }
                expected.data[j] += part;
            }
        }
        let got = execute_schedule(&a, &b, &sched, tile, size).unwrap();
        assert!(got.bit_eq(&expected));
        assert!(got.bit_eq(&reference_gemm(&a, &b).unwrap()));
    }

    #[test]
    fn equivalence_examples() {
        let tile = TileShape::new(64, 64, 32).unwrap();
        let r = run_equivalence(
            ProblemSize::new(256, 256, 256).unwrap(),
            tile,
            HardwareModel::new(104, 1).unwrap(),
            Policy::AllStreamK,
            42,
        )
        .unwrap();
        assert!(r.exact_match);
        assert_eq!(r.max_abs_diff, 0.0);

        let r = run_equivalence(
            ProblemSize::new(256, 256, 256).unwrap(),
            tile,
            HardwareModel::new(5, 1).unwrap(),
            Policy::hybrid(2),
            7,
        )
        .unwrap();
        assert!(r.exact_match);

        let r = run_equivalence(
            ProblemSize::new(100, 100, 100).unwrap(),
            tile,
            HardwareModel::default(),
            Policy::hybrid(3),
            1,
        )
        .unwrap();
        assert!(r.exact_match);

        for policy in canonical_policies() {
            let r = run_equivalence(
                ProblemSize::new(1, 64, 16).unwrap(),
                TileShape::new(64, 64, 16).unwrap(),
                HardwareModel::default(),
                policy,
                9,
            )
            .unwrap();
            assert!(r.exact_match, "{policy}");
        }
    }

    #[test]
    fn concurrent_and_shuffled_match_sequential() {
        use rand::seq::SliceRandom;

        let size = ProblemSize::new(130, 70, 90).unwrap();
        let tile = TileShape::new(32, 16, 8).unwrap();
        let hw = HardwareModel::new(7, 2).unwrap();
        let (a, b) = random_operands(size, 11).unwrap();
        let expected = reference_gemm(&a, &b).unwrap();
        for policy in canonical_policies() {
            let sched = build_schedule(size, tile, hw, policy).unwrap();
            let seq = execute_schedule(&a, &b, &sched, tile, size).unwrap();
            let par = execute_schedule_concurrent(&a, &b, &sched, tile, size).unwrap();
            assert!(seq.bit_eq(&expected));
            assert!(par.bit_eq(&expected));

            let mut order = natural_order(&sched);
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
            let shuffled = execute_in_order(&a, &b, &sched, tile, size, &order).unwrap();
            assert!(shuffled.bit_eq(&expected));
        }
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let size = ProblemSize::new(64, 64, 64).unwrap();
        let tile = TileShape::new(32, 32, 32).unwrap();
        let hw = HardwareModel::new(4, 1).unwrap();
        let sched = build_schedule(size, tile, hw, Policy::DataParallel).unwrap();
        let (a, b) = random_operands(size, 1).unwrap();

        let other_tile = TileShape::new(16, 32, 32).unwrap();
        assert!(matches!(
            execute_schedule(&a, &b, &sched, other_tile, size),
            Err(Error::ScheduleMismatch(_))
        ));
        let other_size = ProblemSize::new(64, 64, 63).unwrap();
        assert!(matches!(
            execute_schedule(&a, &b, &sched, tile, other_size),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dropped_item_breaks_equivalence() {
        let size = ProblemSize::new(100, 100, 100).unwrap();
        let tile = TileShape::new(32, 32, 16).unwrap();
        let hw = HardwareModel::new(5, 1).unwrap();
        let mut sched = build_schedule(size, tile, hw, Policy::hybrid(2)).unwrap();
        sched.assignments[0].remove(0);
        let r = equivalence_for(&sched, size, tile, 2).unwrap();
        assert!(!r.exact_match);
        assert!(r.max_abs_diff > 0.0);
    }
}
