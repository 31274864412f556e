//! Two-phase unit-transfer balancing of a server-pair block.
//!
//! For an `m x m` block with total `W`, the target is `B = ceil(W / m)`.
//! Phase I moves single units down a column from an overloaded row to an
//! underloaded one until every row sum is at most `B`; column sums do not
//! change. Phase II moves units along a row from an overloaded column to an
//! underloaded one until every column sum is at most `B`; row sums do not
//! change. Each unit transfer lowers the active imbalance potential by one.
//!
//! Selections always take the smallest index: the first overloaded line, the
//! first underloaded line, and the first entry of the overloaded line that
//! is at least one.

use crate::error::Result;
use crate::matrix::{BlockMatrix, IntMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceReport {
    /// `ceil(W / m)`.
    pub target: u64,
    pub phase1_transfers: u64,
    pub phase2_transfers: u64,
    /// Row and column imbalance potentials of the input.
    pub initial_potentials: (u64, u64),
}

impl BalanceReport {
    pub fn transfers(&self) -> u64 {
        self.phase1_transfers + self.phase2_transfers
    }
}

/// Report for block `(src, dst)` of a block matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockBalance {
    pub src: usize,
    pub dst: usize,
    pub report: BalanceReport,
}

/// `ceil(W / m)` for an `m x m` block with total `W`; 0 for an empty block.
pub fn target_scale(x: &IntMatrix) -> u64 {
    let m = x.rows() as u64;
    if m == 0 {
        0
    } else {
        x.total().div_ceil(m)
    }
}

fn excess(sums: &[u64], target: u64) -> u64 {
    sums.iter().map(|&s| s.saturating_sub(target)).sum()
}

/// `(Phi_row, Phi_col)` of `x` against `target`.
pub fn potentials(x: &IntMatrix, target: u64) -> (u64, u64) {
    (excess(&x.row_sums(), target), excess(&x.col_sums(), target))
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
}

/// One phase of the algorithm. Along `Rows`, lines are rows and units move
/// within a column; along `Cols`, lines are columns and units move within a
/// row. At most `batch(excess, deficit, available)` units move per selection.
fn run_phase(
    x: &mut IntMatrix,
    target: u64,
    axis: Axis,
    batch: fn(u64, u64, u64) -> u64,
    observe: &mut dyn FnMut(&IntMatrix),
) -> Result<u64> {
    let m = x.rows();
    let entry = |x: &IntMatrix, line: usize, pos: usize| match axis {
        Axis::Rows => x.get(line, pos),
        Axis::Cols => x.get(pos, line),
    };
    let coords = |line: usize, pos: usize| match axis {
        Axis::Rows => (line, pos),
        Axis::Cols => (pos, line),
    };
    let mut sums = match axis {
        Axis::Rows => x.row_sums(),
        Axis::Cols => x.col_sums(),
    };
    let mut moved = 0;
    while let Some(over) = sums.iter().position(|&s| s > target) {
        let under = sums
            .iter()
            .position(|&s| s < target)
            .expect("some line is below target when another is above it");
        let pos = (0..m)
            .find(|&p| entry(x, over, p) >= 1)
            .expect("an overloaded line has a positive entry");
        let amount = batch(
            sums[over] - target,
            target - sums[under],
            entry(x, over, pos),
        );
        x.transfer(coords(over, pos), coords(under, pos), amount)?;
        sums[over] -= amount;
        sums[under] += amount;
        moved += amount;
        observe(x);
    }
    Ok(moved)
}

fn unit(_: u64, _: u64, _: u64) -> u64 {
    1
}

fn batched(excess: u64, deficit: u64, available: u64) -> u64 {
    excess.min(deficit).min(available)
}

fn balance_with(
    x: &IntMatrix,
    batch: fn(u64, u64, u64) -> u64,
    observe: &mut dyn FnMut(&IntMatrix),
) -> (IntMatrix, BalanceReport) {
    assert!(x.is_square(), "balancing needs a square block");
    let target = target_scale(x);
    let initial_potentials = potentials(x, target);
    let mut out = x.clone();
    // Transfers never underflow or change the total, so neither can fail.
    let phase1_transfers = run_phase(&mut out, target, Axis::Rows, batch, observe)
        .expect("unit transfers preserve the total");
    let phase2_transfers = run_phase(&mut out, target, Axis::Cols, batch, observe)
        .expect("unit transfers preserve the total");
    let report = BalanceReport {
        target,
        phase1_transfers,
        phase2_transfers,
        initial_potentials,
    };
    (out, report)
}

/// Balances an `m x m` block one unit transfer at a time.
///
/// # Panics
/// If `x` is not square.
pub fn balance_block(x: &IntMatrix) -> (IntMatrix, BalanceReport) {
    balance_with(x, unit, &mut |_| {})
}

/// [`balance_block`] with `observe` called on the matrix after every unit
/// transfer.
pub fn balance_block_observed(
    x: &IntMatrix,
    mut observe: impl FnMut(&IntMatrix),
) -> (IntMatrix, BalanceReport) {
    balance_with(x, unit, &mut observe)
}

/// Same result as [`balance_block`], but each selection moves as many units
/// as the unit-step loop would move before its selection changes.
pub fn balance_block_fast(x: &IntMatrix) -> (IntMatrix, BalanceReport) {
    balance_with(x, batched, &mut |_| {})
}

/// Balances every block of `x` independently; diagonal blocks are copied
/// unchanged when `skip_diagonal` is set. Reports are in row-major block
/// order.
pub fn balance_all_blocks(x: &BlockMatrix, skip_diagonal: bool) -> (BlockMatrix, Vec<BlockBalance>) {
    let n = x.shape().n();
    let mut out = x.clone();
    let mut reports = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if skip_diagonal && src == dst {
                continue;
            }
            let (balanced, report) = balance_block_fast(&x.block(src, dst));
            if report.transfers() > 0 {
                out.set_block(src, dst, &balanced)
                    .expect("balanced block has the same total");
            }
            reports.push(BlockBalance { src, dst, report });
        }
    }
    (out, reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::BlockShape;
    use proptest::prelude::*;

    fn mat(rows: &[&[u64]]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn balanced_block_is_untouched() {
        let x = mat(&[&[1, 1], &[1, 1]]);
        let (y, r) = balance_block(&x);
        assert_eq!(y, x);
        assert_eq!(r.target, 2);
        assert_eq!(r.transfers(), 0);
    }

    #[test]
    fn hand_traced_example() {
        let (y, r) = balance_block(&mat(&[&[3, 1], &[0, 0]]));
        assert_eq!(y, mat(&[&[0, 2], &[2, 0]]));
        assert_eq!(r.target, 2);
        assert_eq!(r.phase1_transfers, 2);
        assert_eq!(r.phase2_transfers, 1);
        assert_eq!(r.initial_potentials, (2, 1));
    }

    #[test]
    fn odd_total_rounds_target_up() {
        let x = mat(&[&[5, 0], &[0, 0]]);
        let (y, r) = balance_block(&x);
        assert_eq!(r.target, 3);
        assert_eq!(y.total(), 5);
        assert!(y.row_sums().iter().chain(&y.col_sums()).all(|&s| s <= 3));
    }

    #[test]
    fn empty_and_single_gpu_blocks() {
        let (y, r) = balance_block(&IntMatrix::zeros(3, 3));
        assert!(y.is_zero());
        assert_eq!(r.target, 0);
        let (y, r) = balance_block(&mat(&[&[7]]));
        assert_eq!(y, mat(&[&[7]]));
        assert_eq!(r.transfers(), 0);
    }

    #[test]
    fn hot_blocks_are_balanced_per_pair() {
        let shape = BlockShape::new(2, 3).unwrap();
        let mut x = BlockMatrix::zeros(shape);
        for (i, j) in [(0, 1), (1, 2), (2, 0), (0, 0)] {
            x.set_block(i, j, &mat(&[&[4, 0], &[0, 0]])).unwrap();
        }
        let (y, reports) = balance_all_blocks(&x, true);
        assert_eq!(reports.len(), 6);
        // The diagonal hot block is left alone.
        assert_eq!(y.block(0, 0), x.block(0, 0));
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert_eq!(y.block(i, j).max_marginal(), 2);
        }
        assert_eq!(y.aggregate_servers(), x.aggregate_servers());

        let (z, _) = balance_all_blocks(&x, false);
        assert_eq!(z.block(0, 0).max_marginal(), 2);

        let zero = BlockMatrix::zeros(shape);
        assert_eq!(balance_all_blocks(&zero, true).0, zero);
    }

    fn block(max_m: usize, max_entry: u64) -> impl Strategy<Value = IntMatrix> {
        (1..=max_m).prop_flat_map(move |m| {
            prop::collection::vec(0..=max_entry, m * m)
                .prop_map(move |v| IntMatrix::from_vec(m, m, v).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn fast_path_matches_unit_steps(x in block(6, 30)) {
            prop_assert_eq!(balance_block_fast(&x), balance_block(&x));
        }

        #[test]
        fn each_transfer_lowers_potential_by_one(x in block(5, 12)) {
            let target = target_scale(&x);
            let mut last = potentials(&x, target);
            let mut ok = true;
            balance_block_observed(&x, |y| {
                let now = potentials(y, target);
                let drop = (last.0 + last.1) - (now.0 + now.1);
                ok &= drop == 1 && y.total() == x.total();
                last = now;
            });
            prop_assert!(ok);
            prop_assert_eq!(last, (0, 0));
        }
    }
}
