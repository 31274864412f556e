//! Hierarchical decomposition of `(m, n)`-block matrices.
//!
//! Each `m x m` block is decomposed on its own, the `n x n` matrix of block
//! scales is decomposed once, and every server-level slot `d` tells each
//! block which of its own parts to play in global slot `d`. Because the
//! server-level slot is a subpermutation, at most one block per block row and
//! block column is active in any slot, and the active blocks are themselves
//! subpermutations, so every global slot is a valid `mn x mn` matching.

use crate::bvn::decompose;
use crate::error::Result;
use crate::matrix::{BlockMatrix, BlockShape, IntMatrix, Schedule, SubPermutation};

/// Per-block scales and the global slot count they imply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockScales {
    pub shape: BlockShape,
    /// `n x n`; entry `(i, j)` is the scale of block `(i, j)`.
    pub delta: IntMatrix,
    /// Largest row or column sum of `delta`.
    pub global_delta: u64,
}

/// Global slot indices assigned to each block, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    n: usize,
    slots: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn servers(&self) -> usize {
        self.n
    }

    /// Global slots (0-based, ascending) in which block `(i, j)` transmits.
    pub fn slots(&self, i: usize, j: usize) -> &[usize] {
        &self.slots[i * self.n + j]
    }
}

pub fn block_scales(x: &BlockMatrix) -> BlockScales {
    let shape = x.shape();
    let n = shape.n();
    let data = (0..n * n)
        .map(|idx| x.block(idx / n, idx % n).max_marginal())
        .collect();
    let delta = IntMatrix::from_vec(n, n, data).expect("scales of a valid matrix");
    let global_delta = delta.max_marginal();
    BlockScales {
        shape,
        delta,
        global_delta,
    }
}

/// Splits the scale matrix into `global_delta` server-level subpermutations
/// and records, for every block, the slots in which it is selected.
pub fn allocate(delta: &IntMatrix, global_delta: u64) -> Result<Allocation> {
    let n = delta.rows();
    let res = decompose(delta, global_delta)?;
    let mut slots = vec![Vec::new(); n * n];
    for (d, q) in res.parts.iter().enumerate() {
        for (i, j) in q.pairs() {
            slots[i * n + j].push(d);
        }
    }
    Ok(Allocation { n, slots })
}

/// Decomposes `x` into exactly `block_scales(x).global_delta` slots; slots
/// where no block is active are kept as empty matchings.
pub fn hier_decompose(x: &BlockMatrix) -> Schedule {
    let scales = block_scales(x);
    let shape = scales.shape;
    let (m, n) = (shape.m(), shape.n());
    let total = scales.global_delta as usize;

    let allocation =
        allocate(&scales.delta, scales.global_delta).expect("global scale bounds the scale matrix");

    let mut slots = vec![SubPermutation::empty(shape.ports()); total];
    for i in 0..n {
        for j in 0..n {
            let block_delta = scales.delta.get(i, j);
            if block_delta == 0 {
                continue;
            }
            let parts = decompose(&x.block(i, j), block_delta)
                .expect("block scale is tight")
                .parts;
            let targets = allocation.slots(i, j);
            debug_assert_eq!(targets.len() as u64, block_delta);
            // Part r goes to the r-th smallest allocated slot; padded parts
            // past `parts.len()` are empty.
            for (part, &d) in parts.iter().zip(targets) {
                for (l, k) in part.pairs() {
                    slots[d]
                        .insert(i * m + l, j * m + k)
                        .expect("server-level slot is a subpermutation");
                }
            }
        }
    }
    Schedule::new(x.data().clone(), slots).expect("hierarchical slots reconstruct the input")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[u64]]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    fn cyclic_ones() -> BlockMatrix {
        let shape = BlockShape::new(2, 3).unwrap();
        let ones = mat(&[&[1, 1], &[1, 1]]);
        let zero = IntMatrix::zeros(2, 2);
        let blocks = [
            zero.clone(), ones.clone(), zero.clone(),
            zero.clone(), zero.clone(), ones.clone(),
            ones, zero.clone(), zero,
        ];
        BlockMatrix::from_blocks(shape, &blocks).unwrap()
    }

    #[test]
    fn scales_of_cyclic_example() {
        let s = block_scales(&cyclic_ones());
        assert_eq!(s.delta, mat(&[&[0, 2, 0], &[0, 0, 2], &[2, 0, 0]]));
        assert_eq!(s.global_delta, 2);
        assert_eq!(block_scales(&BlockMatrix::zeros(s.shape)).global_delta, 0);
    }

    #[test]
    fn allocation_of_cyclic_example() {
        let a = allocate(&mat(&[&[0, 2, 0], &[0, 0, 2], &[2, 0, 0]]), 2).unwrap();
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert_eq!(a.slots(i, j), &[0, 1]);
        }
        assert!(a.slots(0, 0).is_empty());
        assert!(a.slots(1, 0).is_empty());

        let a = allocate(&IntMatrix::identity(2), 1).unwrap();
        assert_eq!(a.slots(0, 0), &[0]);
        assert_eq!(a.slots(1, 1), &[0]);
        assert!(allocate(&mat(&[&[2, 1], &[0, 0]]), 2).is_err());
    }

    #[test]
    fn zero_matrix_yields_empty_schedule() {
        let x = BlockMatrix::zeros(BlockShape::new(3, 2).unwrap());
        assert!(hier_decompose(&x).is_empty());
    }

    #[test]
    fn slot_count_can_exceed_flat_scale() {
        // Server 0 sends one packet to each of servers 1 and 2 from different
        // GPUs: a single flat slot suffices, but server 0's block row needs two.
        let shape = BlockShape::new(2, 3).unwrap();
        let mut x = BlockMatrix::zeros(shape);
        x.set_block(0, 1, &mat(&[&[1, 0], &[0, 0]])).unwrap();
        x.set_block(0, 2, &mat(&[&[0, 0], &[0, 1]])).unwrap();
        assert_eq!(x.completion_lower_bound(), 1);
        let s = hier_decompose(&x);
        assert_eq!(s.len(), 2);
        assert!(s.slots().iter().all(|p| p.len() == 1));
    }
}
