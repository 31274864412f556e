//! Input generators shared by the benchmarks.

use hierbvn::{BlockMatrix, BlockShape, IntMatrix};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Random backlog with off-diagonal blocks only, each entry drawn from
/// `0..=max_entry`.
pub fn random_backlog(m: usize, n: usize, max_entry: u64, seed: u64) -> BlockMatrix {
    let shape = BlockShape::new(m, n).expect("nonzero shape");
    let p = shape.ports();
    let mut rng = StdRng::seed_from_u64(seed);
    let data = (0..p * p)
        .map(|idx| {
            if (idx / p) / m == (idx % p) / m {
                0
            } else {
                rng.random_range(0..=max_entry)
            }
        })
        .collect();
    BlockMatrix::new(shape, IntMatrix::from_vec(p, p, data).expect("square")).expect("shape fits")
}

/// Square block whose mass sits in its first row and column.
pub fn skewed_block(m: usize, mass: u64) -> IntMatrix {
    let mut x = IntMatrix::zeros(m, m);
    for k in 0..m {
        x.set(0, k, mass).expect("in range");
        x.set(k, 0, mass).expect("in range");
    }
    x
}
