//! Exact Birkhoff-von Neumann decomposition of integer matrices.
//!
//! A square nonnegative integer matrix whose row and column sums are all at
//! most `delta` is the sum of at most `delta` subpermutation matrices. The
//! construction pads the matrix with dummy entries until every row and column
//! sums to exactly `delta`, then peels off `delta` perfect matchings of the
//! support. Each peel keeps the remainder regular, so Hall's condition
//! guarantees the next perfect matching exists. Dummy edges are dropped from
//! the emitted parts.
//!
//! All choices are deterministic: rows and candidate columns are visited in
//! ascending order.

use crate::error::{Error, Result};
use crate::matrix::{IntMatrix, SubPermutation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BvnResult {
    /// Subpermutations summing to the input. Trailing empty parts are
    /// dropped.
    pub parts: Vec<SubPermutation>,
    /// Number of non-empty parts.
    pub count: usize,
    /// The scale the decomposition was built for.
    pub scale_used: u64,
}

impl BvnResult {
    /// The parts, extended with empty subpermutations to exactly
    /// `scale_used` entries.
    pub fn padded_parts(&self, size: usize) -> Vec<SubPermutation> {
        let mut parts = self.parts.clone();
        parts.resize(self.scale_used as usize, SubPermutation::empty(size));
        parts
    }
}

fn check_feasible(x: &IntMatrix, delta: u64) -> Result<()> {
    let scale = x.scale()?;
    if scale > delta {
        return Err(Error::InfeasibleScale { scale, delta });
    }
    Ok(())
}

/// Returns the dummy matrix `D >= 0` such that every row and column of
/// `x + D` sums to exactly `delta`.
///
/// Deficits are filled greedily: the lowest-index row with a deficit is
/// paired with the lowest-index column with a deficit.
pub fn pad_to_regular(x: &IntMatrix, delta: u64) -> Result<IntMatrix> {
    check_feasible(x, delta)?;
    let n = x.rows();
    let mut row_def: Vec<u64> = x.row_sums().iter().map(|s| delta - s).collect();
    let mut col_def: Vec<u64> = x.col_sums().iter().map(|s| delta - s).collect();
    let mut dummy = IntMatrix::zeros(n, n);
    let (mut r, mut c) = (0, 0);
    // Both deficit vectors sum to n*delta - total, so they run out together.
    while r < n && c < n {
        if row_def[r] == 0 {
            r += 1;
            continue;
        }
        if col_def[c] == 0 {
            c += 1;
            continue;
        }
        let amount = row_def[r].min(col_def[c]);
        dummy.add_at(r, c, amount)?;
        row_def[r] -= amount;
        col_def[c] -= amount;
    }
    debug_assert!(row_def.iter().chain(&col_def).all(|&d| d == 0));
    Ok(dummy)
}

/// Decomposes `x` into at most `delta` subpermutations.
pub fn decompose(x: &IntMatrix, delta: u64) -> Result<BvnResult> {
    let dummy = pad_to_regular(x, delta)?;
    let n = x.rows();
    let mut real = x.clone();
    let mut fake = dummy;
    let mut matcher = Matcher::new(n);
    let mut parts = Vec::with_capacity(delta as usize);

    for _ in 0..delta {
        let matching = matcher.perfect_matching(|r, c| real.get(r, c) + fake.get(r, c) > 0);
        let mut part = SubPermutation::empty(n);
        for (r, c) in matching.into_iter().enumerate() {
            // Remainder is regular with positive degree, so every row matches.
            let c = c.expect("regular bipartite multigraph has a perfect matching");
            if real.get(r, c) > 0 {
                real.sub_at(r, c, 1)?;
                part.insert(r, c)?;
            } else {
                fake.sub_at(r, c, 1)?;
            }
        }
        parts.push(part);
    }
    debug_assert!(real.is_zero() && fake.is_zero());

    while parts.last().is_some_and(SubPermutation::is_empty) {
        parts.pop();
    }
    let count = parts.iter().filter(|p| !p.is_empty()).count();
    Ok(BvnResult {
        parts,
        count,
        scale_used: delta,
    })
}

/// Augmenting-path bipartite matching with reusable scratch buffers.
struct Matcher {
    row_of_col: Vec<Option<usize>>,
    seen: Vec<bool>,
}

impl Matcher {
    fn new(n: usize) -> Self {
        Self {
            row_of_col: vec![None; n],
            seen: vec![false; n],
        }
    }

    /// Maximum matching of the bipartite graph with edge `(r, c)` wherever
    /// `edge(r, c)` holds, returned as the column matched to each row.
    fn perfect_matching(&mut self, edge: impl Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
        let n = self.row_of_col.len();
        self.row_of_col.fill(None);
        for r in 0..n {
            self.seen.fill(false);
            self.augment(r, &edge);
        }
        let mut col_of_row = vec![None; n];
        for (c, r) in self.row_of_col.iter().enumerate() {
            if let Some(r) = *r {
                col_of_row[r] = Some(c);
            }
        }
        col_of_row
    }

    // A free column is taken before any rematching is attempted, so rows
    // that can be served directly keep their lowest free column.
    fn augment(&mut self, r: usize, edge: &impl Fn(usize, usize) -> bool) -> bool {
        let n = self.row_of_col.len();
        for c in 0..n {
            if !self.seen[c] && self.row_of_col[c].is_none() && edge(r, c) {
                self.seen[c] = true;
                self.row_of_col[c] = Some(r);
                return true;
            }
        }
        for c in 0..n {
            if self.seen[c] || !edge(r, c) {
                continue;
            }
            self.seen[c] = true;
            let other = self.row_of_col[c].expect("free columns were tried first");
            if self.augment(other, edge) {
                self.row_of_col[c] = Some(r);
                return true;
            }
        }
        false
    }
}
