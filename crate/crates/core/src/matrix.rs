//! Dense nonnegative integer matrices and the matching-shaped values built
//! from them.
//!
//! Ports are numbered `0..m*n` with GPU `l` of server `i` at port `i*m + l`.
//! All indices in this crate and in the file formats are 0-based.
//!
//! Entries are `u64`. An [`IntMatrix`] keeps its total in range of `u64`, so
//! every row sum, column sum and block sum is representable; any mutation
//! that would break that returns [`Error::Overflow`].

use std::fmt;

use crate::error::{Error, Result};

/// `m` GPUs per server, `n` servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    m: usize,
    n: usize,
}

impl BlockShape {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidShape { m, n });
        }
        m.checked_mul(n).ok_or(Error::Overflow)?;
        Ok(Self { m, n })
    }

    /// GPUs per server.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of servers.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total port count `m * n`.
    pub fn ports(&self) -> usize {
        self.m * self.n
    }

    /// Port index of GPU `gpu` in server `server`.
    pub fn port(&self, server: usize, gpu: usize) -> usize {
        debug_assert!(server < self.n && gpu < self.m);
        server * self.m + gpu
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
    total: u64,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
            total: 0,
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut out = Self::zeros(size, size);
        for i in 0..size {
            out.data[i * size + i] = 1;
        }
        out.total = size as u64;
        out
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries for {rows}x{cols}", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        let total = data
            .iter()
            .try_fold(0u64, |acc, &v| acc.checked_add(v))
            .ok_or(Error::Overflow)?;
        Ok(Self {
            rows,
            cols,
            data,
            total,
        })
    }

    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: format!("{cols} columns"),
                    actual: format!("{} columns in row {i}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[u64] {
        &self.data
    }

    /// Sum of all entries.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_zero(&self) -> bool {
        self.total == 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: u64) -> Result<()> {
        let idx = row * self.cols + col;
        let old = self.data[idx];
        self.total = (self.total - old)
            .checked_add(value)
            .ok_or(Error::Overflow)?;
        self.data[idx] = value;
        Ok(())
    }

    pub fn add_at(&mut self, row: usize, col: usize, amount: u64) -> Result<()> {
        let idx = row * self.cols + col;
        let total = self.total.checked_add(amount).ok_or(Error::Overflow)?;
        self.data[idx] += amount;
        self.total = total;
        Ok(())
    }

    pub fn sub_at(&mut self, row: usize, col: usize, amount: u64) -> Result<()> {
        let idx = row * self.cols + col;
        if self.data[idx] < amount {
            return Err(Error::Underflow { row, col });
        }
        self.data[idx] -= amount;
        self.total -= amount;
        Ok(())
    }

    /// Moves `amount` units from `from` to `to`; the total is unchanged.
    pub(crate) fn transfer(
        &mut self,
        from: (usize, usize),
        to: (usize, usize),
        amount: u64,
    ) -> Result<()> {
        self.sub_at(from.0, from.1, amount)?;
        self.add_at(to.0, to.1, amount)
    }

    pub fn checked_add(&self, other: &IntMatrix) -> Result<IntMatrix> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.checked_add(*b))
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::Overflow)?;
        Self::from_vec(self.rows, self.cols, data)
    }

    fn check_same_dims(&self, other: &IntMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.cols];
        for r in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    /// Smallest `D` such that the matrix is doubly substochastic with scale
    /// `D`: the largest row or column sum.
    pub fn scale(&self) -> Result<u64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.max_marginal())
    }

    pub(crate) fn max_marginal(&self) -> u64 {
        let r = self.row_sums().into_iter().max().unwrap_or(0);
        let c = self.col_sums().into_iter().max().unwrap_or(0);
        r.max(c)
    }

    /// True iff the matrix is square, binary, and has at most one 1 in each
    /// row and column.
    pub fn is_subpermutation(&self) -> bool {
        self.is_square()
            && self.data.iter().all(|&v| v <= 1)
            && self.row_sums().iter().all(|&s| s <= 1)
            && self.col_sums().iter().all(|&s| s <= 1)
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries((0..self.rows).map(|r| self.row(r)))
            .finish()
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line = self
                .row(r)
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// An `mn x mn` matrix viewed as `n x n` blocks of size `m x m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMatrix {
    shape: BlockShape,
    data: IntMatrix,
}

impl BlockMatrix {
    pub fn new(shape: BlockShape, data: IntMatrix) -> Result<Self> {
        let p = shape.ports();
        if data.rows() != p || data.cols() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p}x{p} for m={}, n={}", shape.m, shape.n),
                actual: format!("{}x{}", data.rows(), data.cols()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: BlockShape) -> Self {
        let p = shape.ports();
        Self {
            shape,
            data: IntMatrix::zeros(p, p),
        }
    }

    /// Assembles a block matrix from its `n x n` grid of `m x m` blocks,
    /// given in row-major block order.
    pub fn from_blocks(shape: BlockShape, blocks: &[IntMatrix]) -> Result<Self> {
        let n = shape.n;
        if blocks.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: format!("{} blocks", n * n),
                actual: format!("{} blocks", blocks.len()),
            });
        }
        let mut out = Self::zeros(shape);
        for (idx, block) in blocks.iter().enumerate() {
            out.set_block(idx / n, idx % n, block)?;
        }
        Ok(out)
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn data(&self) -> &IntMatrix {
        &self.data
    }

    pub fn into_inner(self) -> IntMatrix {
        self.data
    }

    /// Copy of block `(i, j)`: traffic from server `i` to server `j`.
    pub fn block(&self, i: usize, j: usize) -> IntMatrix {
        let m = self.shape.m;
        let mut data = Vec::with_capacity(m * m);
        for l in 0..m {
            let row = self.data.row(i * m + l);
            data.extend_from_slice(&row[j * m..(j + 1) * m]);
        }
        IntMatrix::from_vec(m, m, data).expect("block of a valid matrix")
    }

    /// Sum of all entries in block `(i, j)`.
    pub fn block_total(&self, i: usize, j: usize) -> u64 {
        let m = self.shape.m;
        (0..m)
            .map(|l| self.data.row(i * m + l)[j * m..(j + 1) * m].iter().sum::<u64>())
            .sum()
    }

    pub fn set_block(&mut self, i: usize, j: usize, block: &IntMatrix) -> Result<()> {
        let m = self.shape.m;
        if block.rows() != m || block.cols() != m {
            return Err(Error::DimensionMismatch {
                expected: format!("{m}x{m} block"),
                actual: format!("{}x{}", block.rows(), block.cols()),
            });
        }
        for l in 0..m {
            for k in 0..m {
                self.data.set(i * m + l, j * m + k, block.get(l, k))?;
            }
        }
        Ok(())
    }

    /// `n x n` matrix of server-to-server totals.
    pub fn aggregate_servers(&self) -> IntMatrix {
        let n = self.shape.n;
        let data = (0..n * n)
            .map(|idx| self.block_total(idx / n, idx % n))
            .collect();
        IntMatrix::from_vec(n, n, data).expect("aggregate of a valid matrix")
    }

    /// Minimum number of slots any conflict-free schedule needs: the busiest
    /// port's outgoing or incoming load.
    pub fn completion_lower_bound(&self) -> u64 {
        self.data.max_marginal()
    }
}

/// A partial matching of `size` input ports to `size` output ports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubPermutation {
    assignment: Vec<Option<usize>>,
}

impl SubPermutation {
    pub fn empty(size: usize) -> Self {
        Self {
            assignment: vec![None; size],
        }
    }

    /// Builds a matching from `(row, col)` pairs, rejecting repeated rows or
    /// columns.
    pub fn from_pairs<I>(size: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out = Self::empty(size);
        for (r, c) in pairs {
            out.insert(r, c)?;
        }
        Ok(out)
    }

    /// Reads a binary matrix with at most one 1 per row and column.
    pub fn from_matrix(x: &IntMatrix) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::NotSquare {
                rows: x.rows(),
                cols: x.cols(),
            });
        }
        if !x.is_subpermutation() {
            return Err(Error::InvalidParameter(
                "matrix is not a subpermutation".into(),
            ));
        }
        let n = x.rows();
        let pairs = (0..n).flat_map(|r| (0..n).filter(move |&c| x.get(r, c) == 1).map(move |c| (r, c)));
        Self::from_pairs(n, pairs)
    }

    pub fn insert(&mut self, row: usize, col: usize) -> Result<()> {
        let size = self.size();
        for index in [row, col] {
            if index >= size {
                return Err(Error::IndexOutOfRange { index, size });
            }
        }
        if self.assignment[row].is_some() {
            return Err(Error::InvalidParameter(format!(
                "row {row} is already matched"
            )));
        }
        if self.assignment.contains(&Some(col)) {
            return Err(Error::DuplicateColumn { col });
        }
        self.assignment[row] = Some(col);
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.assignment.len()
    }

    /// Output port matched to input `row`, if any.
    pub fn get(&self, row: usize) -> Option<usize> {
        self.assignment[row]
    }

    /// Matched `(row, col)` pairs in ascending row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    /// Number of matched pairs.
    pub fn len(&self) -> usize {
        self.assignment.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.iter().all(Option::is_none)
    }

    pub fn is_full(&self) -> bool {
        self.assignment.iter().all(Option::is_some)
    }

    pub fn to_matrix(&self) -> IntMatrix {
        let n = self.size();
        let mut data = vec![0u64; n * n];
        for (r, c) in self.pairs() {
            data[r * n + c] = 1;
        }
        IntMatrix::from_vec(n, n, data).expect("binary matrix")
    }
}

/// Element-wise sum of the matrix forms of `slots`, all of size `ports`.
pub fn sum_slots(ports: usize, slots: &[SubPermutation]) -> Result<IntMatrix> {
    let mut out = IntMatrix::zeros(ports, ports);
    for slot in slots {
        if slot.size() != ports {
            return Err(Error::DimensionMismatch {
                expected: format!("slot of size {ports}"),
                actual: format!("slot of size {}", slot.size()),
            });
        }
        for (r, c) in slot.pairs() {
            out.add_at(r, c, 1)?;
        }
    }
    Ok(out)
}

/// One crossbar configuration per slot; the slots add up to `source_total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    slots: Vec<SubPermutation>,
    source_total: IntMatrix,
}

impl Schedule {
    pub fn new(source_total: IntMatrix, slots: Vec<SubPermutation>) -> Result<Self> {
        if !source_total.is_square() {
            return Err(Error::NotSquare {
                rows: source_total.rows(),
                cols: source_total.cols(),
            });
        }
        let sum = sum_slots(source_total.rows(), &slots)?;
        if sum != source_total {
            return Err(Error::InvalidParameter(
                "slots do not sum to the source matrix".into(),
            ));
        }
        Ok(Self {
            slots,
            source_total,
        })
    }

    pub fn port_count(&self) -> usize {
        self.source_total.rows()
    }

    pub fn slots(&self) -> &[SubPermutation] {
        &self.slots
    }

    pub fn into_slots(self) -> Vec<SubPermutation> {
        self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn source_total(&self) -> &IntMatrix {
        &self.source_total
    }
}
