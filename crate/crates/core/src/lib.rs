//! Scheduling primitives for all-to-all traffic on a two-tier GPU cluster.
//!
//! The cluster has `n` servers with `m` GPUs each, attached to an `mn x mn`
//! input-queued crossbar. Traffic is held as an `(m, n)`-block matrix whose
//! block `(i, j)` carries GPU-level demand from server `i` to server `j`.
//!
//! * [`matrix`]: integer matrices, block views, subpermutations, schedules.
//! * [`bvn`]: exact Birkhoff-von Neumann decomposition of integer matrices.
//! * [`hierarchical`]: block-structured decomposition that only ever
//!   decomposes `m x m` blocks and one `n x n` matrix of block scales.
//! * [`balancing`]: two-phase unit-transfer balancing of a server-pair block.
//! * [`traffic`]: rate models, admissibility, seeded Poisson arrivals.
//! * [`sim`]: the dynamic-frame-sizing simulator and parameter sweeps.
//! * [`format`]: the plain-text matrix and schedule file formats.

pub mod balancing;
pub mod bvn;
mod error;
pub mod format;
pub mod hierarchical;
pub mod matrix;
pub mod sim;
pub mod traffic;

pub use balancing::{balance_all_blocks, balance_block, BalanceReport, BlockBalance};
pub use bvn::{decompose, pad_to_regular, BvnResult};
pub use error::{Error, Result};
pub use hierarchical::{allocate, block_scales, hier_decompose, Allocation, BlockScales};
pub use matrix::{BlockMatrix, BlockShape, IntMatrix, Schedule, SubPermutation};
pub use sim::{FrameState, FrameSummary, Mode, SimConfig, SimStats};
pub use traffic::{ArrivalBatch, RateMatrix, ServerRates, TrafficModel};
