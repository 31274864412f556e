//! Dynamic-frame-sizing (DFS) simulation of the `mn x mn` crossbar.
//!
//! Time is cut into frames. Packets that arrive during frame `f` wait until
//! frame `f + 1`, whose length is the slot count of the hierarchical
//! schedule that clears them (after optional intra-server balancing). An
//! empty backlog gets a one-slot idle frame. Because every frame clears its
//! backlog, the backlog at the start of frame `f + 1` is exactly the batch
//! of arrivals sampled over frame `f`.
//!
//! [`Mode::Fast`] derives each frame length from block marginals without
//! building the schedule. [`Mode::Verify`] balances, decomposes and replays
//! every frame slot by slot, and fails the run if anything disagrees with
//! the fast path.

use rayon::prelude::*;

use crate::balancing::balance_all_blocks;
use crate::error::{Error, Result};
use crate::hierarchical::hier_decompose;
use crate::matrix::{BlockMatrix, BlockShape, IntMatrix, Schedule, SubPermutation};
use crate::traffic::{is_admissible, sample_arrivals, RateMatrix, StreamKey, TrafficModel};

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_WARMUP: u64 = 10_000;
pub const DEFAULT_FRAME_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Fast,
    Verify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub shape: BlockShape,
    pub model: TrafficModel,
    /// Base GPU-to-GPU rate in packets per slot.
    pub r0: f64,
    /// Simulated slots.
    pub horizon: u64,
    /// Frames starting before this slot are excluded from statistics.
    pub warmup: u64,
    pub seed: u64,
    /// Mixed into every stream key alongside `seed`.
    pub master_seed: u64,
    pub balancing: bool,
    pub mode: Mode,
    /// A frame longer than this aborts the run as diverged.
    pub frame_cap: u64,
    /// Keep every observed frame length and summary in [`SimStats`].
    pub record_frames: bool,
}

impl SimConfig {
    /// Defaults: 8 servers of 2 GPUs, 10^5 slots with 10^4 warm-up,
    /// balancing on, fast mode, seed 1.
    pub fn new(model: TrafficModel, r0: f64) -> Self {
        Self {
            shape: BlockShape::new(2, 8).expect("valid default shape"),
            model,
            r0,
            horizon: DEFAULT_HORIZON,
            warmup: DEFAULT_WARMUP,
            seed: 1,
            master_seed: 0,
            balancing: true,
            mode: Mode::Fast,
            frame_cap: DEFAULT_FRAME_CAP,
            record_frames: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0.is_finite() && self.r0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("r0 must be nonnegative, got {}", self.r0)));
        }
        if self.warmup >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "warmup ({}) must be shorter than the horizon ({})",
                self.warmup, self.horizon
            )));
        }
        if self.frame_cap == 0 {
            return Err(Error::InvalidParameter("frame cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn stream_key(&self) -> StreamKey {
        StreamKey::new(self.master_seed, self.seed)
    }
}

/// State at the start of frame `f` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameState {
    pub f: u64,
    /// Slots elapsed before this frame.
    pub tau: u64,
    pub backlog: BlockMatrix,
}

impl FrameState {
    /// Empty buffers at time 0.
    pub fn initial(shape: BlockShape) -> Self {
        Self {
            f: 1,
            tau: 0,
            backlog: BlockMatrix::zeros(shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSummary {
    pub f: u64,
    pub tau: u64,
    /// Slots used by the frame.
    pub length: u64,
    /// Server-to-server backlog totals.
    pub w: IntMatrix,
    /// Backlog leaving each server.
    pub u: Vec<u64>,
    /// Backlog entering each server.
    pub v: Vec<u64>,
    /// `max(max_i ceil(U_i/m), max_j ceil(V_j/m))`.
    pub theory_length: u64,
    /// Unit transfers spent on intra-server balancing.
    pub transfers: u64,
}

impl FrameSummary {
    fn new(backlog: &BlockMatrix, length: u64, transfers: u64) -> Self {
        let m = backlog.shape().m() as u64;
        let w = backlog.aggregate_servers();
        let u = w.row_sums();
        let v = w.col_sums();
        let theory_length = u
            .iter()
            .chain(&v)
            .map(|x| x.div_ceil(m))
            .max()
            .unwrap_or(0);
        Self {
            f: 0,
            tau: 0,
            length,
            w,
            u,
            v,
            theory_length,
            transfers,
        }
    }
}

/// A frame's balanced backlog and the schedule that clears it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    pub length: u64,
    pub balanced: BlockMatrix,
    pub schedule: Schedule,
    pub summary: FrameSummary,
}

/// Builds the frame for `backlog`: balance each inter-server block when
/// `balancing` is set, then decompose hierarchically. An empty backlog gets
/// one idle slot.
pub fn frame_length(backlog: &BlockMatrix, balancing: bool) -> FramePlan {
    let ports = backlog.shape().ports();
    let (balanced, transfers) = if balancing {
        let (balanced, reports) = balance_all_blocks(backlog, true);
        (balanced, reports.iter().map(|b| b.report.transfers()).sum())
    } else {
        (backlog.clone(), 0)
    };
    let schedule = if balanced.data().is_zero() {
        Schedule::new(balanced.data().clone(), vec![SubPermutation::empty(ports)])
            .expect("idle slot clears an empty backlog")
    } else {
        hier_decompose(&balanced)
    };
    let length = schedule.len() as u64;
    let summary = FrameSummary::new(backlog, length, transfers);
    FramePlan {
        length,
        balanced,
        schedule,
        summary,
    }
}

/// Frame length and balancing work for `backlog` without building the
/// schedule.
///
/// A balanced `m x m` block with total `W` has scale exactly `ceil(W/m)`,
/// since its `m` row sums add up to `W` and none exceeds the target; the
/// two-phase balancer spends exactly the initial row plus column imbalance
/// in unit transfers. Diagonal blocks are never balanced.
pub fn fast_frame_length(backlog: &BlockMatrix, balancing: bool) -> (u64, u64) {
    let shape = backlog.shape();
    let (m, n) = (shape.m(), shape.n());
    let x = backlog.data();
    let mut scales = vec![0u64; n * n];
    let mut rows = vec![0u64; m];
    let mut cols = vec![0u64; m];
    let mut transfers = 0;
    for (idx, block_scale) in scales.iter_mut().enumerate() {
        let (i, j) = (idx / n, idx % n);
        cols.fill(0);
        for (l, row_sum) in rows.iter_mut().enumerate() {
            let line = &x.row(i * m + l)[j * m..(j + 1) * m];
            *row_sum = line.iter().sum();
            for (c, &v) in cols.iter_mut().zip(line) {
                *c += v;
            }
        }
        let total: u64 = rows.iter().sum();
        if total == 0 {
            continue;
        }
        *block_scale = if balancing && i != j {
            let target = total.div_ceil(m as u64);
            transfers += rows.iter().chain(&cols).map(|s| s.saturating_sub(target)).sum::<u64>();
            target
        } else {
            rows.iter().chain(&cols).copied().max().unwrap_or(0)
        };
    }
    let delta = (0..n)
        .flat_map(|k| {
            let row: u64 = scales[k * n..(k + 1) * n].iter().sum();
            let col: u64 = scales.iter().skip(k).step_by(n).sum();
            [row, col]
        })
        .max()
        .unwrap_or(0);
    (delta.max(1), transfers)
}

/// Result of replaying a schedule against a backlog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleCheck {
    /// Slots whose port count differs from the backlog's.
    pub wrong_size: Vec<usize>,
    /// Packets left after every slot has been served.
    pub residual: IntMatrix,
    /// Slot connections that found an empty VOQ.
    pub idle_services: u64,
}

impl ScheduleCheck {
    /// Every slot fits and the backlog is fully served.
    pub fn is_clear(&self) -> bool {
        self.wrong_size.is_empty() && self.residual.is_zero()
    }

    /// Cleared with no wasted connection, so the slots sum to the backlog.
    pub fn is_exact(&self) -> bool {
        self.is_clear() && self.idle_services == 0
    }
}

/// Serves `slots` one at a time against `backlog`, one packet per matched
/// VOQ per slot.
pub fn check_schedule(backlog: &IntMatrix, slots: &[SubPermutation]) -> ScheduleCheck {
    let mut residual = backlog.clone();
    let mut wrong_size = Vec::new();
    let mut idle_services = 0;
    for (d, slot) in slots.iter().enumerate() {
        if slot.size() != backlog.rows() || !backlog.is_square() {
            wrong_size.push(d);
            continue;
        }
        for (r, c) in slot.pairs() {
            if residual.get(r, c) > 0 {
                residual.sub_at(r, c, 1).expect("positive entry");
            } else {
                idle_services += 1;
            }
        }
    }
    ScheduleCheck {
        wrong_size,
        residual,
        idle_services,
    }
}

/// True iff `schedule` clears `backlog`.
pub fn verify_schedule(backlog: &IntMatrix, schedule: &Schedule) -> bool {
    check_schedule(backlog, schedule.slots()).is_clear()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimStats {
    /// Frames lying entirely inside `[warmup, horizon]`.
    pub frames_observed: u64,
    /// Mean of `T_f` over observed frames.
    pub mean_frame_length: f64,
    /// Mean of the per-frame `theory_length` over observed frames.
    pub mean_theory_length: f64,
    /// All frames simulated, observed or not.
    pub frames_simulated: u64,
    /// A frame exceeded the frame cap and the run stopped early.
    pub diverged: bool,
    /// Server-level load is strictly below 1 at every server.
    pub admissible: bool,
    pub frame_lengths: Option<Vec<u64>>,
    pub summaries: Option<Vec<FrameSummary>>,
}

/// One DFS run with fixed rates and stream key.
pub struct Simulator {
    config: SimConfig,
    rates: RateMatrix,
    key: StreamKey,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let rates = config.model.rates(config.shape, config.r0)?;
        let key = config.stream_key();
        Ok(Self { config, rates, key })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    /// Length of the frame that `state` starts, with its summary. In verify
    /// mode the schedule is built and replayed.
    pub fn plan(&self, state: &FrameState) -> Result<FrameSummary> {
        let (length, transfers) = fast_frame_length(&state.backlog, self.config.balancing);
        let mut summary = match self.config.mode {
            Mode::Fast => FrameSummary::new(&state.backlog, length, transfers),
            Mode::Verify => self.verified_plan(state, length, transfers)?.summary,
        };
        summary.f = state.f;
        summary.tau = state.tau;
        Ok(summary)
    }

    fn verified_plan(&self, state: &FrameState, length: u64, transfers: u64) -> Result<FramePlan> {
        let fail = |message: String| Error::Verification {
            frame: state.f,
            message,
        };
        let plan = frame_length(&state.backlog, self.config.balancing);
        if plan.length != length || plan.summary.transfers != transfers {
            return Err(fail(format!(
                "fast path predicted {length} slots and {transfers} transfers, schedule has {} slots and {} transfers",
                plan.length, plan.summary.transfers
            )));
        }
        if plan.balanced.aggregate_servers() != state.backlog.aggregate_servers() {
            return Err(fail("balancing changed server-level totals".into()));
        }
        let check = check_schedule(plan.balanced.data(), plan.schedule.slots());
        if !check.is_exact() {
            return Err(fail(format!(
                "replay left {} packets and {} idle services",
                check.residual.total(),
                check.idle_services
            )));
        }
        let bound = plan.balanced.completion_lower_bound();
        if plan.length < bound.max(1) {
            return Err(fail(format!("frame of {} slots beats the port bound {bound}", plan.length)));
        }
        Ok(plan)
    }

    /// Arrivals during the frame described by `summary` become the next
    /// frame's backlog.
    pub fn advance(&self, state: &FrameState, summary: &FrameSummary) -> Result<FrameState> {
        let batch = sample_arrivals(&self.rates, summary.length, self.key, state.f)?;
        if self.config.mode == Mode::Verify {
            let again = sample_arrivals(&self.rates, summary.length, self.key, state.f)?;
            if again != batch {
                return Err(Error::Verification {
                    frame: state.f,
                    message: "arrival stream is not reproducible".into(),
                });
            }
        }
        Ok(FrameState {
            f: state.f + 1,
            tau: state.tau + summary.length,
            backlog: batch.counts,
        })
    }

    pub fn step(&self, state: &FrameState) -> Result<(FrameState, FrameSummary)> {
        let summary = self.plan(state)?;
        let next = self.advance(state, &summary)?;
        Ok((next, summary))
    }

    pub fn run(&self) -> Result<SimStats> {
        let cfg = &self.config;
        let mut state = FrameState::initial(cfg.shape);
        let mut stats = SimStats {
            admissible: is_admissible(&self.rates).admissible,
            frame_lengths: cfg.record_frames.then(Vec::new),
            summaries: cfg.record_frames.then(Vec::new),
            ..SimStats::default()
        };
        let (mut sum, mut theory_sum) = (0u128, 0u128);
        loop {
            let summary = self.plan(&state)?;
            if summary.length > cfg.frame_cap {
                stats.diverged = true;
                break;
            }
            if state.tau + summary.length > cfg.horizon {
                break;
            }
            stats.frames_simulated += 1;
            if state.tau >= cfg.warmup {
                stats.frames_observed += 1;
                sum += summary.length as u128;
                theory_sum += summary.theory_length as u128;
                if let Some(lengths) = stats.frame_lengths.as_mut() {
                    lengths.push(summary.length);
                }
                if let Some(all) = stats.summaries.as_mut() {
                    all.push(summary.clone());
                }
            }
            state = self.advance(&state, &summary)?;
        }
        if stats.frames_observed > 0 {
            stats.mean_frame_length = sum as f64 / stats.frames_observed as f64;
            stats.mean_theory_length = theory_sum as f64 / stats.frames_observed as f64;
        }
        Ok(stats)
    }
}

pub fn run(config: SimConfig) -> Result<SimStats> {
    Simulator::new(config)?.run()
}

/// One run of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub model: TrafficModel,
    pub r0: f64,
    pub balancing: bool,
    pub seed: u64,
}

/// Runs every point on top of `base`, in parallel. Results are returned in
/// the order of `points`.
pub fn run_sweep(base: &SimConfig, points: &[SweepPoint]) -> Vec<Result<SimStats>> {
    points
        .par_iter()
        .map(|p| {
            let config = SimConfig {
                model: p.model,
                r0: p.r0,
                balancing: p.balancing,
                seed: p.seed,
                ..base.clone()
            };
            run(config)
        })
        .collect()
}
