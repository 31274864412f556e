//! Arrival-rate models and seeded Poisson arrivals.
//!
//! Rates are packets per slot per GPU pair. Intra-server (diagonal block)
//! rates are always zero.
//!
//! Server-level rates are formed with correctly rounded summation, so they
//! depend only on the multiset of GPU-level rates and not on summation
//! order. That makes the uniform and hotspot models agree exactly at server
//! level and keeps the admissibility boundary sharp.

mod poisson;
mod stream;

use std::fmt;
use std::str::FromStr;

pub use poisson::sample_poisson;
pub use stream::{derive_key, unit_f64, FlowStream};

use crate::error::{Error, Result};
use crate::matrix::{BlockMatrix, BlockShape, IntMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficModel {
    /// Identical rate `r0` for every inter-server GPU pair.
    Uniform,
    /// Each server pair's traffic concentrated on GPU pair `(0, 0)` at rate
    /// `m^2 r0`.
    Hotspot,
}

impl TrafficModel {
    pub fn rates(self, shape: BlockShape, r0: f64) -> Result<RateMatrix> {
        match self {
            TrafficModel::Uniform => RateMatrix::uniform(shape, r0),
            TrafficModel::Hotspot => RateMatrix::hotspot(shape, r0),
        }
    }
}

impl fmt::Display for TrafficModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrafficModel::Uniform => "U",
            TrafficModel::Hotspot => "NU",
        })
    }
}

impl FromStr for TrafficModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "U" | "UNIFORM" => Ok(TrafficModel::Uniform),
            "NU" | "HOTSPOT" => Ok(TrafficModel::Hotspot),
            other => Err(Error::InvalidParameter(format!(
                "unknown traffic model {other:?}, expected U or NU"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    shape: BlockShape,
    rates: Vec<f64>,
}

fn check_r0(r0: f64) -> Result<()> {
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r0 must be finite and nonnegative, got {r0}"
        )));
    }
    Ok(())
}

impl RateMatrix {
    /// Row-major `mn x mn` rates. Rejects negative or non-finite entries and
    /// nonzero diagonal blocks.
    pub fn new(shape: BlockShape, rates: Vec<f64>) -> Result<Self> {
        let p = shape.ports();
        if rates.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rates", p * p),
                actual: format!("{} rates", rates.len()),
            });
        }
        let m = shape.m();
        for (idx, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rate {r} at index {idx} is not a nonnegative number"
                )));
            }
            if r > 0.0 && (idx / p) / m == (idx % p) / m {
                return Err(Error::InvalidParameter(format!(
                    "intra-server rate at ({}, {}) must be zero",
                    idx / p,
                    idx % p
                )));
            }
        }
        Ok(Self { shape, rates })
    }

    pub fn uniform(shape: BlockShape, r0: f64) -> Result<Self> {
        check_r0(r0)?;
        let (m, p) = (shape.m(), shape.ports());
        let rates = (0..p * p)
            .map(|idx| if (idx / p) / m != (idx % p) / m { r0 } else { 0.0 })
            .collect();
        Self::new(shape, rates)
    }

    pub fn hotspot(shape: BlockShape, r0: f64) -> Result<Self> {
        check_r0(r0)?;
        let (m, p) = (shape.m(), shape.ports());
        let hot = (m * m) as f64 * r0;
        let rates = (0..p * p)
            .map(|idx| {
                let (src, dst) = (idx / p, idx % p);
                let hot_pair = src % m == 0 && dst % m == 0;
                if src / m != dst / m && hot_pair {
                    hot
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(shape, rates)
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn get(&self, src: usize, dst: usize) -> f64 {
        self.rates[src * self.shape.ports() + dst]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Total outgoing rate of each port.
    pub fn port_out_rates(&self) -> Vec<f64> {
        let p = self.shape.ports();
        (0..p)
            .map(|src| exact_sum(self.rates[src * p..(src + 1) * p].iter().copied()))
            .collect()
    }
}

/// Server-to-server rates `lambda[i][j] = (1/m) * sum of block (i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerRates {
    n: usize,
    lambda: Vec<f64>,
}

impl ServerRates {
    pub fn servers(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lambda[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| exact_sum((0..self.n).map(|j| self.get(i, j))))
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| exact_sum((0..self.n).map(|i| self.get(i, j))))
            .collect()
    }
}

pub fn server_rates(r: &RateMatrix) -> ServerRates {
    let (m, n, p) = (r.shape.m(), r.shape.n(), r.shape.ports());
    let lambda = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let block = (0..m).flat_map(|l| (0..m).map(move |k| r.rates[(i * m + l) * p + j * m + k]));
            exact_sum(block) / m as f64
        })
        .collect();
    ServerRates { n, lambda }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// Every server-level row and column sum is strictly below 1.
    pub admissible: bool,
    /// Largest server-level row or column sum.
    pub max_load: f64,
    /// `1 - max_load`.
    pub slack: f64,
}

pub fn is_admissible(r: &RateMatrix) -> Admissibility {
    let lambda = server_rates(r);
    let max_load = lambda
        .row_sums()
        .into_iter()
        .chain(lambda.col_sums())
        .fold(0.0, f64::max);
    Admissibility {
        admissible: max_load < 1.0,
        max_load,
        slack: 1.0 - max_load,
    }
}

/// Identifies the random streams of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub seed: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, seed: u64) -> Self {
        Self { master_seed, seed }
    }

    /// The stream of arrivals from port `src` to port `dst` in `frame`.
    pub fn flow_stream(&self, frame: u64, src: usize, dst: usize) -> FlowStream {
        FlowStream::from_words(&[self.master_seed, self.seed, frame, src as u64, dst as u64])
    }
}

/// Packet counts per VOQ that arrived during one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalBatch {
    pub frame: u64,
    pub counts: BlockMatrix,
}

/// Samples `Pois(rate * duration)` arrivals for every flow of `frame`.
pub fn sample_arrivals(r: &RateMatrix, duration: u64, key: StreamKey, frame: u64) -> Result<ArrivalBatch> {
    if duration == 0 {
        return Err(Error::InvalidParameter("arrival window must be at least one slot".into()));
    }
    let p = r.shape.ports();
    let t = duration as f64;
    let mut data = vec![0u64; p * p];
    for (idx, (&rate, count)) in r.rates.iter().zip(data.iter_mut()).enumerate() {
        if rate > 0.0 {
            let mut rng = key.flow_stream(frame, idx / p, idx % p);
            *count = sample_poisson(&mut rng, rate * t);
        }
    }
    let counts = BlockMatrix::new(r.shape, IntMatrix::from_vec(p, p, data)?)?;
    Ok(ArrivalBatch { frame, counts })
}

/// Correctly rounded sum of finite floats (Shewchuk's exact partials).
pub(crate) fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Round half-even across the remaining partials.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, m: usize) -> BlockShape {
        BlockShape::new(m, n).unwrap()
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100, 1e-100]), 1.0);
        assert_eq!(exact_sum([2.0 / 14.0; 7]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn uniform_rates() {
        let r = RateMatrix::uniform(shape(8, 2), 0.05).unwrap();
        assert_eq!(r.rates().len(), 256);
        assert_eq!(r.get(0, 2), 0.05);
        assert_eq!(r.get(0, 1), 0.0);
        assert_eq!(r.get(15, 14), 0.0);
        for out in r.port_out_rates() {
            assert!((out - 0.7).abs() < 1e-12);
        }
        assert!(RateMatrix::uniform(shape(8, 2), 0.0).unwrap().rates().iter().all(|&x| x == 0.0));
        assert!(RateMatrix::uniform(shape(8, 2), -0.1).is_err());

        let s = server_rates(&RateMatrix::uniform(shape(3, 2), 0.1).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(i, j), if i == j { 0.0 } else { 0.2 });
            }
        }
    }

    #[test]
    fn hotspot_rates() {
        let r = RateMatrix::hotspot(shape(8, 2), 0.02).unwrap();
        assert_eq!(r.get(0, 2), 0.08);
        assert_eq!(r.get(0, 3), 0.0);
        assert_eq!(r.get(1, 2), 0.0);
        assert_eq!(r.get(0, 0), 0.0);
        assert_eq!(r.rates().iter().filter(|&&x| x > 0.0).count(), 56);
        assert!(RateMatrix::hotspot(shape(8, 2), f64::NAN).is_err());
    }

    #[test]
    fn diagonal_blocks_must_be_zero() {
        let mut rates = vec![0.0; 16];
        rates[1] = 0.5;
        assert!(RateMatrix::new(shape(2, 2), rates).is_err());
    }

    #[test]
    fn admissibility() {
        let s = shape(8, 2);
        let a = is_admissible(&RateMatrix::uniform(s, 0.07).unwrap());
        assert!(a.admissible);
        assert!((a.max_load - 0.98).abs() < 1e-12);
        assert!(!is_admissible(&RateMatrix::uniform(s, 1.0 / 14.0).unwrap()).admissible);
        assert!(is_admissible(&RateMatrix::hotspot(s, 0.03).unwrap()).admissible);
        assert_eq!(is_admissible(&RateMatrix::uniform(s, 0.0).unwrap()).slack, 1.0);
    }

    #[test]
    fn arrivals_are_keyed() {
        let r = RateMatrix::uniform(shape(4, 2), 0.3).unwrap();
        let key = StreamKey::new(0, 9);
        let a = sample_arrivals(&r, 5, key, 3).unwrap();
        assert_eq!(a, sample_arrivals(&r, 5, key, 3).unwrap());
        assert_ne!(a, sample_arrivals(&r, 5, key, 4).unwrap());
        for i in 0..4 {
            assert!(a.counts.block(i, i).is_zero());
        }
        assert!(sample_arrivals(&r, 0, key, 3).is_err());
    }
}
