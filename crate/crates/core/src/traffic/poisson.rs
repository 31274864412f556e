//! Exact Poisson sampling.
//!
//! Small means use sequential-search inversion. Means of 30 and above use
//! Hörmann's PTRS transformed rejection with a squeeze, which is exact and
//! runs in constant expected time.

use rand_core::RngCore;
use statrs::function::gamma::ln_gamma;

use super::stream::unit_f64;

const INVERSION_LIMIT: f64 = 30.0;

/// Draws from `Pois(mean)`. `mean` must be finite and nonnegative.
pub fn sample_poisson<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        inversion(rng, mean)
    } else {
        ptrs(rng, mean)
    }
}

fn inversion<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let p0 = (-mean).exp();
    loop {
        let u = unit_f64(rng);
        let (mut k, mut p, mut cdf) = (0u64, p0, p0);
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            // Rounding can leave the accumulated cdf just short of 1. Redraw
            // rather than run into the flat tail.
            if p == 0.0 && k as f64 > mean {
                break;
            }
        }
        if u <= cdf {
            return k;
        }
    }
}

fn ptrs<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let log_mean = mean.ln();
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = unit_f64(rng) - 0.5;
        let v = unit_f64(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * log_mean - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}
