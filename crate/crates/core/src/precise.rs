//! Compensated (double-double) time accumulation.
//!
//! Near the singularity the time step drops far below the spacing of
//! doubles around `t`, so a plain `t += dt` stalls. The remaining time
//! `T_c - t` is what the rate fits need, and that must stay accurate.

use serde::{Deserialize, Serialize};

/// A time value carried as an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PreciseTime {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl PreciseTime {
    pub const ZERO: PreciseTime = PreciseTime { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_f64(t: f64) -> Self {
        Self { hi: t, lo: 0.0 }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, dt: f64) -> Self {
        let (s, e) = two_sum(self.hi, dt);
        let (hi, lo) = two_sum(s, e + self.lo);
        Self { hi, lo }
    }

    /// `self - other` to nearly double-double accuracy, rounded to f64.
    pub fn diff(self, other: PreciseTime) -> f64 {
        let (s, e) = two_sum(self.hi, -other.hi);
        s + (e + (self.lo - other.lo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_steps_are_not_lost() {
        let mut t = PreciseTime::from_f64(0.05);
        for _ in 0..1000 {
            t = t.add(1e-20);
        }
        let start = PreciseTime::from_f64(0.05);
        let elapsed = t.diff(start);
        assert!((elapsed - 1e-17).abs() < 1e-30, "elapsed = {elapsed:e}");
        // the naive sum does not move at all
        let mut naive = 0.05f64;
        for _ in 0..1000 {
            naive += 1e-20;
        }
        assert_eq!(naive, 0.05);
    }
}
