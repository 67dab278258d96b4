//! Outward-rounded interval arithmetic and the rigorous n = 4, p = 2
//! comparison between the cosine and simplex covariances.
//!
//! Every native floating operation is rounded to nearest and then widened
//! by one representable step on each side, so each result encloses the
//! exact real result without touching the FPU rounding mode.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// π to 25 significant digits.
const PI_DECIMAL: &str = "3.141592653589793238462643";

/// Default box count per axis for the simplex integral.
pub const DEFAULT_SUBDIVISIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

fn down(x: f64) -> f64 {
    x.next_down()
}

fn up(x: f64) -> f64 {
    x.next_up()
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval holding a float exactly.
    pub fn point(x: f64) -> Self {
        assert!(!x.is_nan());
        Self { lo: x, hi: x }
    }

    fn widened(lo: f64, hi: f64) -> Self {
        Self { lo: down(lo), hi: up(hi) }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn checked_div(self, rhs: Interval) -> Result<Interval> {
        if rhs.contains_zero() {
            return Err(Error::Domain(format!("division by {rhs}, which contains 0")));
        }
        let q = [self.lo / rhs.lo, self.lo / rhs.hi, self.hi / rhs.lo, self.hi / rhs.hi];
        Ok(Self::widened(min4(q), max4(q)))
    }

    pub fn sqrt(self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of {self}, which has negative part")));
        }
        Ok(Interval { lo: down(self.lo.sqrt()).max(0.0), hi: up(self.hi.sqrt()) })
    }

    /// Integer power, exact-range aware: even powers of intervals that
    /// straddle zero start at 0.
    pub fn powi(self, m: u32) -> Interval {
        if m == 0 {
            return Interval::point(1.0);
        }
        let lo_abs = self.lo.abs();
        let hi_abs = self.hi.abs();
        if m % 2 == 1 {
            let lo = if self.lo >= 0.0 { pow_down(lo_abs, m) } else { -pow_up(lo_abs, m) };
            let hi = if self.hi >= 0.0 { pow_up(hi_abs, m) } else { -pow_down(hi_abs, m) };
            return Interval { lo, hi };
        }
        if self.lo >= 0.0 {
            Interval { lo: pow_down(lo_abs, m), hi: pow_up(hi_abs, m) }
        } else if self.hi <= 0.0 {
            Interval { lo: pow_down(hi_abs, m), hi: pow_up(lo_abs, m) }
        } else {
            Interval { lo: 0.0, hi: pow_up(lo_abs.max(hi_abs), m) }
        }
    }
}

/// Lower bound on x^m for x >= 0 by repeated multiplication.
fn pow_down(x: f64, m: u32) -> f64 {
    let mut acc = x;
    for _ in 1..m {
        acc = down(acc * x).max(0.0);
    }
    acc
}

/// Upper bound on x^m for x >= 0 by repeated multiplication.
fn pow_up(x: f64, m: u32) -> f64 {
    let mut acc = x;
    for _ in 1..m {
        acc = up(acc * x);
    }
    acc
}

fn min4(v: [f64; 4]) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn max4(v: [f64; 4]) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::widened(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::widened(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        Interval::widened(min4(p), max4(p))
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

pub fn ivl_add(a: Interval, b: Interval) -> Interval {
    a + b
}

pub fn ivl_sub(a: Interval, b: Interval) -> Interval {
    a - b
}

pub fn ivl_mul(a: Interval, b: Interval) -> Interval {
    a * b
}

pub fn ivl_div(a: Interval, b: Interval) -> Result<Interval> {
    a.checked_div(b)
}

pub fn ivl_sqrt(a: Interval) -> Result<Interval> {
    a.sqrt()
}

pub fn ivl_powi(a: Interval, m: u32) -> Interval {
    a.powi(m)
}

pub fn ivl_pi() -> Interval {
    let nearest: f64 = PI_DECIMAL.parse().expect("constant parses");
    Interval::widened(nearest, nearest)
}

pub fn ivl_sqrt2() -> Interval {
    Interval::point(2.0).sqrt().expect("2 >= 0")
}

/// Encloses E[M(Σ^cos)²] = 1 − 2√2/π for n = 4.
pub fn cosine_p2_enclosure() -> Interval {
    let two = Interval::point(2.0);
    let ratio = (two * ivl_sqrt2()).checked_div(ivl_pi()).expect("π enclosure excludes 0");
    Interval::point(1.0) - ratio
}

/// Natural interval extension of s(1 − s − st)² / (1 + s² + s²t²)^{5/2}
/// on the box `s × t`.
pub fn simplex_integrand(s: Interval, t: Interval) -> Interval {
    let one = Interval::point(1.0);
    let numerator = s * (one - s - s * t).powi(2);
    let s2 = s.powi(2);
    let base = one + s2 + s2 * t.powi(2);
    // base >= 1, so both the square root and the division are in-domain.
    let denominator = base.sqrt().expect("base >= 1") * base.powi(2);
    numerator.checked_div(denominator).expect("denominator >= 1")
}

/// Encloses E[M(Σ^Δ)²] for n = 4, i.e. (12/π)∫∫_{[0,1]²} of the simplex
/// integrand, by summing box enclosures over a `subdivisions²` grid.
pub fn simplex_p2_enclosure(subdivisions: usize) -> Result<Interval> {
    if subdivisions == 0 {
        return Err(Error::InvalidArgument("subdivisions must be >= 1".into()));
    }
    let m = subdivisions;
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let cell = |i: usize| Interval { lo: grid[i], hi: grid[i + 1] };
    let widths: Vec<Interval> = (0..m).map(|i| Interval::point(grid[i + 1]) - Interval::point(grid[i])).collect();

    // Rows in parallel; every sum runs in index order so the result is
    // bit-identical for any thread count.
    let rows: Vec<Interval> = (0..m)
        .into_par_iter()
        .map(|i| {
            let s = cell(i);
            let mut row = Interval::point(0.0);
            for j in 0..m {
                row = row + simplex_integrand(s, cell(j)) * widths[j];
            }
            row * widths[i]
        })
        .collect();
    let integral = rows.into_iter().fold(Interval::point(0.0), |acc, r| acc + r);
    let twelve_over_pi = Interval::point(12.0).checked_div(ivl_pi())?;
    Ok(twelve_over_pi * integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCertificate {
    #[serde(rename = "cosine")]
    pub cosine_bound: Interval,
    #[serde(rename = "simplex")]
    pub simplex_bound: Interval,
    pub subdivisions: usize,
    pub verdict: bool,
}

impl CounterexampleCertificate {
    pub fn new(cosine_bound: Interval, simplex_bound: Interval, subdivisions: usize) -> Self {
        let verdict = cosine_bound.hi() < simplex_bound.lo();
        Self { cosine_bound, simplex_bound, subdivisions, verdict }
    }

    pub fn is_consistent(&self) -> bool {
        self.verdict == (self.cosine_bound.hi() < self.simplex_bound.lo())
    }
}

/// Certifies E[M(Σ^cos)²] < E[M(Σ^Δ)²] at n = 4 when the verdict is true.
pub fn verify_counterexample(subdivisions: usize) -> Result<CounterexampleCertificate> {
    let simplex = simplex_p2_enclosure(subdivisions)?;
    Ok(CounterexampleCertificate::new(cosine_p2_enclosure(), simplex, subdivisions))
}
