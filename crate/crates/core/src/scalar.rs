//! Probability scalars.
//!
//! Transition laws, the slice-chain recurrence and the stationary solver are
//! written against [`Probability`] so the same code runs on exact rationals
//! ([`BigRational`]) and on `f32`/`f64`. Sampling never touches the scalar on
//! the hot path: each cumulative cutpoint is turned once into an integer
//! threshold on the 53-bit draw lattice (see [`Probability::draw_threshold`]).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Number of bits in a unit-interval draw.
pub const DRAW_BITS: u32 = 53;

/// `2^DRAW_BITS`, the size of the draw lattice.
pub const DRAW_SCALE: u64 = 1 << DRAW_BITS;

/// Scalar field used for transition probabilities.
pub trait Probability:
    Clone + Debug + Display + PartialOrd + Signed + Send + Sync + 'static
{
    /// `num / den`.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Approximate value, for statistics and reporting.
    fn to_f64(&self) -> f64;

    /// Whether equality comparisons are exact for this scalar.
    fn is_exact() -> bool;

    /// Number of lattice points `k` in `[0, 2^53)` with `k / 2^53 < self`,
    /// clamped to `[0, 2^53]`.
    ///
    /// A draw `k` lands strictly below cutpoint `c` iff `k < c.draw_threshold()`;
    /// a draw sitting exactly on a cutpoint therefore falls to the next state.
    fn draw_threshold(&self) -> u64;

    /// Magnitude used to choose pivots in elimination.
    fn pivot_weight(&self) -> f64 {
        self.abs().to_f64()
    }

    /// Equality up to the scalar's own precision.
    fn approx_eq(&self, other: &Self) -> bool;
}

fn clamp_threshold(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else if x >= DRAW_SCALE as f64 {
        DRAW_SCALE
    } else {
        x.ceil() as u64
    }
}

impl Probability for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }

    fn draw_threshold(&self) -> u64 {
        clamp_threshold(*self * DRAW_SCALE as f64)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-12 * (1.0 + self.abs().max(other.abs()))
    }
}

impl Probability for f32 {
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn is_exact() -> bool {
        false
    }

    fn draw_threshold(&self) -> u64 {
        clamp_threshold(*self as f64 * DRAW_SCALE as f64)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-5 * (1.0 + self.abs().max(other.abs()))
    }
}

impl Probability for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }

    fn draw_threshold(&self) -> u64 {
        if !self.is_positive() {
            return 0;
        }
        if *self >= BigRational::one() {
            return DRAW_SCALE;
        }
        // ceil(num * 2^53 / den)
        let scaled = self.numer() * BigInt::from(DRAW_SCALE);
        let (q, r) = scaled.div_rem(self.denom());
        let q = if r.is_zero() { q } else { q + 1 };
        q.to_u64().unwrap_or(DRAW_SCALE)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }
}

/// Parses `"n/d"` (or a bare integer) into an exact rational. Never goes
/// through floating point.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// Renders a rational as `"n/d"`, always with an explicit denominator.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
