//! Counter-based noise.
//!
//! Every innovation is a keyed hash of `(master_seed, stream_id, t[, x])`, so a
//! conceptually bi-infinite driving sequence can be queried at any time index,
//! in any order, from any thread, and always returns the same value.

use super::{State, Time};
use crate::scalar::{DRAW_BITS, DRAW_SCALE};

/// A point of the unit-interval lattice `{k / 2^53 : 0 <= k < 2^53}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitDraw(u64);

impl UnitDraw {
    /// Wraps a lattice index; values are reduced mod `2^53`.
    pub fn from_lattice(k: u64) -> Self {
        UnitDraw(k & (DRAW_SCALE - 1))
    }

    pub fn lattice(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / DRAW_SCALE as f64
    }
}

/// Source of innovations for the pathwise transition generator.
///
/// `shared(t)` is the per-time innovation used by every state at time `t`;
/// `at(t, x)` is the per-vertex innovation used when transitions are
/// vertically independent.
pub trait Noise: Sync {
    fn shared(&self, t: Time) -> UnitDraw;
    fn at(&self, t: Time, x: State) -> UnitDraw;
}

impl<N: Noise + ?Sized> Noise for &N {
    fn shared(&self, t: Time) -> UnitDraw {
        (**self).shared(t)
    }
    fn at(&self, t: Time, x: State) -> UnitDraw {
        (**self).at(t, x)
    }
}

const DOMAIN_SHARED: u64 = 0x5348_4152_4544_0001;
const DOMAIN_VERTEX: u64 = 0x5645_5254_4558_0002;
const DOMAIN_AUX: u64 = 0x4155_5849_4c49_0003;

#[inline]
fn fmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    fmix(h ^ fmix(word.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Deterministic, splittable driving sequence.
///
/// Streams with distinct `stream_id` are used as independent Monte Carlo
/// replications. [`NoiseOracle::resampled_from`] swaps in a different stream
/// for all times `>= t0`, which is how measurability with respect to the past
/// is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseOracle {
    master_seed: u64,
    stream_id: u64,
    future: Option<(Time, u64)>,
}

impl NoiseOracle {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        NoiseOracle {
            master_seed,
            stream_id,
            future: None,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Same draws before `t0`; draws from `alt_stream` at and after `t0`.
    pub fn resampled_from(self, t0: Time, alt_stream: u64) -> Self {
        NoiseOracle {
            future: Some((t0, alt_stream)),
            ..self
        }
    }

    #[inline]
    fn stream_at(&self, t: Time) -> u64 {
        match self.future {
            Some((t0, alt)) if t >= t0 => alt,
            _ => self.stream_id,
        }
    }

    #[inline]
    fn key(&self, domain: u64, t: Time) -> u64 {
        let h = absorb(
            fmix(self.master_seed ^ 0x6a09_e667_f3bc_c908),
            self.stream_at(t),
        );
        absorb(absorb(h, domain), t as u64)
    }

    /// Auxiliary draw for bookkeeping randomness (root sampling, shuffles)
    /// that must not collide with the driving sequence.
    pub fn aux(&self, a: u64, b: u64) -> UnitDraw {
        let h = absorb(absorb(self.key(DOMAIN_AUX, 0), a), b);
        UnitDraw(h >> (64 - DRAW_BITS))
    }
}

impl Noise for NoiseOracle {
    #[inline]
    fn shared(&self, t: Time) -> UnitDraw {
        UnitDraw(self.key(DOMAIN_SHARED, t) >> (64 - DRAW_BITS))
    }

    #[inline]
    fn at(&self, t: Time, x: State) -> UnitDraw {
        UnitDraw(absorb(self.key(DOMAIN_VERTEX, t), x) >> (64 - DRAW_BITS))
    }
}

/// Builds the oracle for one replication.
pub fn make_oracle(master_seed: u64, stream_id: u64) -> NoiseOracle {
    NoiseOracle::new(master_seed, stream_id)
}
