//! Benchmark chains shipped with the library.

use super::spec::{ChainSpec, NoiseMode, Rule};
use super::State;
use crate::error::{Error, Result};
use crate::scalar::Probability;

fn p<T: Probability>(n: i64, d: i64) -> T {
    T::from_ratio(n, d)
}

fn zeros<T: Probability>(n: usize) -> Vec<Vec<T>> {
    vec![vec![T::zero(); n]; n]
}

fn states(n: usize) -> Vec<State> {
    (0..n as State).collect()
}

/// `S = {0, 1, 2}`, every entry `1/3`, `x* = 0`.
pub fn uniform3<T: Probability>() -> ChainSpec<T> {
    let rows = vec![vec![p(1, 3); 3]; 3];
    ChainSpec::from_matrix("uniform3", states(3), rows, 0, NoiseMode::PerTimeState).unwrap()
}

/// `S = {0}`.
pub fn singleton<T: Probability>() -> ChainSpec<T> {
    ChainSpec::from_matrix(
        "singleton",
        vec![0],
        vec![vec![T::one()]],
        0,
        NoiseMode::PerTimeState,
    )
    .unwrap()
}

/// Deterministic `x -> x + 1 mod n`.
pub fn cycle<T: Probability>(n: usize) -> ChainSpec<T> {
    assert!(n >= 1);
    let mut rows = zeros(n);
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % n] = T::one();
    }
    ChainSpec::from_matrix(
        format!("cycle{n}"),
        states(n),
        rows,
        0,
        NoiseMode::PerTimeState,
    )
    .unwrap()
}

/// Stay with probability 1/2, otherwise advance around the `n`-cycle.
pub fn lazy_cycle<T: Probability>(n: usize) -> ChainSpec<T> {
    assert!(n >= 1);
    let mut rows = zeros::<T>(n);
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = row[i].clone() + p(1, 2);
        row[(i + 1) % n] = row[(i + 1) % n].clone() + p(1, 2);
    }
    ChainSpec::from_matrix(
        format!("lazy-cycle{n}"),
        states(n),
        rows,
        0,
        NoiseMode::PerTimeState,
    )
    .unwrap()
}

/// From `0` jump to Geometric(1/2) on `{1, 2, ...}`; from `n > 0` go to `n - 1`.
pub fn falling<T: Probability>() -> ChainSpec<T> {
    ChainSpec::countable("falling", Rule::Falling, 0, NoiseMode::PerTimeState)
}

/// `p(0, .) = 1/3` each; `1 -> 0`, `2 -> 0`.
pub fn star<T: Probability>() -> ChainSpec<T> {
    let mut rows = zeros(3);
    rows[0] = vec![p(1, 3); 3];
    rows[1][0] = T::one();
    rows[2][0] = T::one();
    ChainSpec::from_matrix("star", states(3), rows, 0, NoiseMode::PerTimeState).unwrap()
}

/// `S = {1, 2}` with one shared fair bit per time: `1 -> 1 + b`, `2 -> 2 - b`.
pub fn flip<T: Probability>() -> ChainSpec<T> {
    let rows = vec![vec![p(1, 2); 2]; 2];
    ChainSpec::from_rule_finite(
        "flip",
        vec![1, 2],
        rows,
        Rule::Flip,
        1,
        NoiseMode::SharedPerTime,
    )
    .unwrap()
}

/// Two states, both rows `(1/2, 1/2)`.
pub fn coin2<T: Probability>() -> ChainSpec<T> {
    let rows = vec![vec![p(1, 2); 2]; 2];
    ChainSpec::from_matrix("coin2", states(2), rows, 0, NoiseMode::PerTimeState).unwrap()
}

/// Deterministic swap `0 <-> 1` (period 2).
pub fn swap2<T: Probability>() -> ChainSpec<T> {
    cycle::<T>(2).renamed("swap2")
}

/// Closed classes `{0, 1}` (deterministic swap, period 2) and `{2, 3}`
/// (aperiodic), plus a transient state `4` feeding both.
pub fn two_class<T: Probability>() -> ChainSpec<T> {
    let mut rows = zeros(5);
    rows[0][1] = T::one();
    rows[1][0] = T::one();
    rows[2][2] = p(1, 2);
    rows[2][3] = p(1, 2);
    rows[3][2] = p(1, 2);
    rows[3][3] = p(1, 2);
    rows[4][0] = p(1, 2);
    rows[4][2] = p(1, 2);
    ChainSpec::from_matrix("two-class", states(5), rows, 0, NoiseMode::PerTimeState).unwrap()
}

impl<T: Probability> ChainSpec<T> {
    fn renamed(self, name: &str) -> Self {
        let mut s = self;
        s.set_name(name);
        s
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "uniform3",
    "singleton",
    "cycleN",
    "lazy-cycleN",
    "falling",
    "star",
    "flip",
    "coin2",
    "swap2",
    "two-class",
];

/// Looks up a built-in chain by name (`cycle5`, `lazy-cycle5`, `uniform3`, ...).
pub fn builtin<T: Probability>(name: &str) -> Result<ChainSpec<T>> {
    let parse_n = |rest: &str| -> Result<usize> {
        rest.parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Usage(format!("bad cycle length in {name:?}")))
    };
    Ok(match name {
        "uniform3" => uniform3(),
        "singleton" => singleton(),
        "falling" => falling(),
        "star" => star(),
        "flip" => flip(),
        "coin2" => coin2(),
        "swap2" => swap2(),
        "two-class" => two_class(),
        _ => {
            if let Some(rest) = name.strip_prefix("lazy-cycle") {
                lazy_cycle(parse_n(rest)?)
            } else if let Some(rest) = name.strip_prefix("cycle") {
                cycle(parse_n(rest)?)
            } else {
                return Err(Error::Usage(format!(
                    "unknown builtin {name:?}; known: {}",
                    BUILTIN_NAMES.join(", ")
                )));
            }
        }
    })
}
