use serde::{Deserialize, Serialize};

use super::noise::{Noise, UnitDraw};
use super::{State, Time};
use crate::error::{Error, Result};
use crate::scalar::{Probability, DRAW_SCALE};

/// Which innovation each vertex consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseMode {
    /// One draw per time, shared by every state.
    SharedPerTime,
    /// One independent draw per `(t, x)`: fully independent transitions.
    PerTimeState,
}

/// Deterministic generators for chains that are not given by an inverse CDF
/// over a finite matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// On `N`: from `0` jump to a Geometric(1/2) value on `{1, 2, ...}`;
    /// from `n > 0` step to `n - 1`.
    Falling,
    /// On `{1, 2}`: a fair bit `b`; `1 -> 1 + b`, `2 -> 2 - b`.
    Flip,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Falling => "falling",
            Rule::Flip => "flip",
        }
    }

    fn apply(self, x: State, u: UnitDraw) -> State {
        match self {
            Rule::Falling => {
                if x > 0 {
                    return x - 1;
                }
                // smallest k >= 1 with u < 1 - 2^-k
                let m = u.lattice();
                let mut k = 1u32;
                while k < 53 && m >= DRAW_SCALE - (DRAW_SCALE >> k) {
                    k += 1;
                }
                if k == 53 && m >= DRAW_SCALE - 1 {
                    k = 54;
                }
                k as State
            }
            Rule::Flip => {
                let bit = (u.lattice() >= DRAW_SCALE / 2) as State;
                if x == 1 {
                    1 + bit
                } else {
                    2 - bit
                }
            }
        }
    }
}

/// Dense row-stochastic matrix with precomputed inverse-CDF thresholds.
#[derive(Debug, Clone)]
pub struct TransitionMatrix<T> {
    rows: Vec<Vec<T>>,
    cumulative: Vec<Vec<u64>>,
    last_support: Vec<usize>,
}

impl<T: Probability> TransitionMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Self {
        let cumulative = rows
            .iter()
            .map(|row| {
                let mut acc = T::zero();
                row.iter()
                    .map(|p| {
                        acc = acc.clone() + p.clone();
                        acc.draw_threshold()
                    })
                    .collect()
            })
            .collect();
        let last_support = rows
            .iter()
            .map(|row| row.iter().rposition(|p| p.is_positive()).unwrap_or(0))
            .collect();
        TransitionMatrix {
            rows,
            cumulative,
            last_support,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        &self.rows[i][j]
    }

    /// Inverse CDF: the first index whose cumulative cutpoint lies strictly
    /// above the draw. Draws on a cutpoint go to the higher index.
    #[inline]
    pub fn sample(&self, i: usize, u: UnitDraw) -> usize {
        let cum = &self.cumulative[i];
        let j = cum.partition_point(|&th| th <= u.lattice());
        if j < cum.len() {
            j
        } else {
            self.last_support[i]
        }
    }

    /// Indices with positive probability in row `i`.
    pub fn support(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i]
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_positive())
            .map(|(j, _)| j)
    }
}

/// State space of a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateSpace {
    /// Sorted, distinct state ids.
    Finite(Vec<State>),
    /// All of `N`.
    Countable,
}

/// A Markov chain together with its pathwise transition generator.
#[derive(Debug, Clone)]
pub struct ChainSpec<T> {
    name: String,
    space: StateSpace,
    matrix: Option<TransitionMatrix<T>>,
    rule: Option<Rule>,
    x_star: State,
    mode: NoiseMode,
    contiguous_base: Option<State>,
}

impl<T: Probability> ChainSpec<T> {
    /// Finite chain driven by inverse CDF over `rows`. Rows are not checked
    /// here; see [`crate::driver::validate_spec`].
    pub fn from_matrix(
        name: impl Into<String>,
        states: Vec<State>,
        rows: Vec<Vec<T>>,
        x_star: State,
        mode: NoiseMode,
    ) -> Result<Self> {
        Self::finite(name, states, rows, None, x_star, mode)
    }

    /// Finite chain driven by a named rule; `rows` is the law the rule realizes.
    pub fn from_rule_finite(
        name: impl Into<String>,
        states: Vec<State>,
        rows: Vec<Vec<T>>,
        rule: Rule,
        x_star: State,
        mode: NoiseMode,
    ) -> Result<Self> {
        Self::finite(name, states, rows, Some(rule), x_star, mode)
    }

    fn finite(
        name: impl Into<String>,
        states: Vec<State>,
        rows: Vec<Vec<T>>,
        rule: Option<Rule>,
        x_star: State,
        mode: NoiseMode,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidSpec("empty state space".into()));
        }
        if states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "states must be sorted and distinct".into(),
            ));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSpec(format!("matrix must be {n}x{n}")));
        }
        let contiguous_base = states
            .iter()
            .enumerate()
            .all(|(i, &s)| s == states[0] + i as State)
            .then(|| states[0]);
        Ok(ChainSpec {
            name: name.into(),
            space: StateSpace::Finite(states),
            matrix: Some(TransitionMatrix::new(rows)),
            rule,
            x_star,
            mode,
            contiguous_base,
        })
    }

    /// Countable chain on `N` driven by a named rule.
    pub fn countable(name: impl Into<String>, rule: Rule, x_star: State, mode: NoiseMode) -> Self {
        ChainSpec {
            name: name.into(),
            space: StateSpace::Countable,
            matrix: None,
            rule: Some(rule),
            x_star,
            mode,
            contiguous_base: None,
        }
    }

    /// Same chain, different noise mode.
    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    /// Same chain, different distinguished state.
    pub fn with_x_star(mut self, x_star: State) -> Self {
        self.x_star = x_star;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> Option<&TransitionMatrix<T>> {
        self.matrix.as_ref()
    }

    pub fn rule(&self) -> Option<Rule> {
        self.rule
    }

    pub fn x_star(&self) -> State {
        self.x_star
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.space, StateSpace::Finite(_))
    }

    /// Finite state list, if any.
    pub fn states(&self) -> Option<&[State]> {
        match &self.space {
            StateSpace::Finite(s) => Some(s),
            StateSpace::Countable => None,
        }
    }

    /// Number of states (finite case).
    pub fn num_states(&self) -> Option<usize> {
        self.states().map(|s| s.len())
    }

    /// Position of `x` in the finite state list.
    #[inline]
    pub fn index_of(&self, x: State) -> Option<usize> {
        match &self.space {
            StateSpace::Finite(states) => match self.contiguous_base {
                Some(base) => {
                    let i = x.checked_sub(base)? as usize;
                    (i < states.len()).then_some(i)
                }
                None => states.binary_search(&x).ok(),
            },
            StateSpace::Countable => None,
        }
    }

    pub fn state_at(&self, index: usize) -> State {
        match &self.space {
            StateSpace::Finite(states) => states[index],
            StateSpace::Countable => index as State,
        }
    }

    pub fn contains(&self, x: State) -> bool {
        match &self.space {
            StateSpace::Finite(_) => self.index_of(x).is_some(),
            StateSpace::Countable => true,
        }
    }

    pub fn check_state(&self, x: State) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::InvalidState(x))
        }
    }

    /// `P(x -> y)` in the finite case.
    pub fn prob(&self, x: State, y: State) -> Option<T> {
        let m = self.matrix.as_ref()?;
        Some(m.entry(self.index_of(x)?, self.index_of(y)?).clone())
    }

    /// Innovation consumed by vertex `(t, x)` under this spec's mode.
    #[inline]
    pub fn innovation<N: Noise>(&self, noise: &N, t: Time, x: State) -> UnitDraw {
        match self.mode {
            NoiseMode::SharedPerTime => noise.shared(t),
            NoiseMode::PerTimeState => noise.at(t, x),
        }
    }

    /// The pathwise transition generator `h(x, u)`.
    #[inline]
    pub fn generate(&self, x: State, u: UnitDraw) -> State {
        if let Some(rule) = self.rule {
            return rule.apply(x, u);
        }
        let m = self.matrix.as_ref().expect("finite spec carries a matrix");
        let i = self.index_of(x).expect("state checked by caller");
        self.state_at(m.sample(i, u))
    }

    /// One step of the follow map without validity checks.
    #[inline]
    pub fn step<N: Noise>(&self, noise: &N, t: Time, x: State) -> State {
        self.generate(x, self.innovation(noise, t, x))
    }

    /// Mode-checked access to the driving sequence: `x` must be present iff
    /// the spec uses per-vertex innovations.
    pub fn draw<N: Noise>(&self, noise: &N, t: Time, x: Option<State>) -> Result<UnitDraw> {
        match (self.mode, x) {
            (NoiseMode::SharedPerTime, None) => Ok(noise.shared(t)),
            (NoiseMode::PerTimeState, Some(x)) => {
                self.check_state(x)?;
                Ok(noise.at(t, x))
            }
            (NoiseMode::SharedPerTime, Some(_)) => Err(Error::ModeMismatch(
                "state supplied to a shared-per-time spec",
            )),
            (NoiseMode::PerTimeState, None) => {
                Err(Error::ModeMismatch("per-time-state spec needs a state"))
            }
        }
    }

    pub(crate) fn require_finite(&self, what: &str) -> Result<(&[State], &TransitionMatrix<T>)> {
        match (&self.space, &self.matrix) {
            (StateSpace::Finite(states), Some(m)) => Ok((states, m)),
            _ => Err(Error::NotApplicable(format!(
                "{what} needs a finite state space"
            ))),
        }
    }

    pub(crate) fn require_independent(&self, what: &str) -> Result<()> {
        if self.mode == NoiseMode::PerTimeState {
            Ok(())
        } else {
            Err(Error::NotApplicable(format!(
                "{what} needs per-time-state noise"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn falling_rule_geometric_support() {
        let g = |m: u64| Rule::Falling.apply(0, UnitDraw::from_lattice(m));
        assert_eq!(g(0), 1);
        assert_eq!(g((1 << 52) - 1), 1);
        assert_eq!(g(1 << 52), 2);
        assert_eq!(g((1 << 52) + (1 << 51)), 3);
        assert_eq!(g(DRAW_SCALE - 1), 54);
        assert_eq!(Rule::Falling.apply(7, UnitDraw::from_lattice(0)), 6);
    }

    #[test]
    fn flip_rule_never_merges() {
        for m in [0, 1 << 52, DRAW_SCALE - 1] {
            let u = UnitDraw::from_lattice(m);
            assert_ne!(Rule::Flip.apply(1, u), Rule::Flip.apply(2, u));
        }
    }

    #[test]
    fn inverse_cdf_ties_go_up() {
        let half = BigRational::from_ratio(1, 2);
        let m = TransitionMatrix::new(vec![vec![half.clone(), half]]);
        assert_eq!(m.sample(0, UnitDraw::from_lattice((1 << 52) - 1)), 0);
        assert_eq!(m.sample(0, UnitDraw::from_lattice(1 << 52)), 1);
    }

    #[test]
    fn zero_probability_states_are_skipped() {
        let z = BigRational::from_ratio(0, 1);
        let h = BigRational::from_ratio(1, 2);
        let m = TransitionMatrix::new(vec![vec![h.clone(), z.clone(), h, z]]);
        for k in [0, (1 << 52) - 1, 1 << 52, DRAW_SCALE - 1] {
            let j = m.sample(0, UnitDraw::from_lattice(k));
            assert!(j == 0 || j == 2);
        }
    }
}
