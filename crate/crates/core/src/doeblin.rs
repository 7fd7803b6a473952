//! The follow map, state paths, return/merge times and component structure
//! of the coupled-trajectory graph on `Z x S`.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::driver::{validate_spec, ChainSpec, ChainStructure, Noise, State, Time};
use crate::error::{Error, Result};
use crate::scalar::Probability;

/// A value found within a step budget, or the budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Capped<T> {
    Within(T),
    CapExceeded,
}

impl<T> Capped<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Capped::Within(v) => Some(v),
            Capped::CapExceeded => None,
        }
    }

    pub fn is_exceeded(&self) -> bool {
        matches!(self, Capped::CapExceeded)
    }
}

/// `(t + 1, h(x, xi_t))`, returned as the state at `t + 1`.
pub fn follow<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    t: Time,
    x: State,
) -> Result<State> {
    spec.check_state(x)?;
    Ok(spec.step(noise, t, x))
}

/// A simulated state path `F^{(t, x)}` over `horizon` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSample {
    pub start: (Time, State),
    pub horizon: u64,
    pub states: Vec<State>,
}

impl PathSample {
    pub fn at(&self, t: Time) -> Option<State> {
        let k = t.checked_sub(self.start.0)?;
        usize::try_from(k)
            .ok()
            .and_then(|k| self.states.get(k).copied())
    }
}

pub fn state_path<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    t: Time,
    x: State,
    horizon: u64,
) -> Result<PathSample> {
    spec.check_state(x)?;
    let mut states = Vec::with_capacity(horizon as usize + 1);
    let mut y = x;
    states.push(y);
    for k in 0..horizon as Time {
        y = spec.step(noise, t + k, y);
        states.push(y);
    }
    Ok(PathSample {
        start: (t, x),
        horizon,
        states,
    })
}

/// Steps until the path from `(t, x)` first hits `y` strictly after `t`.
pub fn return_time<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    t: Time,
    x: State,
    y: State,
    cap: u64,
) -> Result<Capped<u64>> {
    if cap == 0 {
        return Err(Error::Usage("return_time: cap must be at least 1".into()));
    }
    spec.check_state(x)?;
    spec.check_state(y)?;
    let mut z = x;
    for k in 1..=cap {
        z = spec.step(noise, t + k as Time - 1, z);
        if z == y {
            return Ok(Capped::Within(k));
        }
    }
    Ok(Capped::CapExceeded)
}

/// First time `s >= t` at which the paths from `(t, x)` and `(t, y)` meet,
/// searching up to `t + cap`.
pub fn merge_time<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    t: Time,
    x: State,
    y: State,
    cap: u64,
) -> Result<Capped<Time>> {
    spec.check_state(x)?;
    spec.check_state(y)?;
    let (mut u, mut v) = (x, y);
    for k in 0..=cap as Time {
        if u == v {
            let s = t + k;
            assert_eq!(
                spec.step(noise, s, u),
                spec.step(noise, s, v),
                "merged paths split"
            );
            return Ok(Capped::Within(s));
        }
        u = spec.step(noise, t + k, u);
        v = spec.step(noise, t + k, v);
    }
    Ok(Capped::CapExceeded)
}

/// Number of components of the graph predicted from the cyclic-class
/// decomposition of `P`: the sum of the periods of the closed classes.
pub fn predict_components<T: Probability>(spec: &ChainSpec<T>) -> Result<usize> {
    let (_, m) = spec.require_finite("component prediction")?;
    spec.require_independent("component prediction")?;
    let report = validate_spec(spec);
    if !report.valid {
        return Err(Error::NotApplicable(format!(
            "spec fails validation: {}",
            report.issues.join("; ")
        )));
    }
    let structure = ChainStructure::analyze(m);
    if !structure.recurrent_attracting {
        return Err(Error::NotApplicable(
            "chain is not recurrent-attracting".into(),
        ));
    }
    Ok(structure.cyclic_class_count())
}

/// Probe-based estimate of the component partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentReport {
    pub predicted_count: Option<usize>,
    /// Probe vertices grouped by observed class, each sorted, classes sorted.
    pub observed_classes: Vec<Vec<(Time, State)>>,
    pub class_count: usize,
    pub converged: bool,
    /// Class count after each simulated step.
    pub history: Vec<usize>,
}

/// Simulates every probe path from its start through `max start + window`,
/// uniting probes whose paths occupy the same vertex.
pub fn estimate_graph_components<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    window: u64,
    probes: &[(Time, State)],
) -> Result<ComponentReport> {
    let mut probes: Vec<(Time, State)> = probes.to_vec();
    probes.sort_unstable();
    probes.dedup();
    for &(_, x) in &probes {
        spec.check_state(x)?;
    }
    let predicted_count = predict_components(spec).ok();
    if probes.is_empty() {
        return Ok(ComponentReport {
            predicted_count,
            observed_classes: Vec::new(),
            class_count: 0,
            converged: true,
            history: Vec::new(),
        });
    }

    let t0 = probes[0].0;
    let t_end = probes.last().unwrap().0 + window as Time;
    let mut uf = UnionFind::<usize>::new(probes.len());
    let mut count = probes.len();
    // state -> representative probe among active paths at the current time
    let mut active: BTreeMap<State, usize> = BTreeMap::new();
    let mut next_probe = 0usize;
    let mut history = Vec::with_capacity((t_end - t0) as usize + 1);

    for t in t0..=t_end {
        while next_probe < probes.len() && probes[next_probe].0 == t {
            let x = probes[next_probe].1;
            match active.get(&x) {
                Some(&rep) => {
                    if uf.union(rep, next_probe) {
                        count -= 1;
                    }
                }
                None => {
                    active.insert(x, next_probe);
                }
            }
            next_probe += 1;
        }
        history.push(count);
        if t == t_end {
            break;
        }
        let mut next: BTreeMap<State, usize> = BTreeMap::new();
        for (&x, &rep) in &active {
            let y = spec.step(noise, t, x);
            match next.get(&y) {
                Some(&other) => {
                    if uf.union(other, rep) {
                        count -= 1;
                    }
                }
                None => {
                    next.insert(y, rep);
                }
            }
        }
        active = next;
    }

    let half = history.len() / 2;
    let converged = history[half..].iter().all(|&c| c == count);

    let labels = uf.into_labeling();
    let mut groups: BTreeMap<usize, Vec<(Time, State)>> = BTreeMap::new();
    for (i, &p) in probes.iter().enumerate() {
        groups.entry(labels[i]).or_default().push(p);
    }
    let mut observed_classes: Vec<Vec<(Time, State)>> = groups.into_values().collect();
    observed_classes.sort();
    debug_assert_eq!(observed_classes.len(), count);

    Ok(ComponentReport {
        predicted_count,
        class_count: observed_classes.len(),
        observed_classes,
        converged,
        history,
    })
}

/// Probes at every state of a finite chain at time 0.
pub fn all_state_probes<T: Probability>(spec: &ChainSpec<T>) -> Result<Vec<(Time, State)>> {
    let (states, _) = spec.require_finite("probe set")?;
    Ok(states.iter().map(|&x| (0, x)).collect())
}
