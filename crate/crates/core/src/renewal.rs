//! The slice process `B_t` as a Markov chain on finite subsets containing
//! `x*`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use serde_json::{json, Value};

use crate::driver::{ChainSpec, Noise, State, Time};
use crate::error::{Error, Result};
use crate::scalar::Probability;
use crate::stats::MeanEstimate;

/// A sorted finite set of states containing `x*`. Ordered by size, then
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SubsetState(Vec<State>);

impl SubsetState {
    /// Sorts and dedups `members`; fails unless `x_star` is among them.
    pub fn new(mut members: Vec<State>, x_star: State) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.binary_search(&x_star).is_err() {
            return Err(Error::Usage(format!(
                "subset {members:?} does not contain x* = {x_star}"
            )));
        }
        Ok(SubsetState(members))
    }

    pub fn singleton(x_star: State) -> Self {
        SubsetState(vec![x_star])
    }

    pub fn members(&self) -> &[State] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: State) -> bool {
        self.0.binary_search(&x).is_ok()
    }
}

impl Ord for SubsetState {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.len(), &self.0).cmp(&(other.0.len(), &other.0))
    }
}

impl PartialOrd for SubsetState {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SubsetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// `{x*} ∪ {follow(t, y) : y in E}`.
pub fn evolve_slice<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    e: &SubsetState,
    t: Time,
) -> Result<SubsetState> {
    spec.require_independent("slice evolution")?;
    for &y in e.members() {
        spec.check_state(y)?;
    }
    Ok(step_slice(spec, noise, e.members(), t))
}

fn step_slice<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    e: &[State],
    t: Time,
) -> SubsetState {
    let mut next: Vec<State> = e.iter().map(|&y| spec.step(noise, t, y)).collect();
    next.push(spec.x_star());
    next.sort_unstable();
    next.dedup();
    SubsetState(next)
}

/// Every subset reachable in one step from `e` with positive probability.
pub fn slice_successors<T: Probability>(
    spec: &ChainSpec<T>,
    e: &SubsetState,
) -> Result<BTreeSet<SubsetState>> {
    let (_, m) = spec.require_finite("slice successors")?;
    let mut partial: BTreeSet<Vec<State>> = BTreeSet::from([vec![spec.x_star()]]);
    for &y in e.members() {
        let i = spec.index_of(y).ok_or(Error::InvalidState(y))?;
        let targets: Vec<State> = m.support(i).map(|j| spec.state_at(j)).collect();
        partial = partial
            .iter()
            .flat_map(|p| {
                targets.iter().map(move |&z| {
                    let mut q = p.clone();
                    if let Err(pos) = q.binary_search(&z) {
                        q.insert(pos, z);
                    }
                    q
                })
            })
            .collect();
    }
    Ok(partial.into_iter().map(SubsetState).collect())
}

/// Support of the slice chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SbReport {
    /// Union of the closed classes reached from `{x*}`, sorted.
    pub states: Vec<SubsetState>,
    pub closed_classes: Vec<Vec<SubsetState>>,
    /// Exactly one closed class was reached.
    pub irreducible: bool,
    /// `{x*}` belongs to a closed class.
    pub x_star_recurrent: bool,
    /// The search finished within the subset cap.
    pub complete: bool,
    pub explored: usize,
}

/// Breadth-first closure from `{x*}` under positive-probability slice
/// transitions, capped at `cap` subsets, followed by the closed classes of
/// the explored graph.
pub fn enumerate_sb<T: Probability>(spec: &ChainSpec<T>, cap: usize) -> Result<SbReport> {
    spec.require_finite("slice support")?;
    spec.require_independent("slice support")?;
    let start = SubsetState::singleton(spec.x_star());
    spec.check_state(spec.x_star())?;

    let mut index: BTreeMap<SubsetState, usize> = BTreeMap::new();
    let mut nodes: Vec<SubsetState> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(start.clone(), 0);
    nodes.push(start);
    queue.push_back(0usize);
    let mut complete = true;
    while let Some(u) = queue.pop_front() {
        for next in slice_successors(spec, &nodes[u])? {
            let v = match index.get(&next) {
                Some(&v) => v,
                None => {
                    if nodes.len() >= cap {
                        complete = false;
                        continue;
                    }
                    let v = nodes.len();
                    index.insert(next.clone(), v);
                    nodes.push(next);
                    queue.push_back(v);
                    v
                }
            };
            edges.push((u, v));
        }
    }

    let mut g = DiGraph::<(), ()>::with_capacity(nodes.len(), edges.len());
    let ids: Vec<_> = (0..nodes.len()).map(|_| g.add_node(())).collect();
    for &(u, v) in &edges {
        g.add_edge(ids[u], ids[v], ());
    }
    let sccs = tarjan_scc(&g);
    let mut class_of = vec![0usize; nodes.len()];
    for (c, comp) in sccs.iter().enumerate() {
        for ix in comp {
            class_of[ix.index()] = c;
        }
    }
    let mut closed_classes: Vec<Vec<SubsetState>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|ix| g.neighbors(*ix).all(|j| class_of[j.index()] == *c))
        })
        .map(|(_, comp)| {
            let mut v: Vec<SubsetState> = comp.iter().map(|ix| nodes[ix.index()].clone()).collect();
            v.sort();
            v
        })
        .collect();
    closed_classes.sort();
    let mut states: Vec<SubsetState> = closed_classes.iter().flatten().cloned().collect();
    states.sort();
    let x_star_recurrent = states
        .binary_search(&SubsetState::singleton(spec.x_star()))
        .is_ok();
    Ok(SbReport {
        irreducible: closed_classes.len() == 1,
        states,
        closed_classes,
        x_star_recurrent,
        complete,
        explored: nodes.len(),
    })
}

/// Which element of `E` the recurrence peels off first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalOrder {
    LargestFirst,
    SmallestFirst,
}

/// Memoized evaluator of the slice-chain transition recurrence.
pub struct PbRecurrence<'a, T> {
    spec: &'a ChainSpec<T>,
    order: RemovalOrder,
    memo: HashMap<(Vec<State>, Vec<State>), T>,
}

impl<'a, T: Probability> PbRecurrence<'a, T> {
    pub fn new(spec: &'a ChainSpec<T>, order: RemovalOrder) -> Result<Self> {
        spec.require_finite("slice transition probabilities")?;
        spec.require_independent("slice transition probabilities")?;
        Ok(PbRecurrence {
            spec,
            order,
            memo: HashMap::new(),
        })
    }

    fn p(&self, x: State, y: State) -> T {
        self.spec.prob(x, y).expect("states validated")
    }

    /// `P_B(E, E')`.
    pub fn entry(&mut self, e: &SubsetState, e_prime: &SubsetState) -> Result<T> {
        let x_star = self.spec.x_star();
        if !e.contains(x_star) || !e_prime.contains(x_star) {
            return Err(Error::Usage("both subsets must contain x*".into()));
        }
        for &y in e.members().iter().chain(e_prime.members()) {
            self.spec.check_state(y)?;
        }
        Ok(self.eval(e.members(), e_prime.members()))
    }

    fn eval(&mut self, e: &[State], ep: &[State]) -> T {
        let x_star = self.spec.x_star();
        if ep.len() > e.len() + 1 {
            return T::zero();
        }
        if ep.len() == 1 {
            return e.iter().fold(T::one(), |acc, &y| acc * self.p(y, x_star));
        }
        if e.len() == 1 {
            // E = {x*}: E' = {x*, y}
            debug_assert_eq!(e[0], x_star);
            let y = *ep.iter().find(|&&z| z != x_star).unwrap();
            return if ep.len() == 2 {
                self.p(x_star, y)
            } else {
                T::zero()
            };
        }
        let key = (e.to_vec(), ep.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }

        // peel off one element of E other than x*
        let pos = match self.order {
            RemovalOrder::LargestFirst => e.iter().rposition(|&y| y != x_star),
            RemovalOrder::SmallestFirst => e.iter().position(|&y| y != x_star),
        }
        .unwrap();
        let xn = e[pos];
        let mut rest = e.to_vec();
        rest.remove(pos);

        let others: Vec<State> = ep.iter().copied().filter(|&y| y != x_star).collect();
        let mut stay = self.p(xn, x_star);
        for &y in &others {
            stay = stay + self.p(xn, y);
        }
        let mut total = if stay.is_zero() {
            T::zero()
        } else {
            stay * self.eval(&rest, ep)
        };
        for &y in &others {
            let w = self.p(xn, y);
            if w.is_zero() {
                continue;
            }
            let reduced: Vec<State> = ep.iter().copied().filter(|&z| z != y).collect();
            total = total + w * self.eval(&rest, &reduced);
        }
        self.memo.insert(key, total.clone());
        total
    }
}

/// `P_B(E, E')` by the slice-chain recurrence (largest element removed first).
pub fn pb_entry<T: Probability>(
    spec: &ChainSpec<T>,
    e: &SubsetState,
    e_prime: &SubsetState,
) -> Result<T> {
    PbRecurrence::new(spec, RemovalOrder::LargestFirst)?.entry(e, e_prime)
}

/// `P_B` restricted to an indexed list of subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PBMatrix<T> {
    pub states: Vec<SubsetState>,
    pub entries: Vec<Vec<T>>,
}

impl<T: Probability> PBMatrix<T> {
    pub fn row_sums(&self) -> Vec<T> {
        self.entries
            .iter()
            .map(|r| r.iter().fold(T::zero(), |a, p| a + p.clone()))
            .collect()
    }
}

/// Transition matrix and stationary law of the slice chain on `S_B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceStationary<T> {
    pub matrix: PBMatrix<T>,
    pub pi: Vec<T>,
}

impl<T: Probability> SliceStationary<T> {
    /// JSON export; entries are written with `Display` (`n/d` for rationals).
    pub fn to_json(&self) -> Value {
        let states: Vec<&[State]> = self.matrix.states.iter().map(|s| s.members()).collect();
        let rows: Vec<Vec<String>> = self
            .matrix
            .entries
            .iter()
            .map(|r| r.iter().map(|p| p.to_string()).collect())
            .collect();
        let pi: Vec<String> = self.pi.iter().map(|p| p.to_string()).collect();
        json!({"states": states, "matrix": rows, "pi": pi})
    }

    pub fn pi_of(&self, e: &SubsetState) -> Option<&T> {
        self.matrix
            .states
            .iter()
            .position(|s| s == e)
            .map(|i| &self.pi[i])
    }
}

/// Builds `P_B` on `S_B` and solves for `pi_B`.
pub fn pb_stationary<T: Probability>(
    spec: &ChainSpec<T>,
    cap: usize,
) -> Result<SliceStationary<T>> {
    let sb = enumerate_sb(spec, cap)?;
    if !sb.complete {
        return Err(Error::Partial(format!(
            "slice support exceeds {cap} subsets"
        )));
    }
    if !sb.irreducible {
        return Err(Error::Singular(format!(
            "slice chain has {} closed classes",
            sb.closed_classes.len()
        )));
    }
    let mut rec = PbRecurrence::new(spec, RemovalOrder::LargestFirst)?;
    let entries = sb
        .states
        .iter()
        .map(|e| {
            sb.states
                .iter()
                .map(|ep| rec.entry(e, ep))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let pi = crate::linalg::stationary_distribution(&entries)?;
    Ok(SliceStationary {
        matrix: PBMatrix {
            states: sb.states,
            entries,
        },
        pi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitTimes {
    pub window: (Time, Time),
    pub times: Vec<Time>,
    pub intensity: MeanEstimate,
}

/// Times `t in [0, window)` at which the slice equals `e`, after evolving the
/// slice from `{x*}` at time `-burn_in`.
pub fn slice_hit_times<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    e: &[State],
    window: u64,
    burn_in: u64,
) -> Result<HitTimes> {
    let x_star = spec.x_star();
    let mut target = e.to_vec();
    target.sort_unstable();
    target.dedup();
    let feasible =
        target.binary_search(&x_star).is_ok() && target.iter().all(|&y| spec.contains(y));

    let mut slice = SubsetState::singleton(x_star);
    for t in -(burn_in as Time)..0 {
        slice = step_slice(spec, noise, slice.members(), t);
    }
    let mut times = Vec::new();
    let mut hits = Vec::with_capacity(window as usize);
    for t in 0..window as Time {
        let hit = feasible && slice.members() == target.as_slice();
        if hit {
            times.push(t);
        }
        hits.push(if hit { 1.0 } else { 0.0 });
        slice = step_slice(spec, noise, slice.members(), t);
    }
    let intensity = if feasible {
        MeanEstimate::batch_means(&hits, 50)
    } else {
        MeanEstimate {
            mean: 0.0,
            stderr: 0.0,
            n: hits.len(),
        }
    };
    Ok(HitTimes {
        window: (0, window as Time - 1),
        times,
        intensity,
    })
}
