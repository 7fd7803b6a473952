//! Mass-transport identities on `Z`, rooted-ball keys, the size-biased root
//! law and local weak convergence of windowed bridge graphs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::{build_slab, estimate_birecurrent, BiRecurrentEstimate, BridgeSlab};
use crate::driver::{make_oracle, ChainSpec, Noise, State, Time};
use crate::error::{Error, Result};
use crate::scalar::Probability;
use crate::stats::MeanEstimate;

/// Default doubling cap when a transport needs the bi-recurrent path.
pub const BETA_MAX_DEPTH: u64 = 1 << 20;

/// A simulated window together with the per-vertex bookkeeping shared by
/// the registry transports.
pub struct WindowData {
    pub slab: BridgeSlab,
    /// Times whose marginals enter the averages.
    pub interior: (Time, Time),
    pub beta: Option<BiRecurrentEstimate>,
    /// First time strictly after the vertex at which its path is at `x*`.
    pub next_base: Vec<Option<Time>>,
    /// Latest start time of a base path through the vertex.
    pub youngest: Vec<Time>,
    /// First time at or after the vertex at which its path is on `beta`.
    pub meet_beta: Option<Vec<Option<Time>>>,
}

impl WindowData {
    /// Simulates `B ⊓ [a, b]` with `[a, b] = interior` widened by `margin`
    /// on both sides, and the bi-recurrent path if requested.
    pub fn new<T: Probability, N: Noise>(
        spec: &ChainSpec<T>,
        noise: &N,
        interior: (Time, Time),
        margin: u64,
        with_beta: bool,
    ) -> Result<Self> {
        let (lo, hi) = interior;
        let interval = (lo - margin as Time, hi + margin as Time);
        let slab = build_slab(spec, noise, interval, true)?;
        let n = slab.num_vertices();
        let base = slab.base_state();

        let mut next_base = vec![None; n];
        for v in (0..n).rev() {
            if let Some(p) = slab.parent(v) {
                let (tp, yp) = slab.vertex(p);
                next_base[v] = if yp == base { Some(tp) } else { next_base[p] };
            }
        }
        let mut youngest = vec![Time::MIN; n];
        for v in 0..n {
            let (t, y) = slab.vertex(v);
            youngest[v] = if y == base {
                t
            } else {
                slab.children(v)
                    .iter()
                    .map(|&c| youngest[c])
                    .max()
                    .unwrap_or(Time::MIN)
            };
        }

        let (beta, meet_beta) = if with_beta {
            let est = estimate_birecurrent(spec, noise, interval, BETA_MAX_DEPTH, 3)?;
            if est.covers(interval) {
                let mut meet = vec![None; n];
                for v in (0..n).rev() {
                    let (t, y) = slab.vertex(v);
                    meet[v] = if est.at(t) == Some(y) {
                        Some(t)
                    } else {
                        slab.parent(v).and_then(|p| meet[p])
                    };
                }
                (Some(est), Some(meet))
            } else {
                (Some(est), None)
            }
        } else {
            (None, None)
        };
        Ok(WindowData {
            slab,
            interior,
            beta,
            next_base,
            youngest,
            meet_beta,
        })
    }

    fn base_id(&self, s: Time) -> usize {
        self.slab
            .id_of(s, self.slab.base_state())
            .expect("base state is in every slice")
    }

    fn in_interior(&self, t: Time) -> bool {
        (self.interior.0..=self.interior.1).contains(&t)
    }

    pub fn beta_ready(&self) -> bool {
        self.meet_beta.is_some()
    }
}

/// Per-time marginals of one transport on one window. Index `k` is time
/// `a + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub start: Time,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// Interior sources whose mass could not be placed inside the window.
    pub censored: u64,
}

impl Marginals {
    fn new(w: &WindowData) -> Self {
        let (a, b) = w.slab.interval();
        let len = (b - a + 1) as usize;
        Marginals {
            start: a,
            plus: vec![0.0; len],
            minus: vec![0.0; len],
            censored: 0,
        }
    }

    fn send(&mut self, s: Time, t: Time, mass: f64) {
        let len = self.plus.len() as Time;
        let (i, j) = (s - self.start, t - self.start);
        if (0..len).contains(&i) {
            self.plus[i as usize] += mass;
        }
        if (0..len).contains(&j) {
            self.minus[j as usize] += mass;
        }
    }

    /// Mass 1 from `s` to every `t` in `[from, to)`, via a difference array.
    fn spread(&mut self, s: Time, from: Time, to: Time, diff: &mut [f64]) {
        if to <= from {
            return;
        }
        let i = (s - self.start) as usize;
        self.plus[i] += (to - from) as f64;
        let lo = (from - self.start).max(0) as usize;
        let hi = ((to - self.start) as usize).min(diff.len() - 1);
        diff[lo] += 1.0;
        diff[hi] -= 1.0;
    }

    fn finish_spread(&mut self, diff: &[f64]) {
        let mut acc = 0.0;
        for (k, d) in diff.iter().take(self.minus.len()).enumerate() {
            acc += d;
            self.minus[k] += acc;
        }
    }

    /// Interior time averages of `(w+, w-)`.
    pub fn interior_means(&self, (lo, hi): (Time, Time)) -> (f64, f64) {
        let i = (lo - self.start) as usize;
        let j = (hi - self.start) as usize;
        let n = (j - i + 1) as f64;
        (
            self.plus[i..=j].iter().sum::<f64>() / n,
            self.minus[i..=j].iter().sum::<f64>() / n,
        )
    }
}

/// A nonnegative, shift-compatible mass transport `w(s, t)` on `Z`,
/// evaluated on a simulated window.
pub trait MassTransport: Sync {
    fn id(&self) -> String;

    fn needs_beta(&self) -> bool {
        false
    }

    /// Adds every unit of mass with source or target in the window.
    fn accumulate(&self, w: &WindowData, m: &mut Marginals);
}

/// The built-in transports. `Zero` sends nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RegistryTransport {
    Zero,
    /// From `s`, mass 1 to each time strictly between `s` and the first
    /// return of `F^{(s, x*)}` to `x*`.
    PreReturn,
    /// From each `(s, y)` in the slice, mass 1 to the first later time at
    /// which its path is at `x*`.
    FirstReturn,
    /// From `s`, mass 1 to the first `t > s` at which `F^{(s, x*)}` shares a
    /// vertex with a path started after `s`.
    YoungerMerge,
    /// From `s`, mass 1 to each `t` in `[s, m)`, where `m` is the merge time
    /// of `F^{(s, x*)}` with `beta`.
    BetaMerge,
    /// From each `(s, y)` in the slice, mass 1 to the first `t >= s` at which
    /// its path is on `beta`.
    SliceToBeta,
    /// From `s` with `beta_s = x*`, mass 1 to each `t` up to and including
    /// the next visit of `beta` to `x*`.
    CycleFormula,
}

impl RegistryTransport {
    /// The six transports of the suite, in order.
    pub fn registry() -> [RegistryTransport; 6] {
        use RegistryTransport::*;
        [
            PreReturn,
            FirstReturn,
            YoungerMerge,
            BetaMerge,
            SliceToBeta,
            CycleFormula,
        ]
    }

    pub fn number(self) -> usize {
        use RegistryTransport::*;
        match self {
            Zero => 0,
            PreReturn => 1,
            FirstReturn => 2,
            YoungerMerge => 3,
            BetaMerge => 4,
            SliceToBeta => 5,
            CycleFormula => 6,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "zero" || s == "0" {
            return Ok(RegistryTransport::Zero);
        }
        s.parse::<usize>()
            .ok()
            .and_then(|k| Self::registry().into_iter().find(|t| t.number() == k))
            .ok_or_else(|| Error::Usage(format!("unknown transport {s:?}; use 1-6 or zero")))
    }

    pub fn name(self) -> &'static str {
        use RegistryTransport::*;
        match self {
            Zero => "zero",
            PreReturn => "pre-return",
            FirstReturn => "first-return",
            YoungerMerge => "younger-merge",
            BetaMerge => "beta-merge",
            SliceToBeta => "slice-to-beta",
            CycleFormula => "cycle-formula",
        }
    }
}

impl fmt::Display for RegistryTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.number(), self.name())
    }
}

impl MassTransport for RegistryTransport {
    fn id(&self) -> String {
        self.to_string()
    }

    fn needs_beta(&self) -> bool {
        matches!(
            self,
            RegistryTransport::BetaMerge
                | RegistryTransport::SliceToBeta
                | RegistryTransport::CycleFormula
        )
    }

    fn accumulate(&self, w: &WindowData, m: &mut Marginals) {
        use RegistryTransport::*;
        let slab = &w.slab;
        let (a, b) = slab.interval();
        let n = slab.num_vertices();
        let mut diff = vec![0.0; m.plus.len() + 1];
        match self {
            Zero => {}
            PreReturn => {
                for s in a..=b {
                    match w.next_base[w.base_id(s)] {
                        Some(r) => m.spread(s, s + 1, r, &mut diff),
                        None => m.censored += w.in_interior(s) as u64,
                    }
                }
                m.finish_spread(&diff);
            }
            FirstReturn => {
                for v in 0..n {
                    let s = slab.vertex(v).0;
                    match w.next_base[v] {
                        Some(r) => m.send(s, r, 1.0),
                        None => {
                            m.send(s, b + 1, 1.0);
                            m.censored += w.in_interior(s) as u64;
                        }
                    }
                }
            }
            YoungerMerge => {
                for s in a..=b {
                    let mut v = w.base_id(s);
                    let mut target = None;
                    while let Some(p) = slab.parent(v) {
                        v = p;
                        if w.youngest[v] > s {
                            target = Some(slab.vertex(v).0);
                            break;
                        }
                    }
                    match target {
                        Some(t) => m.send(s, t, 1.0),
                        None => {
                            m.send(s, b + 1, 1.0);
                            m.censored += w.in_interior(s) as u64;
                        }
                    }
                }
            }
            BetaMerge => {
                let meet = w.meet_beta.as_ref().expect("beta required");
                for s in a..=b {
                    match meet[w.base_id(s)] {
                        Some(t) => m.spread(s, s, t, &mut diff),
                        None => m.censored += w.in_interior(s) as u64,
                    }
                }
                m.finish_spread(&diff);
            }
            SliceToBeta => {
                let meet = w.meet_beta.as_ref().expect("beta required");
                for v in 0..n {
                    let s = slab.vertex(v).0;
                    match meet[v] {
                        Some(t) => m.send(s, t, 1.0),
                        None => {
                            m.send(s, b + 1, 1.0);
                            m.censored += w.in_interior(s) as u64;
                        }
                    }
                }
            }
            CycleFormula => {
                let beta = w.beta.as_ref().expect("beta required");
                let x_star = slab.base_state();
                let visits: Vec<Time> = (a..=b).filter(|&t| beta.at(t) == Some(x_star)).collect();
                for pair in visits.windows(2) {
                    m.spread(pair[0], pair[0] + 1, pair[1] + 1, &mut diff);
                }
                if let Some(&last) = visits.last() {
                    m.censored += w.in_interior(last) as u64;
                }
                m.finish_spread(&diff);
            }
        }
    }
}

/// Evaluates a transport on one window.
pub fn evaluate_transport(transport: &dyn MassTransport, w: &WindowData) -> Result<Marginals> {
    if transport.needs_beta() && !w.beta_ready() {
        return Err(Error::NotReady(format!(
            "{} needs a converged beta",
            transport.id()
        )));
    }
    let mut m = Marginals::new(w);
    transport.accumulate(w, &mut m);
    Ok(m)
}

/// Window length plus the burn-in margin kept on each side of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowPlan {
    pub window: u64,
    pub margin: u64,
}

impl WindowPlan {
    pub fn new(window: u64) -> Self {
        WindowPlan {
            window,
            margin: (window / 20).max(200),
        }
    }

    pub fn interior(&self) -> (Time, Time) {
        (0, self.window as Time - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportEstimate {
    pub transport: String,
    pub w_plus: MeanEstimate,
    pub w_minus: MeanEstimate,
    /// `sqrt(se+^2 + se-^2)` from the across-stream variances.
    pub joint_stderr: f64,
    pub streams_used: usize,
    /// Streams dropped because `beta` did not converge.
    pub streams_skipped: usize,
    pub censored_sources: u64,
}

impl TransportEstimate {
    pub fn difference(&self) -> f64 {
        self.w_plus.mean - self.w_minus.mean
    }

    /// `|w+ - w-| <= k` joint standard errors.
    pub fn balanced(&self, k: f64) -> bool {
        self.difference().abs() <= k * self.joint_stderr
    }
}

/// Estimates every transport in `transports` on `n_windows` streams sharing
/// one simulated window per stream.
pub fn estimate_transports<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    transports: &[&dyn MassTransport],
    plan: WindowPlan,
    n_windows: u64,
) -> Result<Vec<TransportEstimate>> {
    let with_beta = transports.iter().any(|t| t.needs_beta());
    let interior = plan.interior();
    let per_stream: Vec<Result<Vec<Option<(f64, f64, u64)>>>> = (0..n_windows)
        .into_par_iter()
        .map(|i| {
            let o = make_oracle(base_seed, i);
            let w = WindowData::new(spec, &o, interior, plan.margin, with_beta)?;
            Ok(transports
                .iter()
                .map(|t| {
                    evaluate_transport(*t, &w).ok().map(|m| {
                        let (p, q) = m.interior_means(interior);
                        (p, q, m.censored)
                    })
                })
                .collect())
        })
        .collect();
    let per_stream: Vec<Vec<Option<(f64, f64, u64)>>> =
        per_stream.into_iter().collect::<Result<_>>()?;

    Ok(transports
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let rows: Vec<(f64, f64, u64)> = per_stream.iter().filter_map(|r| r[k]).collect();
            let plus: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let minus: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let w_plus = MeanEstimate::from_samples(&plus);
            let w_minus = MeanEstimate::from_samples(&minus);
            TransportEstimate {
                transport: t.id(),
                joint_stderr: (w_plus.stderr.powi(2) + w_minus.stderr.powi(2)).sqrt(),
                w_plus,
                w_minus,
                streams_used: rows.len(),
                streams_skipped: per_stream.len() - rows.len(),
                censored_sources: rows.iter().map(|r| r.2).sum(),
            }
        })
        .collect())
}

/// Single-transport convenience wrapper around [`estimate_transports`].
pub fn estimate_transport<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    transport: &dyn MassTransport,
    window: u64,
    n_windows: u64,
) -> Result<TransportEstimate> {
    let mut v = estimate_transports(
        spec,
        base_seed,
        &[transport],
        WindowPlan::new(window),
        n_windows,
    )?;
    Ok(v.remove(0))
}

/// Mean number of visits to each state by `F^{(s, x*)}` up to and including
/// its first return to `x*`, averaged over interior starts `s`. The classical
/// target is `pi(y) / pi(x*)`.
pub fn cycle_formula_estimate<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    window: u64,
    n_windows: u64,
) -> Result<Vec<(State, MeanEstimate)>> {
    let states = spec
        .states()
        .ok_or_else(|| Error::NotApplicable("cycle formula needs a finite state space".into()))?
        .to_vec();
    let plan = WindowPlan::new(window);
    let interior = plan.interior();
    let per_stream: Vec<Result<Vec<f64>>> = (0..n_windows)
        .into_par_iter()
        .map(|i| {
            let o = make_oracle(base_seed, i);
            let w = WindowData::new(spec, &o, interior, plan.margin, false)?;
            let slab = &w.slab;
            let mut counts = vec![0u64; states.len()];
            for s in interior.0..=interior.1 {
                let mut v = w.base_id(s);
                while let Some(p) = slab.parent(v) {
                    v = p;
                    let y = slab.vertex(v).1;
                    counts[spec.index_of(y).unwrap()] += 1;
                    if y == spec.x_star() {
                        break;
                    }
                }
            }
            let n = (interior.1 - interior.0 + 1) as f64;
            Ok(counts.into_iter().map(|c| c as f64 / n).collect())
        })
        .collect();
    let per_stream: Vec<Vec<f64>> = per_stream.into_iter().collect::<Result<_>>()?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let xs: Vec<f64> = per_stream.iter().map(|r| r[k]).collect();
            (y, MeanEstimate::from_samples(&xs))
        })
        .collect())
}

/// Mean slice size `#B_t` over interior times, one sample per stream.
pub fn mean_slice_size<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    window: u64,
    n_windows: u64,
) -> Result<MeanEstimate> {
    let plan = WindowPlan::new(window);
    let (lo, hi) = plan.interior();
    let xs: Vec<Result<f64>> = (0..n_windows)
        .into_par_iter()
        .map(|i| {
            let o = make_oracle(base_seed, i);
            let slab = build_slab(spec, &o, (lo - plan.margin as Time, hi), false)?;
            let total: usize = (lo..=hi).map(|t| slab.slice(t).len()).sum();
            Ok(total as f64 / (hi - lo + 1) as f64)
        })
        .collect();
    let xs: Vec<f64> = xs.into_iter().collect::<Result<_>>()?;
    Ok(MeanEstimate::from_samples(&xs))
}

/// Canonical encoding of a rooted, state-marked ball.
///
/// Edges are directed, so a rooted isomorphism fixes the time offset of
/// every ball vertex relative to the root; `(time offset, state)` then names
/// each vertex uniquely and the sorted vertex and edge lists are canonical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct RootedBallKey(String);

impl RootedBallKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RootedBallKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Edge tag in ball encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeTag {
    Follow,
    Spine,
    Both,
}

impl EdgeTag {
    fn code(self) -> char {
        match self {
            EdgeTag::Follow => 'f',
            EdgeTag::Spine => 's',
            EdgeTag::Both => 'b',
        }
    }
}

/// Directed, tagged out-edges of a slab vertex.
fn out_edges(slab: &BridgeSlab, v: usize) -> Vec<(usize, EdgeTag)> {
    let (t, y) = slab.vertex(v);
    let follow = slab.parent(v);
    let spine = if slab.spine_included() && y == slab.base_state() {
        slab.id_of(t + 1, y)
    } else {
        None
    };
    match (follow, spine) {
        (Some(f), Some(s)) if f == s => vec![(f, EdgeTag::Both)],
        (f, s) => f
            .map(|f| (f, EdgeTag::Follow))
            .into_iter()
            .chain(s.map(|s| (s, EdgeTag::Spine)))
            .collect(),
    }
}

fn in_edges(slab: &BridgeSlab, v: usize) -> Vec<usize> {
    let (t, y) = slab.vertex(v);
    let mut out: Vec<usize> = slab.children(v).to_vec();
    if slab.spine_included() && y == slab.base_state() {
        if let Some(p) = slab.id_of(t - 1, y) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Vertices of the radius-`r` ball around `root` (undirected graph
/// distance), with distances.
pub fn ball_vertices(slab: &BridgeSlab, root: usize, radius: u32) -> Vec<(usize, u32)> {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::from([(root, 0)]);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        let nbrs = out_edges(slab, v)
            .into_iter()
            .map(|e| e.0)
            .chain(in_edges(slab, v));
        for u in nbrs {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist.into_iter().collect()
}

/// Canonical key of the ball of radius `radius` around `root`, in the slab
/// graph with spine edges if the slab has them. Censored when a vertex
/// strictly inside the ball sits on the window boundary.
pub fn canonical_ball(
    slab: &BridgeSlab,
    root: (Time, State),
    radius: u32,
) -> Result<RootedBallKey> {
    let root_id = slab
        .id_of(root.0, root.1)
        .ok_or_else(|| Error::Usage(format!("root {root:?} is not a slab vertex")))?;
    let (a, b) = slab.interval();
    let ball = ball_vertices(slab, root_id, radius);
    if ball.iter().any(|&(v, d)| {
        let t = slab.vertex(v).0;
        d < radius && (t == a || t == b)
    }) {
        return Err(Error::Censored(format!(
            "ball around {root:?} reaches the window edge"
        )));
    }
    let mut marks: Vec<(Time, State, usize)> = ball
        .iter()
        .map(|&(v, _)| {
            let (t, y) = slab.vertex(v);
            (t - root.0, y, v)
        })
        .collect();
    marks.sort_unstable();
    let pos: BTreeMap<usize, usize> = marks.iter().enumerate().map(|(i, m)| (m.2, i)).collect();
    let mut edges: Vec<(usize, usize, EdgeTag)> = Vec::new();
    for (i, &(_, _, v)) in marks.iter().enumerate() {
        for (u, tag) in out_edges(slab, v) {
            if let Some(&j) = pos.get(&u) {
                edges.push((i, j, tag));
            }
        }
    }
    edges.sort_unstable();

    let mut key = format!("r{radius}|");
    for (i, (dt, y, _)) in marks.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        key.push_str(&format!("{dt}:{y}"));
    }
    key.push('|');
    for (i, (u, v, tag)) in edges.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        key.push_str(&format!("{u}>{v}{}", tag.code()));
    }
    Ok(RootedBallKey(key))
}

/// Ball law category: a key, or the explicit censored bin.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BallCategory {
    Key(RootedBallKey),
    Censored,
}

fn categorize(slab: &BridgeSlab, root: (Time, State), radius: u32) -> BallCategory {
    match canonical_ball(slab, root, radius) {
        Ok(k) => BallCategory::Key(k),
        Err(_) => BallCategory::Censored,
    }
}

/// Empirical law over ball categories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallLaw {
    pub counts: BTreeMap<BallCategory, u64>,
    pub total: u64,
}

impl BallLaw {
    fn from_samples(samples: &[BallCategory]) -> Self {
        let mut counts = BTreeMap::new();
        for s in samples {
            *counts.entry(s.clone()).or_insert(0) += 1;
        }
        BallLaw {
            counts,
            total: samples.len() as u64,
        }
    }

    pub fn probability(&self, c: &BallCategory) -> f64 {
        self.counts.get(c).copied().unwrap_or(0) as f64 / self.total.max(1) as f64
    }

    pub fn weights(&self) -> Vec<(BallCategory, f64)> {
        self.counts
            .keys()
            .map(|k| (k.clone(), self.probability(k)))
            .collect()
    }

    pub fn total_variation(&self, other: &BallLaw) -> f64 {
        let mut keys: Vec<&BallCategory> = self.counts.keys().chain(other.counts.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| (self.probability(k) - other.probability(k)).abs())
            .sum::<f64>()
    }
}

/// Root balls collected with one root per vertex of the time-0 slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBiasedSample {
    /// Root ball categories in stream order, then slice order.
    pub samples: Vec<BallCategory>,
    pub law: BallLaw,
    /// Root count per root slice size (size-biased).
    pub root_slice_sizes: BTreeMap<usize, u64>,
    /// Window count per slice size (unweighted).
    pub window_slice_sizes: BTreeMap<usize, u64>,
}

/// Half-width of the windows used for the size-biased reference.
pub const REFERENCE_HALF_WIDTH: Time = 200;

/// For each stream, builds `B ⊓ [-h, h]` with spine and records the ball
/// of every vertex of the time-0 slice.
pub fn sample_root_sizebiased<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    n_windows: u64,
    radius: u32,
) -> Result<SizeBiasedSample> {
    sample_sizebiased_streams(spec, base_seed, 0..n_windows, radius)
}

fn sample_sizebiased_streams<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    streams: std::ops::Range<u64>,
    radius: u32,
) -> Result<SizeBiasedSample> {
    let h = REFERENCE_HALF_WIDTH.max(radius as Time + 1);
    let per: Vec<Result<Vec<BallCategory>>> = streams
        .into_par_iter()
        .map(|i| {
            let o = make_oracle(base_seed, i);
            let slab = build_slab(spec, &o, (-h, h), true)?;
            Ok(slab
                .slice(0)
                .iter()
                .map(|&y| categorize(&slab, (0, y), radius))
                .collect())
        })
        .collect();
    let per: Vec<Vec<BallCategory>> = per.into_iter().collect::<Result<_>>()?;
    let mut root_slice_sizes = BTreeMap::new();
    let mut window_slice_sizes = BTreeMap::new();
    for w in &per {
        *root_slice_sizes.entry(w.len()).or_insert(0) += w.len() as u64;
        *window_slice_sizes.entry(w.len()).or_insert(0) += 1;
    }
    let samples: Vec<BallCategory> = per.into_iter().flatten().collect();
    Ok(SizeBiasedSample {
        law: BallLaw::from_samples(&samples),
        samples,
        root_slice_sizes,
        window_slice_sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LwcRow {
    pub n: u64,
    pub tv: f64,
    pub samples: u64,
    pub censored_fraction: f64,
}

/// Stream ids of the reference draws start here so they never overlap the
/// windowed draws.
pub const REFERENCE_STREAM_OFFSET: u64 = 1 << 40;

/// For each `n`, compares the law of the radius-`radius` ball around a
/// uniform root of `V'_{[0, n]}` inside `B ⊓ [-n, n + radius]` against the
/// size-biased reference at a matched sample count.
pub fn lwc_distance<T: Probability>(
    spec: &ChainSpec<T>,
    base_seed: u64,
    radius: u32,
    n_list: &[u64],
    n_windows: u64,
    roots_per_window: u64,
) -> Result<Vec<LwcRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list.first() == Some(&0) {
        return Err(Error::Usage(
            "n_list must be positive and increasing".into(),
        ));
    }
    let want = (n_windows * roots_per_window) as usize;

    // reference pool, grown until it holds `want` roots
    let mut reference: Vec<BallCategory> = Vec::new();
    let mut next = REFERENCE_STREAM_OFFSET;
    let chunk = n_windows.max(16);
    while reference.len() < want {
        let s = sample_sizebiased_streams(spec, base_seed, next..next + chunk, radius)?;
        reference.extend(s.samples);
        next += chunk;
    }
    reference.truncate(want);
    let reference = BallLaw::from_samples(&reference);

    n_list
        .iter()
        .map(|&n| {
            let per: Vec<Result<Vec<BallCategory>>> = (0..n_windows)
                .into_par_iter()
                .map(|i| {
                    let o = make_oracle(base_seed, i);
                    // extended by the radius so balls around late roots are whole
                    let big =
                        build_slab(spec, &o, (-(n as Time), (n + radius as u64) as Time), true)?;
                    let small = build_slab(spec, &o, (0, n as Time), false)?;
                    let roots: Vec<(Time, State)> = small.vertices().collect();
                    Ok((0..roots_per_window)
                        .map(|j| {
                            let u = o.aux(n, j).as_f64();
                            let root =
                                roots[((u * roots.len() as f64) as usize).min(roots.len() - 1)];
                            categorize(&big, root, radius)
                        })
                        .collect())
                })
                .collect();
            let samples: Vec<BallCategory> = per
                .into_iter()
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let law = BallLaw::from_samples(&samples);
            Ok(LwcRow {
                n,
                tv: law.total_variation(&reference),
                samples: law.total,
                censored_fraction: law.probability(&BallCategory::Censored),
            })
        })
        .collect()
}
