//! Finite windows of the bridge graph: the subgraph generated by all paths
//! started at the base state, cut to a time interval.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::Serialize;
use serde_json::{json, Value};

use crate::driver::{ChainSpec, ChainStructure, Noise, State, Time};
use crate::error::{Error, Result};
use crate::scalar::Probability;

/// `B ⊓ [a, b]`: the union of the paths started at `(s, base)` for
/// `s in [a, b]`, followed up to time `b`.
///
/// Vertices are numbered slice by slice in increasing time, and within a
/// slice by increasing state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeSlab {
    start: Time,
    end: Time,
    base: State,
    spine: bool,
    slices: Vec<Vec<State>>,
    /// `parents[k][i]`: index in `slices[k + 1]` of the follow target.
    parents: Vec<Vec<u32>>,
    offsets: Vec<usize>,
    child_offsets: Vec<usize>,
    children: Vec<usize>,
    /// Per vertex of the last slice: class of its path followed past `b`
    /// for `tail_horizon` more steps.
    tail: Vec<u32>,
}

/// Minimum number of steps the last slice is followed past the window when
/// deciding which of its paths merge.
pub const TAIL_HORIZON: u64 = 4096;

impl BridgeSlab {
    pub fn interval(&self) -> (Time, Time) {
        (self.start, self.end)
    }

    pub fn base_state(&self) -> State {
        self.base
    }

    pub fn spine_included(&self) -> bool {
        self.spine
    }

    pub fn num_vertices(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn contains_time(&self, t: Time) -> bool {
        (self.start..=self.end).contains(&t)
    }

    /// Sorted states present at time `t`.
    pub fn slice(&self, t: Time) -> &[State] {
        &self.slices[(t - self.start) as usize]
    }

    pub fn slices(&self) -> impl Iterator<Item = (Time, &[State])> + '_ {
        self.slices
            .iter()
            .enumerate()
            .map(|(k, s)| (self.start + k as Time, s.as_slice()))
    }

    /// Id of the first vertex at time `t`.
    pub fn slice_offset(&self, t: Time) -> usize {
        self.offsets[(t - self.start) as usize]
    }

    pub fn vertex(&self, id: usize) -> (Time, State) {
        let k = self.offsets.partition_point(|&o| o <= id) - 1;
        (self.start + k as Time, self.slices[k][id - self.offsets[k]])
    }

    pub fn id_of(&self, t: Time, y: State) -> Option<usize> {
        if !self.contains_time(t) {
            return None;
        }
        let k = (t - self.start) as usize;
        self.slices[k]
            .binary_search(&y)
            .ok()
            .map(|i| self.offsets[k] + i)
    }

    pub fn vertices(&self) -> impl Iterator<Item = (Time, State)> + '_ {
        self.slices()
            .flat_map(|(t, s)| s.iter().map(move |&y| (t, y)))
    }

    /// Follow-edge target, absent at time `b`.
    pub fn parent(&self, id: usize) -> Option<usize> {
        let k = self.offsets.partition_point(|&o| o <= id) - 1;
        let p = self.parents.get(k)?;
        Some(self.offsets[k + 1] + p[id - self.offsets[k]] as usize)
    }

    /// Vertices whose follow edge points at `id`.
    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[self.child_offsets[id]..self.child_offsets[id + 1]]
    }

    pub fn follow_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_vertices()).filter_map(move |v| self.parent(v).map(|p| (v, p)))
    }

    /// Spine edges `(t, base) -> (t + 1, base)`, empty unless requested at
    /// build time.
    pub fn spine_edges(&self) -> Vec<(usize, usize)> {
        if !self.spine {
            return Vec::new();
        }
        (self.start..self.end)
            .map(|t| {
                (
                    self.id_of(t, self.base).unwrap(),
                    self.id_of(t + 1, self.base).unwrap(),
                )
            })
            .collect()
    }

    /// JSON export with vertex, edge and slice lists and an optional
    /// bi-recurrent path annotation.
    pub fn to_json(&self, beta: Option<&BiRecurrentEstimate>) -> Value {
        let vertices: Vec<Value> = self.vertices().map(|(t, y)| json!([t, y])).collect();
        let edges: Vec<Value> = self.follow_edges().map(|(u, v)| json!([u, v])).collect();
        let spine: Vec<Value> = self
            .spine_edges()
            .into_iter()
            .map(|(u, v)| json!([u, v]))
            .collect();
        let slices: Vec<Value> = self
            .slices()
            .map(|(t, s)| json!({"t": t, "states": s}))
            .collect();
        let mut doc = json!({
            "interval": [self.start, self.end],
            "base_state": self.base,
            "spine_included": self.spine,
            "vertices": vertices,
            "follow_edges": edges,
            "spine_edges": spine,
            "slices": slices,
        });
        if let Some(b) = beta {
            let ann: Vec<Value> = (self.start..=self.end)
                .map(|t| json!({"t": t, "state": b.at(t)}))
                .collect();
            doc["beta"] = json!({"status": b.status, "path": ann});
        }
        doc
    }
}

/// Builds `B(x*) ⊓ [a, b]`.
pub fn build_slab<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    interval: (Time, Time),
    with_spine: bool,
) -> Result<BridgeSlab> {
    build_slab_from(spec, noise, spec.x_star(), interval, with_spine)
}

/// Builds `B(base) ⊓ [a, b]` for an arbitrary base state.
pub fn build_slab_from<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    base: State,
    (a, b): (Time, Time),
    with_spine: bool,
) -> Result<BridgeSlab> {
    if a > b {
        return Err(Error::Usage(format!("empty interval [{a}, {b}]")));
    }
    spec.check_state(base)?;
    let len = (b - a + 1) as usize;
    let mut slices: Vec<Vec<State>> = Vec::with_capacity(len);
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(len - 1);
    slices.push(vec![base]);
    for t in a..b {
        let cur = slices.last().unwrap();
        let images: Vec<State> = cur.iter().map(|&y| spec.step(noise, t, y)).collect();
        let mut next = images.clone();
        next.push(base);
        next.sort_unstable();
        next.dedup();
        let p = images
            .iter()
            .map(|y| next.binary_search(y).unwrap() as u32)
            .collect();
        parents.push(p);
        slices.push(next);
    }

    let mut offsets = Vec::with_capacity(len + 1);
    let mut acc = 0usize;
    offsets.push(0);
    for s in &slices {
        acc += s.len();
        offsets.push(acc);
    }

    let n = acc;
    let mut indeg = vec![0usize; n];
    for (k, p) in parents.iter().enumerate() {
        for &j in p {
            indeg[offsets[k + 1] + j as usize] += 1;
        }
    }
    let mut child_offsets = Vec::with_capacity(n + 1);
    child_offsets.push(0);
    for d in &indeg {
        child_offsets.push(child_offsets.last().unwrap() + d);
    }
    let mut fill = child_offsets.clone();
    let mut children = vec![0usize; n];
    for (k, p) in parents.iter().enumerate() {
        for (i, &j) in p.iter().enumerate() {
            let target = offsets[k + 1] + j as usize;
            children[fill[target]] = offsets[k] + i;
            fill[target] += 1;
        }
    }

    let tail = tail_classes(
        spec,
        noise,
        slices.last().unwrap(),
        b,
        TAIL_HORIZON.max(len as u64),
    );

    Ok(BridgeSlab {
        start: a,
        end: b,
        base,
        spine: with_spine,
        slices,
        parents,
        offsets,
        child_offsets,
        children,
        tail,
    })
}

/// Follows every state of `last` from time `b` until all paths merge or
/// `horizon` steps pass; returns a merge-class label per entry.
fn tail_classes<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    last: &[State],
    b: Time,
    horizon: u64,
) -> Vec<u32> {
    let mut uf = UnionFind::<usize>::new(last.len());
    // (current state, representative entry), one per distinct state
    let mut fronts: Vec<(State, usize)> = last.iter().copied().zip(0..).collect();
    let mut t = b;
    while fronts.len() > 1 && ((t - b) as u64) < horizon {
        for f in fronts.iter_mut() {
            f.0 = spec.step(noise, t, f.0);
        }
        fronts.sort_unstable();
        fronts.dedup_by(|cur, kept| {
            if cur.0 == kept.0 {
                uf.union(cur.1, kept.1);
                true
            } else {
                false
            }
        });
        t += 1;
    }
    (0..last.len()).map(|i| uf.find(i) as u32).collect()
}

/// Component partition of a slab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlabComponents {
    pub count: usize,
    /// Component label per vertex id, numbered by first appearance.
    pub labels: Vec<usize>,
}

/// Connected components along follow edges, with last-slice vertices
/// joined when their paths merge within the tail horizon past the window.
/// Spine edges are ignored.
pub fn slab_components(slab: &BridgeSlab) -> SlabComponents {
    let n = slab.num_vertices();
    let mut uf = UnionFind::<usize>::new(n);
    for (u, v) in slab.follow_edges() {
        uf.union(u, v);
    }
    let last = slab.slice_offset(slab.end);
    for (i, &c) in slab.tail.iter().enumerate() {
        uf.union(last + i, last + c as usize);
    }
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    let labels: Vec<usize> = (0..n)
        .map(|v| {
            let r = uf.find(v);
            let next = relabel.len();
            *relabel.entry(r).or_insert(next)
        })
        .collect();
    SlabComponents {
        count: relabel.len(),
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetaStatus {
    Converged,
    Partial,
    Failed,
}

/// How a bi-recurrent path estimate was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetaCertificate {
    /// The composed map from `a - depth` to `a`, restricted to the states
    /// reachable from `x*`, is constant. Exact.
    Coalescence {
        depth: u64,
    },
    /// `k` consecutive doubling depths agreed at every determined time.
    Agreement {
        k: usize,
    },
    None,
}

/// Estimate of `beta_t = lim_{s -> -inf} F^{(s, x*)}_t` over a time range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BiRecurrentEstimate {
    pub t_range: (Time, Time),
    /// `None` is undetermined.
    pub beta: Vec<Option<State>>,
    pub stabilization_depth: Vec<Option<u64>>,
    pub status: BetaStatus,
    pub certificate: BetaCertificate,
    pub depths_tried: Vec<u64>,
}

impl BiRecurrentEstimate {
    pub fn at(&self, t: Time) -> Option<State> {
        let (a, b) = self.t_range;
        if t < a || t > b {
            return None;
        }
        self.beta[(t - a) as usize]
    }

    pub fn is_converged(&self) -> bool {
        self.status == BetaStatus::Converged
    }

    /// Whether `beta` is determined at every time of `[a, b]`.
    pub fn covers(&self, (a, b): (Time, Time)) -> bool {
        (a..=b).all(|t| self.at(t).is_some())
    }
}

/// Doubling depths `1, 2, 4, ...` not exceeding `max_depth`.
pub fn doubling_depths(max_depth: u64) -> Vec<u64> {
    std::iter::successors(Some(1u64), |&d| d.checked_mul(2))
        .take_while(|&d| d <= max_depth)
        .collect()
}

/// Estimates the bi-recurrent path on `t_range = [a, b]` from the paths
/// `F^{(a - d, x*)}` for doubling depths `d <= max_depth`.
///
/// Finite chains are certified by coalescence of every state reachable from
/// `x*` over `[a - d, a)`; the paths from all earlier starts then agree on
/// the whole range. Countable chains declare `beta_t` once `k` consecutive
/// depths agree at `t`.
pub fn estimate_birecurrent<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    (a, b): (Time, Time),
    max_depth: u64,
    k: usize,
) -> Result<BiRecurrentEstimate> {
    if a > b {
        return Err(Error::Usage(format!("empty range [{a}, {b}]")));
    }
    if k < 2 || max_depth < k as u64 {
        return Err(Error::Usage("need k >= 2 and max_depth >= k".into()));
    }
    let x_star = spec.x_star();
    spec.check_state(x_star)?;
    let len = (b - a + 1) as usize;

    let reach: Option<Vec<State>> = spec.matrix().map(|m| {
        let ix = spec.index_of(x_star).unwrap();
        ChainStructure::reachable_from(m, ix)
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| spec.state_at(i))
            .collect()
    });

    let mut depths_tried = Vec::new();
    let mut prev: Option<Vec<State>> = None;
    let mut run = vec![0usize; len];
    let mut stab = vec![0u64; len];

    for d in doubling_depths(max_depth) {
        depths_tried.push(d);
        let mut y = x_star;
        for t in (a - d as Time)..a {
            y = spec.step(noise, t, y);
        }
        let mut cur = Vec::with_capacity(len);
        cur.push(y);
        for t in a..b {
            y = spec.step(noise, t, y);
            cur.push(y);
        }
        for i in 0..len {
            if prev.as_ref().is_some_and(|p| p[i] == cur[i]) {
                run[i] += 1;
            } else {
                run[i] = 1;
                stab[i] = d;
            }
        }

        if let Some(reach) = &reach {
            if coalesces(spec, noise, reach, a - d as Time, a) {
                return Ok(BiRecurrentEstimate {
                    t_range: (a, b),
                    beta: cur.into_iter().map(Some).collect(),
                    stabilization_depth: stab.into_iter().map(Some).collect(),
                    status: BetaStatus::Converged,
                    certificate: BetaCertificate::Coalescence { depth: d },
                    depths_tried,
                });
            }
        } else if run.iter().all(|&r| r >= k) {
            prev = Some(cur);
            break;
        }
        prev = Some(cur);
    }

    if reach.is_some() || prev.is_none() {
        return Ok(BiRecurrentEstimate {
            t_range: (a, b),
            beta: vec![None; len],
            stabilization_depth: vec![None; len],
            status: BetaStatus::Failed,
            certificate: BetaCertificate::None,
            depths_tried,
        });
    }

    let last = prev.unwrap();
    let beta: Vec<Option<State>> = (0..len).map(|i| (run[i] >= k).then_some(last[i])).collect();
    let stabilization_depth: Vec<Option<u64>> =
        (0..len).map(|i| (run[i] >= k).then_some(stab[i])).collect();
    let consistent = (0..len - 1).all(|i| match (beta[i], beta[i + 1]) {
        (Some(u), Some(v)) => spec.step(noise, a + i as Time, u) == v,
        _ => true,
    });
    let determined = beta.iter().filter(|v| v.is_some()).count();
    let status = if !consistent || determined == 0 {
        BetaStatus::Failed
    } else if determined == len {
        BetaStatus::Converged
    } else {
        BetaStatus::Partial
    };
    Ok(BiRecurrentEstimate {
        t_range: (a, b),
        beta,
        stabilization_depth,
        status,
        certificate: BetaCertificate::Agreement { k },
        depths_tried,
    })
}

fn coalesces<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    states: &[State],
    from: Time,
    to: Time,
) -> bool {
    let mut cur: Vec<State> = states.to_vec();
    for t in from..to {
        for y in cur.iter_mut() {
            *y = spec.step(noise, t, *y);
        }
        cur.sort_unstable();
        cur.dedup();
        if cur.len() == 1 {
            return true;
        }
    }
    cur.len() == 1
}

/// Tri-state classification of a slab vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mortality {
    /// On the bi-recurrent path.
    Immortal,
    /// Finite descendant tree inside the window, hanging off `(anchor, beta_anchor)`.
    Mortal { anchor: Time },
    /// Window-censored.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MortalityDecomposition {
    pub interval: (Time, Time),
    /// Per slab vertex id.
    pub classes: Vec<Mortality>,
    /// `#Q_t` for every `t` whose tree is fully classified.
    pub tree_sizes: BTreeMap<Time, usize>,
}

impl MortalityDecomposition {
    fn collect(&self, slab: &BridgeSlab, f: impl Fn(&Mortality) -> bool) -> Vec<(Time, State)> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, m)| f(m))
            .map(|(v, _)| slab.vertex(v))
            .collect()
    }

    pub fn immortal_vertices(&self, slab: &BridgeSlab) -> Vec<(Time, State)> {
        self.collect(slab, |m| matches!(m, Mortality::Immortal))
    }

    pub fn mortal_vertices(&self, slab: &BridgeSlab) -> Vec<(Time, State)> {
        self.collect(slab, |m| matches!(m, Mortality::Mortal { .. }))
    }

    pub fn unknown_vertices(&self, slab: &BridgeSlab) -> Vec<(Time, State)> {
        self.collect(slab, |m| matches!(m, Mortality::Unknown))
    }
}

/// Splits slab vertices into immortal (on `beta`), mortal (descendant tree
/// avoids time `a` and the forward path meets `beta` before `b`) and unknown.
/// Descendant trees are those of the slab graph.
pub fn decompose_mortality(
    slab: &BridgeSlab,
    beta: &BiRecurrentEstimate,
) -> Result<MortalityDecomposition> {
    let (a, b) = slab.interval();
    if !beta.covers((a, b)) {
        return Err(Error::NotReady(format!(
            "beta undetermined somewhere on [{a}, {b}]"
        )));
    }
    let n = slab.num_vertices();
    let on_beta: Vec<bool> = (0..n)
        .map(|v| {
            let (t, y) = slab.vertex(v);
            beta.at(t) == Some(y)
        })
        .collect();

    // earliest time in the descendant tree; children precede parents in id order
    let mut desc_min: Vec<Time> = vec![0; n];
    for v in 0..n {
        let t = slab.vertex(v).0;
        desc_min[v] = slab
            .children(v)
            .iter()
            .map(|&c| desc_min[c])
            .fold(t, Time::min);
    }
    // first time the forward path is on beta
    let mut meet: Vec<Option<Time>> = vec![None; n];
    for v in (0..n).rev() {
        meet[v] = if on_beta[v] {
            Some(slab.vertex(v).0)
        } else {
            slab.parent(v).and_then(|p| meet[p])
        };
    }

    let classes: Vec<Mortality> = (0..n)
        .map(|v| {
            if on_beta[v] {
                Mortality::Immortal
            } else {
                match meet[v] {
                    Some(m) if m < b && desc_min[v] > a => Mortality::Mortal { anchor: m },
                    _ => Mortality::Unknown,
                }
            }
        })
        .collect();

    let mut incomplete: BTreeSet<Time> = BTreeSet::new();
    let mut sizes: BTreeMap<Time, usize> = BTreeMap::new();
    for v in 0..n {
        if on_beta[v] {
            sizes.entry(slab.vertex(v).0).or_insert(0);
        }
    }
    for v in 0..n {
        match classes[v] {
            Mortality::Mortal { anchor } => *sizes.entry(anchor).or_insert(0) += 1,
            Mortality::Unknown => {
                if let Some(m) = meet[v] {
                    incomplete.insert(m);
                }
            }
            Mortality::Immortal => {}
        }
    }
    let tree_sizes = sizes
        .into_iter()
        .filter(|(t, _)| !incomplete.contains(t))
        .collect();
    Ok(MortalityDecomposition {
        interval: (a, b),
        classes,
        tree_sizes,
    })
}

/// Vertices in `[a, b]` common to the windowed bridge graphs of every base
/// state. Each `B(x)` is simulated from `a - (b - a + 1)` so that paths
/// entering the interval from just before `a` are present.
pub fn bridge_intersection<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    base_states: &[State],
    (a, b): (Time, Time),
) -> Result<BTreeSet<(Time, State)>> {
    if a > b {
        return Err(Error::Usage(format!("empty interval [{a}, {b}]")));
    }
    let burn_in = b - a + 1;
    let mut acc: Option<BTreeSet<(Time, State)>> = None;
    for &x in base_states {
        let slab = build_slab_from(spec, noise, x, (a - burn_in, b), false)?;
        let set: BTreeSet<(Time, State)> = slab.vertices().filter(|&(t, _)| t >= a).collect();
        acc = Some(match acc {
            None => set,
            Some(prev) => prev.intersection(&set).copied().collect(),
        });
    }
    acc.ok_or_else(|| Error::Usage("no base states given".into()))
}
