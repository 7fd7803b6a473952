//! Communicating-class structure of a finite transition matrix.

use std::collections::VecDeque;

use num_integer::Integer;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::spec::TransitionMatrix;
use crate::scalar::Probability;

/// One strongly connected component of the positive-probability digraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommClass {
    /// Matrix indices, sorted.
    pub members: Vec<usize>,
    /// No positive-probability edge leaves the class.
    pub closed: bool,
    /// Period, for closed classes. Zero for a transient singleton without a
    /// self-loop.
    pub period: usize,
}

/// Class decomposition of a finite chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    pub classes: Vec<CommClass>,
    /// Class index for each state index.
    pub class_of: Vec<usize>,
    /// Every transient state reaches some closed class.
    pub recurrent_attracting: bool,
}

impl ChainStructure {
    pub fn analyze<T: Probability>(m: &TransitionMatrix<T>) -> Self {
        let n = m.dim();
        let adj: Vec<Vec<usize>> = (0..n).map(|i| m.support(i).collect()).collect();

        let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (i, out) in adj.iter().enumerate() {
            for &j in out {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
        let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        sccs.sort();

        let mut class_of = vec![0; n];
        for (c, members) in sccs.iter().enumerate() {
            for &i in members {
                class_of[i] = c;
            }
        }

        let classes: Vec<CommClass> = sccs
            .iter()
            .enumerate()
            .map(|(c, members)| {
                let closed = members
                    .iter()
                    .all(|&i| adj[i].iter().all(|&j| class_of[j] == c));
                let period = class_period(&adj, members, &class_of, c);
                CommClass {
                    members: members.clone(),
                    closed,
                    period,
                }
            })
            .collect();

        // reverse reachability from closed classes
        let mut radj = vec![Vec::new(); n];
        for (i, out) in adj.iter().enumerate() {
            for &j in out {
                radj[j].push(i);
            }
        }
        let mut reaches = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for cl in classes.iter().filter(|c| c.closed) {
            for &i in &cl.members {
                reaches[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &u in &radj[v] {
                if !reaches[u] {
                    reaches[u] = true;
                    queue.push_back(u);
                }
            }
        }

        ChainStructure {
            classes,
            class_of,
            recurrent_attracting: reaches.iter().all(|&r| r),
        }
    }

    pub fn closed_classes(&self) -> impl Iterator<Item = &CommClass> {
        self.classes.iter().filter(|c| c.closed)
    }

    /// Sum of periods over closed classes: the number of cyclic classes.
    pub fn cyclic_class_count(&self) -> usize {
        self.closed_classes().map(|c| c.period).sum()
    }

    pub fn is_recurrent(&self, index: usize) -> bool {
        self.classes[self.class_of[index]].closed
    }

    /// Indices reachable from `start` along positive-probability edges.
    pub fn reachable_from<T: Probability>(m: &TransitionMatrix<T>, start: usize) -> Vec<bool> {
        let mut seen = vec![false; m.dim()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for j in m.support(v) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}

/// gcd of `level[u] + 1 - level[v]` over edges inside the class, with BFS
/// levels from the smallest member.
fn class_period(adj: &[Vec<usize>], members: &[usize], class_of: &[usize], c: usize) -> usize {
    let root = members[0];
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if class_of[v] != c {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
                g = g.gcd(&diff);
            }
        }
    }
    g
}
