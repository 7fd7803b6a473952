use serde::Serialize;

use super::spec::{ChainSpec, StateSpace};
use super::structure::ChainStructure;
use super::State;
use crate::scalar::Probability;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSumViolation {
    pub row: usize,
    pub state: State,
    pub sum: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub states: Vec<State>,
    pub closed: bool,
    pub period: usize,
}

/// Diagnostics for a chain spec. `valid` holds iff the spec invariants do.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub issues: Vec<String>,
    pub row_sum_violations: Vec<RowSumViolation>,
    pub negative_entries: Vec<(State, State)>,
    pub unreachable_from_x_star: Vec<State>,
    /// Closed classes only; transient states are listed separately.
    pub recurrent_classes: Vec<ClassReport>,
    pub transient_states: Vec<State>,
    pub x_star_recurrent: bool,
    pub recurrent_attracting: bool,
}

/// Checks row sums, `x*` validity and recurrence, and reports the class
/// decomposition with periods (finite case).
pub fn validate_spec<T: Probability>(spec: &ChainSpec<T>) -> ValidationReport {
    let mut report = ValidationReport {
        valid: true,
        issues: Vec::new(),
        row_sum_violations: Vec::new(),
        negative_entries: Vec::new(),
        unreachable_from_x_star: Vec::new(),
        recurrent_classes: Vec::new(),
        transient_states: Vec::new(),
        x_star_recurrent: true,
        recurrent_attracting: true,
    };

    let (states, m) = match (spec.space(), spec.matrix()) {
        (StateSpace::Countable, _) => {
            // Rules are total functions N x [0,1) -> N by construction.
            if spec.rule().is_none() {
                report.valid = false;
                report.issues.push("countable spec without a rule".into());
            }
            return report;
        }
        (StateSpace::Finite(states), Some(m)) => (states, m),
        (StateSpace::Finite(_), None) => {
            report.valid = false;
            report.issues.push("finite spec without a matrix".into());
            return report;
        }
    };

    for (i, row) in m.rows().iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if p.is_negative() {
                report.negative_entries.push((states[i], states[j]));
            }
        }
        let sum = row.iter().fold(T::zero(), |acc, p| acc + p.clone());
        if !sum.approx_eq(&T::one()) {
            report.row_sum_violations.push(RowSumViolation {
                row: i,
                state: states[i],
                sum: sum.to_string(),
            });
        }
    }
    for v in &report.row_sum_violations {
        report.issues.push(format!(
            "row {} (state {}) sums to {}",
            v.row, v.state, v.sum
        ));
    }
    if !report.negative_entries.is_empty() {
        report.issues.push(format!(
            "{} negative entries",
            report.negative_entries.len()
        ));
    }

    let structure = ChainStructure::analyze(m);
    for class in &structure.classes {
        let members: Vec<State> = class.members.iter().map(|&i| states[i]).collect();
        if class.closed {
            report.recurrent_classes.push(ClassReport {
                states: members,
                closed: true,
                period: class.period,
            });
        } else {
            report.transient_states.extend(members);
        }
    }
    report.transient_states.sort_unstable();
    report.recurrent_attracting = structure.recurrent_attracting;

    match spec.index_of(spec.x_star()) {
        None => {
            report.x_star_recurrent = false;
            report
                .issues
                .push(format!("x* = {} is not a state", spec.x_star()));
        }
        Some(ix) => {
            report.x_star_recurrent = structure.is_recurrent(ix);
            if !report.x_star_recurrent {
                report
                    .issues
                    .push(format!("x* = {} is transient", spec.x_star()));
            }
            let reach = ChainStructure::reachable_from(m, ix);
            report.unreachable_from_x_star = reach
                .iter()
                .enumerate()
                .filter(|(_, &r)| !r)
                .map(|(i, _)| states[i])
                .collect();
        }
    }

    report.valid = report.row_sum_violations.is_empty()
        && report.negative_entries.is_empty()
        && report.x_star_recurrent;
    report
}
