//! JSON chain-spec documents.
//!
//! ```json
//! { "name": "uniform3", "states": [0, 1, 2],
//!   "matrix": [["1/3","1/3","1/3"], ["1/3","1/3","1/3"], ["1/3","1/3","1/3"]],
//!   "x_star": 0, "noise_mode": "PerTimeState" }
//! ```
//!
//! Countable chains name a rule instead: `{ "rule": "falling", "x_star": 0,
//! "noise_mode": "PerTimeState" }`. Entries are exact rationals and are never
//! parsed through floating point.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::spec::{ChainSpec, NoiseMode, Rule, StateSpace};
use super::State;
use crate::error::{Error, Result};
use crate::scalar::{format_rational, parse_rational};
use crate::ExactChain;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<State>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
    pub x_star: State,
    pub noise_mode: NoiseMode,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec file serializes")
    }

    pub fn to_spec(&self) -> Result<ExactChain> {
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        let rows = match &self.matrix {
            Some(m) => Some(
                m.iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, s)| {
                                parse_rational(s).ok_or_else(|| {
                                    Error::Parse(format!("matrix[{i}][{j}] = {s:?} is not n/d"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        match (&self.states, rows, self.rule) {
            (Some(states), Some(rows), None) => {
                ChainSpec::from_matrix(name, states.clone(), rows, self.x_star, self.noise_mode)
            }
            (Some(states), Some(rows), Some(rule)) => ChainSpec::from_rule_finite(
                name,
                states.clone(),
                rows,
                rule,
                self.x_star,
                self.noise_mode,
            ),
            (None, None, Some(rule)) => Ok(ChainSpec::countable(
                name,
                rule,
                self.x_star,
                self.noise_mode,
            )),
            (Some(_), None, _) => Err(Error::InvalidSpec("finite spec needs a matrix".into())),
            (None, Some(_), _) => Err(Error::InvalidSpec("matrix given without states".into())),
            (None, None, None) => Err(Error::InvalidSpec(
                "spec needs either states+matrix or a rule".into(),
            )),
        }
    }

    pub fn from_spec(spec: &ChainSpec<BigRational>) -> Self {
        let (states, matrix) = match spec.space() {
            StateSpace::Finite(states) => (
                Some(states.clone()),
                spec.matrix().map(|m| {
                    m.rows()
                        .iter()
                        .map(|r| r.iter().map(format_rational).collect())
                        .collect()
                }),
            ),
            StateSpace::Countable => (None, None),
        };
        SpecFile {
            name: Some(spec.name().to_string()),
            states,
            rule: spec.rule(),
            matrix,
            x_star: spec.x_star(),
            noise_mode: spec.mode(),
        }
    }
}
