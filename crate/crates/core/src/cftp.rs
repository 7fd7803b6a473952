//! Coupling from the past on finite state spaces.

use serde::Serialize;

use crate::doeblin::Capped;
use crate::driver::{make_oracle, ChainSpec, Noise, State, Time};
use crate::error::{Error, Result};
use crate::linalg::stationary_distribution;
use crate::scalar::Probability;
use crate::stats::{chi_square_gof, ChiSquareTest};

/// Smallest `t <= cap` such that the composed map from `-t` to `0` is
/// constant on `S`.
pub fn backward_coupling_time<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    cap: u64,
) -> Result<Capped<u64>> {
    let (states, m) = spec.require_finite("backward coupling")?;
    let n = states.len();
    // image[x] = F^{(-t, x)}_0 as a state index, built by prepending steps
    let mut image: Vec<usize> = (0..n).collect();
    let mut step = vec![0usize; n];
    for t in 1..=cap {
        let time = -(t as Time);
        for (x, s) in step.iter_mut().enumerate() {
            *s = m.sample(x, spec.innovation(noise, time, states[x]));
        }
        image = step.iter().map(|&y| image[y]).collect();
        if image.iter().all(|&v| v == image[0]) {
            return Ok(Capped::Within(t));
        }
    }
    Ok(Capped::CapExceeded)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CouplingResult {
    pub tau: Capped<u64>,
    /// Present iff the doubling run coupled.
    pub sample: Option<State>,
    pub depths_tried: Vec<u64>,
}

/// Runs the full state vector forward from `-depth` to `0`.
fn run_from<T: Probability, N: Noise>(spec: &ChainSpec<T>, noise: &N, depth: u64) -> Vec<State> {
    let mut cur: Vec<State> = spec.states().unwrap().to_vec();
    for t in -(depth as Time)..0 {
        for y in cur.iter_mut() {
            *y = spec.step(noise, t, *y);
        }
    }
    cur
}

/// Propp-Wilson with depths `1, 2, 4, ... <= cap`, reusing the oracle's
/// innovations at every time index.
pub fn run_cftp<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    cap: u64,
) -> Result<CouplingResult> {
    spec.require_finite("coupling from the past")?;
    let tau = backward_coupling_time(spec, noise, cap)?;
    let mut depths_tried = Vec::new();
    let mut sample = None;
    for d in crate::bridge::doubling_depths(cap) {
        depths_tried.push(d);
        let end = run_from(spec, noise, d);
        if end.iter().all(|&y| y == end[0]) {
            if cfg!(debug_assertions) {
                let deeper = run_from(spec, noise, 2 * d);
                debug_assert!(
                    deeper.iter().all(|&y| y == end[0]),
                    "coupled map changed with depth"
                );
            }
            sample = Some(end[0]);
            break;
        }
    }
    Ok(CouplingResult {
        tau,
        sample,
        depths_tried,
    })
}

/// One perfect sample from the stationary law, or [`Error::CouplingFailed`].
pub fn cftp_sample<T: Probability, N: Noise>(
    spec: &ChainSpec<T>,
    noise: &N,
    cap: u64,
) -> Result<State> {
    run_cftp(spec, noise, cap)?
        .sample
        .ok_or(Error::CouplingFailed { cap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiCheck {
    pub states: Vec<State>,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub expected: Vec<f64>,
    pub failures: u64,
    pub test: ChiSquareTest,
}

/// Draws `n_samples` perfect samples on streams `0..n_samples` under
/// `base_seed` and tests them against the exact stationary law.
pub fn empirical_pi_check<T: Probability>(
    spec: &ChainSpec<T>,
    n_samples: u64,
    base_seed: u64,
    cap: u64,
) -> Result<PiCheck> {
    use rayon::prelude::*;

    let (states, m) = spec.require_finite("stationary check")?;
    let pi = stationary_distribution(m.rows())?;
    let expected: Vec<f64> = pi.iter().map(|p| p.to_f64()).collect();

    let draws: Vec<Option<usize>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let o = make_oracle(base_seed, i);
            cftp_sample(spec, &o, cap)
                .ok()
                .map(|y| spec.index_of(y).unwrap())
        })
        .collect();
    let mut counts = vec![0u64; states.len()];
    let mut failures = 0u64;
    for d in draws {
        match d {
            Some(i) => counts[i] += 1,
            None => failures += 1,
        }
    }
    if failures * 1000 >= n_samples.max(1) && failures > 0 {
        return Err(Error::Partial(format!(
            "{failures} of {n_samples} samples failed to couple within depth {cap}"
        )));
    }
    let total: u64 = counts.iter().sum();
    let frequencies = counts
        .iter()
        .map(|&c| c as f64 / total.max(1) as f64)
        .collect();
    let test = chi_square_gof(&counts, &expected);
    Ok(PiCheck {
        states: states.to_vec(),
        counts,
        frequencies,
        expected,
        failures,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::builtin;
    use crate::Rational;

    #[test]
    fn singleton_couples_at_once() {
        let spec = builtin::singleton::<Rational>();
        let o = make_oracle(0, 0);
        assert_eq!(
            backward_coupling_time(&spec, &o, 10).unwrap(),
            Capped::Within(1)
        );
        assert_eq!(cftp_sample(&spec, &o, 10).unwrap(), 0);
    }

    #[test]
    fn cycle_never_couples() {
        let spec = builtin::cycle::<Rational>(3);
        let o = make_oracle(0, 0);
        assert_eq!(
            backward_coupling_time(&spec, &o, 64).unwrap(),
            Capped::CapExceeded
        );
        assert_eq!(
            cftp_sample(&spec, &o, 64),
            Err(Error::CouplingFailed { cap: 64 })
        );
        let swap = builtin::swap2::<Rational>();
        assert!(cftp_sample(&swap, &o, 64).is_err());
    }

    #[test]
    fn countable_is_not_applicable() {
        let spec = builtin::falling::<Rational>();
        assert!(matches!(
            backward_coupling_time(&spec, &make_oracle(0, 0), 10),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn sample_matches_minimal_depth_run() {
        let spec = builtin::uniform3::<Rational>();
        for s in 0..50 {
            let o = make_oracle(9, s);
            let r = run_cftp(&spec, &o, 1 << 12).unwrap();
            let tau = r.tau.value().unwrap();
            let at_tau = run_from(&spec, &o, tau);
            assert!(at_tau.iter().all(|&y| Some(y) == r.sample));
            assert!(*r.depths_tried.last().unwrap() >= tau);
        }
    }

    #[test]
    fn singleton_pi_check() {
        let spec = builtin::singleton::<Rational>();
        let r = empirical_pi_check(&spec, 100, 1, 16).unwrap();
        assert_eq!(r.frequencies, vec![1.0]);
        assert_eq!(r.test.p_value, 1.0);
    }
}
