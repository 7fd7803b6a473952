use std::collections::{BTreeMap, BTreeSet};

use doeblin_core::driver::{builtin, make_oracle, ChainSpec, Noise, UnitDraw};
use doeblin_core::mtp::{
    estimate_transport, evaluate_transport, sample_root_sizebiased, MassTransport,
    RegistryTransport, WindowData,
};
use doeblin_core::renewal::{
    enumerate_sb, evolve_slice, pb_entry, pb_stationary, slice_hit_times, SubsetState,
};
use doeblin_core::{Error, Probability, Rational, State, Time};

fn named(name: &str) -> ChainSpec<Rational> {
    builtin::builtin(name).unwrap()
}

fn ratio_f64(r: &Rational) -> f64 {
    r.numer().to_string().parse::<f64>().unwrap() / r.denom().to_string().parse::<f64>().unwrap()
}

fn set(v: &[State]) -> SubsetState {
    SubsetState::new(v.to_vec(), 0).unwrap()
}

/// Slice-chain trajectory from `{x*}` driven by one stream.
fn slice_trajectory(spec: &ChainSpec<Rational>, seed: u64, steps: usize) -> Vec<SubsetState> {
    let o = make_oracle(seed, 0);
    let mut e = SubsetState::singleton(spec.x_star());
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps as Time {
        out.push(e.clone());
        e = evolve_slice(spec, &o, &e, t).unwrap();
    }
    out
}

#[test]
fn evolve_slice_examples() {
    let o = make_oracle(4, 0);
    let u = named("uniform3");
    for t in 0..200 {
        let next = evolve_slice(&u, &o, &set(&[0]), t).unwrap();
        assert!(next.contains(0) && next.len() <= 2);
    }
    let star = named("star");
    for t in 0..200 {
        let next = evolve_slice(&star, &o, &set(&[0, 1, 2]), t).unwrap();
        let image = star.step(&o, t, 0);
        assert_eq!(next, set(&[0, image]));
    }
    let single = named("singleton");
    assert_eq!(evolve_slice(&single, &o, &set(&[0]), 3).unwrap(), set(&[0]));
}

#[test]
fn singleton_slice_chain() {
    let spec = named("singleton");
    assert_eq!(enumerate_sb(&spec, 10).unwrap().states, vec![set(&[0])]);
    let st = pb_stationary(&spec, 10).unwrap();
    assert_eq!(st.pi, vec![Rational::from_ratio(1, 1)]);
    let h = slice_hit_times(&spec, &make_oracle(0, 0), &[0], 100, 0).unwrap();
    assert_eq!(h.times.len(), 100);
    assert_eq!(h.intensity.mean, 1.0);
}

#[test]
fn base_cases_of_the_recurrence() {
    for name in ["uniform3", "star", "lazy-cycle5", "two-class"] {
        let spec = named(name);
        let states = spec.states().unwrap().to_vec();
        let e = SubsetState::new(states.iter().copied().take(3).collect(), 0).unwrap();
        let want = e
            .members()
            .iter()
            .fold(Rational::from_ratio(1, 1), |acc, &y| {
                acc * spec.prob(y, 0).unwrap()
            });
        assert_eq!(pb_entry(&spec, &e, &set(&[0])).unwrap(), want, "{name}");
        if states.len() >= 4 {
            let big = SubsetState::new(states.iter().copied().take(4).collect(), 0).unwrap();
            assert_eq!(
                pb_entry(&spec, &set(&[0, states[1]]), &big).unwrap(),
                Rational::from_ratio(0, 1)
            );
        }
    }
}

#[test]
fn hit_times_reject_foreign_states() {
    let spec = named("uniform3");
    let h = slice_hit_times(&spec, &make_oracle(0, 0), &[0, 3], 1000, 10).unwrap();
    assert!(h.times.is_empty());
}

#[test]
fn star_pi_matches_occupation() {
    let spec = named("star");
    let st = pb_stationary(&spec, 64).unwrap();
    let traj = slice_trajectory(&spec, 5, 100_000);
    let mut counts: BTreeMap<SubsetState, u64> = BTreeMap::new();
    for e in &traj[100..] {
        *counts.entry(e.clone()).or_insert(0) += 1;
    }
    let n = (traj.len() - 100) as f64;
    assert_eq!(counts.keys().cloned().collect::<Vec<_>>(), st.matrix.states);
    for (e, p) in st.matrix.states.iter().zip(&st.pi) {
        let f = counts[e] as f64 / n;
        assert!((f - ratio_f64(p)).abs() < 0.01, "{e}: {f} vs {p}");
    }
}

#[test]
fn empirical_transitions_match_pb() {
    for name in ["uniform3", "star"] {
        let spec = named(name);
        let st = pb_stationary(&spec, 64).unwrap();
        let traj = slice_trajectory(&spec, 6, 200_000);
        let mut pairs: BTreeMap<(SubsetState, SubsetState), u64> = BTreeMap::new();
        let mut from: BTreeMap<SubsetState, u64> = BTreeMap::new();
        for w in traj.windows(2) {
            *pairs.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
            *from.entry(w[0].clone()).or_insert(0) += 1;
        }
        for (i, e) in st.matrix.states.iter().enumerate() {
            if ratio_f64(&st.pi[i]) < 0.05 {
                continue;
            }
            let n = from[e] as f64;
            for (j, ep) in st.matrix.states.iter().enumerate() {
                let p = ratio_f64(&st.matrix.entries[i][j]);
                let f = pairs.get(&(e.clone(), ep.clone())).copied().unwrap_or(0) as f64 / n;
                let se = (p * (1.0 - p) / n).sqrt();
                assert!(
                    (f - p).abs() <= 3.0 * se + 1e-12,
                    "{name} {e}->{ep}: {f} vs {p}"
                );
            }
        }
    }
}

#[test]
fn slice_chain_states_recur_in_both_halves() {
    let spec = named("uniform3");
    let st = pb_stationary(&spec, 64).unwrap();
    let traj = slice_trajectory(&spec, 7, 20_000);
    let (first, second) = traj.split_at(10_000);
    for (e, p) in st.matrix.states.iter().zip(&st.pi) {
        if ratio_f64(p) >= 0.05 {
            assert!(first.contains(e) && second.contains(e), "{e}");
        }
    }
}

#[test]
fn star_slice_support_never_holds_both_leaves() {
    let spec = named("star");
    let seen: BTreeSet<SubsetState> = slice_trajectory(&spec, 8, 10_000).into_iter().collect();
    assert!(!seen.contains(&set(&[0, 1, 2])));
    assert_eq!(
        seen.into_iter().collect::<Vec<_>>(),
        enumerate_sb(&spec, 64).unwrap().states
    );
}

#[test]
fn flip_slice_chain_is_not_applicable() {
    let spec = named("flip");
    assert!(matches!(
        enumerate_sb(&spec, 10),
        Err(Error::NotApplicable(_))
    ));
}

/// Reads the inner oracle at `t + shift`.
struct ShiftedNoise<N> {
    inner: N,
    shift: Time,
}

impl<N: Noise> Noise for ShiftedNoise<N> {
    fn shared(&self, t: Time) -> UnitDraw {
        self.inner.shared(t + self.shift)
    }
    fn at(&self, t: Time, x: State) -> UnitDraw {
        self.inner.at(t + self.shift, x)
    }
}

#[test]
fn transports_are_shift_compatible() {
    let spec = named("uniform3");
    for shift in [-700, 13, 5000] {
        let o = make_oracle(9, 2);
        let shifted = ShiftedNoise { inner: o, shift };
        let a = WindowData::new(&spec, &o, (shift, shift + 300), 200, true).unwrap();
        let b = WindowData::new(&spec, &shifted, (0, 300), 200, true).unwrap();
        for t in RegistryTransport::registry() {
            let ma = evaluate_transport(&t, &a).unwrap();
            let mb = evaluate_transport(&t, &b).unwrap();
            assert_eq!(ma.start, mb.start + shift);
            assert_eq!(
                (&ma.plus, &ma.minus, ma.censored),
                (&mb.plus, &mb.minus, mb.censored),
                "{}",
                t.id()
            );
        }
    }
}

#[test]
fn zero_transport_is_exactly_zero() {
    let est = estimate_transport(&named("uniform3"), 1, &RegistryTransport::Zero, 500, 4).unwrap();
    assert_eq!(
        (est.w_plus.mean, est.w_minus.mean, est.joint_stderr),
        (0.0, 0.0, 0.0)
    );
}

#[test]
fn younger_merge_count_has_unit_mean() {
    let est = estimate_transport(
        &named("uniform3"),
        2,
        &RegistryTransport::YoungerMerge,
        5000,
        16,
    )
    .unwrap();
    assert!(
        est.w_minus.within(1.0, 3.0) || est.w_plus.within(1.0, 3.0),
        "{est:?}"
    );
    assert!(est.balanced(3.0));
}

#[test]
fn root_slice_sizes_are_size_biased() {
    let s = sample_root_sizebiased(&named("uniform3"), 3, 4000, 1).unwrap();
    let windows: u64 = s.window_slice_sizes.values().sum();
    let weighted: f64 = s
        .window_slice_sizes
        .iter()
        .map(|(&k, &c)| k as f64 * c as f64)
        .sum();
    let roots = s.samples.len() as u64;
    assert_eq!(roots, s.root_slice_sizes.values().sum::<u64>());
    assert_eq!(windows, 4000);
    // exact size-biased law from pi_B: (17, 2 * 90, 3 * 36) / 305
    let exact = [
        (1usize, 17.0 / 305.0),
        (2, 180.0 / 305.0),
        (3, 108.0 / 305.0),
    ];
    for (k, p) in exact {
        let from_roots = s.root_slice_sizes.get(&k).copied().unwrap_or(0) as f64 / roots as f64;
        let from_windows =
            k as f64 * s.window_slice_sizes.get(&k).copied().unwrap_or(0) as f64 / weighted;
        assert!((from_roots - from_windows).abs() < 1e-12);
        let se = (p * (1.0 - p) / windows as f64).sqrt();
        assert!(
            (from_roots - p).abs() < 4.0 * se,
            "size {k}: {from_roots} vs {p}"
        );
    }
    let total: f64 = s.law.weights().iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn size_bias_is_trivial_for_constant_slices() {
    let s = sample_root_sizebiased(&named("cycle3"), 3, 50, 2).unwrap();
    assert_eq!(
        s.root_slice_sizes.keys().copied().collect::<Vec<_>>(),
        vec![3]
    );
    assert_eq!(s.window_slice_sizes[&3], 50);
    // every window contributes the same three rooted balls
    assert_eq!(s.law.counts.len(), 3);
    assert!(s.law.counts.values().all(|&c| c == 50));
}
