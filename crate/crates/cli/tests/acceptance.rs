//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use doeblin_core::bridge::{bridge_intersection, estimate_birecurrent, BetaStatus};
use doeblin_core::cftp::{cftp_sample, empirical_pi_check};
use doeblin_core::doeblin::{all_state_probes, estimate_graph_components, predict_components};
use doeblin_core::driver::{builtin, make_oracle, ChainSpec};
use doeblin_core::mtp::{
    cycle_formula_estimate, estimate_transports, lwc_distance, mean_slice_size, MassTransport,
    RegistryTransport, WindowPlan,
};
use doeblin_core::renewal::{
    enumerate_sb, pb_stationary, slice_hit_times, slice_successors, PbRecurrence, RemovalOrder,
    SubsetState,
};
use doeblin_core::{Probability, Rational, State, Time};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 7;

fn named(name: &str) -> ChainSpec<Rational> {
    builtin::builtin(name).unwrap()
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn set(v: &[State]) -> SubsetState {
    SubsetState::new(v.to_vec(), 0).unwrap()
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, limit: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    check(
        took < limit,
        format!("{detail}; {:.2?} (limit {:?})", took, limit),
    )
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_doeblin"))
}

fn run_cli(args: &[&str], out: &Path, threads: Option<&str>) -> (i32, Vec<u8>) {
    let mut cmd = cli();
    cmd.args(args)
        .arg("--output")
        .arg(out)
        .env_remove("DOEBLIN_OUT_DIR");
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n);
    }
    let status = cmd.status().expect("binary runs");
    let bytes = std::fs::read(out).unwrap_or_default();
    (status.code().unwrap_or(-1), bytes)
}

/// P_B(E, E') by summing over every joint image of E.
fn brute_force_pb(spec: &ChainSpec<Rational>, e: &[State], ep: &[State]) -> Rational {
    let states = spec.states().unwrap();
    let mut total = q(0, 1);
    let mut choice = vec![0usize; e.len()];
    loop {
        let mut image: BTreeSet<State> = choice.iter().map(|&i| states[i]).collect();
        image.insert(spec.x_star());
        if image.iter().copied().eq(ep.iter().copied()) {
            total += e.iter().zip(&choice).fold(q(1, 1), |acc, (&y, &i)| {
                acc * spec.prob(y, states[i]).unwrap()
            });
        }
        let mut k = 0;
        loop {
            if k == choice.len() {
                return total;
            }
            choice[k] += 1;
            if choice[k] < states.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn all_subsets(spec: &ChainSpec<Rational>) -> Vec<SubsetState> {
    let x = spec.x_star();
    let others: Vec<State> = spec
        .states()
        .unwrap()
        .iter()
        .copied()
        .filter(|&y| y != x)
        .collect();
    (0u32..1 << others.len())
        .map(|m| {
            let mut v: Vec<State> = others
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, &y)| y)
                .collect();
            v.push(x);
            SubsetState::new(v, x).unwrap()
        })
        .collect()
}

fn c01_exact_pi_b() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pb.json");
    let start = Instant::now();
    let (code, bytes) = run_cli(&["pb", "--spec", "builtin:uniform3"], &out, None);
    let took = start.elapsed();
    let doc: Value = serde_json::from_slice(&bytes).map_err(|e| format!("bad JSON: {e}"))?;
    let pi: Vec<&str> = doc["result"]["pi"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let states = doc["result"]["states"].clone();
    let lib = pb_stationary(&named("uniform3"), 64).unwrap();
    let ok = code == 0
        && pi == ["17/143", "45/143", "45/143", "36/143"]
        && states == serde_json::json!([[0], [0, 1], [0, 2], [0, 1, 2]])
        && lib.pi == vec![q(17, 143), q(45, 143), q(45, 143), q(36, 143)];
    check(
        ok && took < Duration::from_secs(1),
        format!("exit {code}, pi {pi:?}, {took:.2?} (limit 1s)"),
    )
}

fn c02_pb_oracle() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    for name in ["uniform3", "star", "lazy-cycle5"] {
        let spec = named(name);
        let subsets = all_subsets(&spec);
        for order in [RemovalOrder::LargestFirst, RemovalOrder::SmallestFirst] {
            let mut rec = PbRecurrence::new(&spec, order).unwrap();
            for e in subsets.iter().filter(|e| e.len() <= 3) {
                for ep in &subsets {
                    let got = rec.entry(e, ep).unwrap();
                    let want = brute_force_pb(&spec, e.members(), ep.members());
                    if got != want {
                        return Err(format!(
                            "{name}: P_B({e}, {ep}) = {got}, enumeration gives {want}"
                        ));
                    }
                    pairs += 1;
                }
            }
        }
    }
    within_time(
        start,
        Duration::from_secs(10),
        format!("{pairs} entries equal"),
    )
}

fn c03_row_sums() -> Outcome {
    let mut rows = 0;
    for name in [
        "uniform3",
        "star",
        "lazy-cycle5",
        "coin2",
        "singleton",
        "lazy-cycle3",
    ] {
        let st = pb_stationary(&named(name), 4096).unwrap();
        for (e, s) in st.matrix.states.iter().zip(st.matrix.row_sums()) {
            if s != q(1, 1) {
                return Err(format!("{name}: row {e} sums to {s}"));
            }
            rows += 1;
        }
    }
    // successor rows of subsets outside S_B as well
    let spec = named("lazy-cycle5");
    let mut rec = PbRecurrence::new(&spec, RemovalOrder::LargestFirst).unwrap();
    for e in all_subsets(&spec) {
        let total = slice_successors(&spec, &e)
            .unwrap()
            .iter()
            .fold(q(0, 1), |acc, ep| acc + rec.entry(&e, ep).unwrap());
        if total != q(1, 1) {
            return Err(format!("lazy-cycle5: row {e} sums to {total}"));
        }
        rows += 1;
    }
    Ok(format!("{rows} rows sum to exactly 1"))
}

fn c04_cftp_pi() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["uniform3", "star"] {
        let start = Instant::now();
        let r =
            empirical_pi_check(&named(name), 10_000, SEED, 1 << 16).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ok &= r.test.p_value > 0.01 && took < Duration::from_secs(30);
        details.push(format!("{name} p = {:.4} in {took:.2?}", r.test.p_value));
    }
    check(ok, details.join(", "))
}

fn c05_cftp_beta() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["uniform3", "star"] {
        let spec = named(name);
        let agree = (0..100u64)
            .filter(|&s| {
                let o = make_oracle(SEED, s);
                let x = cftp_sample(&spec, &o, 1 << 16).ok();
                let b = estimate_birecurrent(&spec, &o, (0, 0), 1 << 16, 3)
                    .ok()
                    .and_then(|e| e.at(0));
                x.is_some() && x == b
            })
            .count();
        ok &= agree == 100;
        details.push(format!("{name} {agree}/100"));
    }
    check(ok, details.join(", "))
}

fn c06_components() -> Outcome {
    let cases = [
        ("cycle2", 2),
        ("cycle3", 3),
        ("cycle5", 5),
        ("uniform3", 1),
        ("two-class", 3),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, want) in cases {
        let spec = named(name);
        let predicted = predict_components(&spec).unwrap();
        let r = estimate_graph_components(
            &spec,
            &make_oracle(SEED, 0),
            2000,
            &all_state_probes(&spec).unwrap(),
        )
        .unwrap();
        ok &= predicted == want && r.converged && r.class_count == want;
        details.push(format!("{name} {predicted}/{}", r.class_count));
    }
    let flip = named("flip");
    let r = estimate_graph_components(
        &flip,
        &make_oracle(SEED, 0),
        2000,
        &all_state_probes(&flip).unwrap(),
    )
    .unwrap();
    ok &= r.converged && r.class_count == 2;
    details.push(format!("flip {}", r.class_count));
    check(ok, details.join(", "))
}

fn c07_transports() -> Outcome {
    let start = Instant::now();
    let registry = RegistryTransport::registry();
    let refs: Vec<&dyn MassTransport> = registry.iter().map(|t| t as &dyn MassTransport).collect();
    let plan = WindowPlan::new(10_000);
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["uniform3", "lazy-cycle5"] {
        let spec = named(name);
        for e in estimate_transports(&spec, SEED, &refs, plan, 64).map_err(|e| e.to_string())? {
            let z = e.difference() / e.joint_stderr.max(f64::MIN_POSITIVE);
            let pass = e.balanced(3.0) && e.streams_used == 64;
            ok &= pass;
            if !pass || e.transport.starts_with('3') && name == "uniform3" {
                details.push(format!("{name} {} z={z:.2}", e.transport));
            }
            if name == "uniform3" && e.transport.starts_with('3') {
                let c0 = e.w_minus.mean;
                ok &= (c0 - 1.0).abs() <= 0.05;
                details.push(format!("C(0)={c0:.4}"));
            }
        }
    }
    let cycle =
        cycle_formula_estimate(&named("uniform3"), SEED, 10_000, 64).map_err(|e| e.to_string())?;
    for (y, m) in &cycle {
        ok &= (m.mean - 1.0).abs() <= 0.05;
        details.push(format!("N({y})={:.4}", m.mean));
    }
    let r = within_time(start, Duration::from_secs(120), details.join(", "));
    if ok {
        r
    } else {
        Err(r.unwrap_or_else(|e| e))
    }
}

fn c08_local_finiteness() -> Outcome {
    let m = mean_slice_size(&named("uniform3"), SEED, 10_000, 64).map_err(|e| e.to_string())?;
    let bound = 3.0 + 3.0 * m.stderr;
    check(
        m.mean <= bound,
        format!(
            "mean #B_t = {:.4} ± {:.4} (bound {bound:.4})",
            m.mean, m.stderr
        ),
    )
}

fn c09_support() -> Outcome {
    let star = enumerate_sb(&named("star"), 64).unwrap();
    let uni = enumerate_sb(&named("uniform3"), 64).unwrap();
    let want: BTreeSet<SubsetState> =
        [set(&[0]), set(&[0, 1]), set(&[0, 2]), set(&[0, 1, 2])].into();
    let got: BTreeSet<SubsetState> = uni.states.iter().cloned().collect();
    check(
        !star.states.contains(&set(&[0, 1, 2])) && got == want && uni.states.len() == 4,
        format!(
            "star {} subsets, uniform3 {} subsets",
            star.states.len(),
            uni.states.len()
        ),
    )
}

fn c10_intensity() -> Outcome {
    let h = slice_hit_times(
        &named("uniform3"),
        &make_oracle(SEED, 0),
        &[0],
        100_000,
        1000,
    )
    .map_err(|e| e.to_string())?;
    let target = 17.0 / 143.0;
    check(
        h.intensity.within(target, 3.0),
        format!(
            "{:.5} ± {:.5} vs {target:.5}",
            h.intensity.mean, h.intensity.stderr
        ),
    )
}

fn c11_lwc() -> Outcome {
    let rows = lwc_distance(&named("uniform3"), SEED, 2, &[50, 400], 32, 500)
        .map_err(|e| e.to_string())?;
    check(
        rows[1].tv < rows[0].tv,
        format!("TV(50) = {:.4}, TV(400) = {:.4}", rows[0].tv, rows[1].tv),
    )
}

fn c12_falling() -> Outcome {
    let spec = named("falling");
    let mut converged = 0;
    let mut gap_failures = 0;
    for s in 0..32u64 {
        let est = estimate_birecurrent(&spec, &make_oracle(SEED, s), (0, 100), 1 << 20, 3).unwrap();
        if est.status == BetaStatus::Converged {
            converged += 1;
        }
        let zeros: Vec<Time> = (0..=100).filter(|&t| est.at(t) == Some(0)).collect();
        let covered = (0..=50).all(|lo| zeros.iter().any(|&t| (lo..lo + 50).contains(&t)));
        if !covered {
            gap_failures += 1;
        }
    }
    let mut monotone = true;
    for s in 0..32u64 {
        let o = make_oracle(SEED, s);
        let sizes: Vec<usize> = (1..=5)
            .map(|k| {
                bridge_intersection(&spec, &o, &(0..=k).collect::<Vec<_>>(), (0, 100))
                    .unwrap()
                    .len()
            })
            .collect();
        monotone &= sizes.windows(2).all(|w| w[1] <= w[0]);
    }
    check(
        converged == 32 && gap_failures <= 1 && monotone,
        format!("converged {converged}/32, 50-step gaps without 0: {gap_failures}, intersections monotone: {monotone}"),
    )
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: &[&[&str]] = &[
        &["pb", "--spec", "builtin:uniform3"],
        &["sb", "--spec", "builtin:star", "--format", "csv"],
        &[
            "cftp",
            "--spec",
            "builtin:star",
            "--streams",
            "500",
            "--seed",
            "7",
            "--pi-check",
        ],
        &[
            "beta",
            "--spec",
            "builtin:falling",
            "--window",
            "100",
            "--seed",
            "7",
        ],
        &["components", "--spec", "builtin:two-class", "--seed", "7"],
        &[
            "mtp",
            "--spec",
            "builtin:uniform3",
            "--window",
            "2000",
            "--streams",
            "16",
            "--seed",
            "7",
        ],
        &[
            "lwc",
            "--spec",
            "builtin:uniform3",
            "--streams",
            "8",
            "--roots",
            "50",
            "--seed",
            "7",
        ],
        &[
            "bridge",
            "--spec",
            "builtin:lazy-cycle5",
            "--window",
            "50",
            "--seed",
            "7",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (k, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
            let (code, bytes) = run_cli(args, &dir.path().join(format!("{i}-{k}")), threads);
            if code != 0 || bytes.is_empty() {
                return Err(format!("{} exited {code}", args.join(" ")));
            }
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{} differs across reruns", args.join(" ")));
        }
    }
    Ok(format!(
        "{} commands byte-identical across 3 runs and worker counts",
        runs.len()
    ))
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad_row.json");
    std::fs::write(
        &bad,
        r#"{"states":[0,1],"matrix":[["1/2","1/3"],["1/2","1/2"]],"x_star":0,"noise_mode":"PerTimeState"}"#,
    )
    .unwrap();
    let (v, _) = run_cli(
        &["validate", "--spec", bad.to_str().unwrap()],
        &dir.path().join("v.json"),
        None,
    );
    let (c, bytes) = run_cli(
        &["cftp", "--spec", "builtin:cycle3", "--cap", "64"],
        &dir.path().join("c.json"),
        None,
    );
    let failure = String::from_utf8_lossy(&bytes).contains("Failure")
        || String::from_utf8_lossy(&bytes).contains("CapExceeded");
    let (u, _) = run_cli(
        &["pb", "--spec", "builtin:nope"],
        &dir.path().join("u.json"),
        None,
    );
    check(
        v == 1 && c == 2 && failure && u == 3,
        format!("validate bad row -> {v}, cftp cycle3 -> {c}, unknown builtin -> {u}"),
    )
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("1 exact pi_B", c01_exact_pi_b),
        ("2 P_B oracle equivalence", c02_pb_oracle),
        ("3 P_B row sums", c03_row_sums),
        ("4 CFTP correctness", c04_cftp_pi),
        ("5 CFTP/beta agreement", c05_cftp_beta),
        ("6 component structure", c06_components),
        ("7 mass-transport suite", c07_transports),
        ("8 local finiteness", c08_local_finiteness),
        ("9 S_B characterization", c09_support),
        ("10 slice intensity", c10_intensity),
        ("11 local weak convergence", c11_lwc),
        ("12 falling chain", c12_falling),
        ("13 determinism", c13_determinism),
        ("cli exit codes", cli_contract),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        match &outcome {
            Ok(d) => println!("PASS  {name}: {d} [{took:.2?}]"),
            Err(d) => {
                println!("FAIL  {name}: {d} [{took:.2?}]");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
