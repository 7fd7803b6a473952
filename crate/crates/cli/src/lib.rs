//! Command-line front end: parses a chain spec, dispatches one experiment
//! and writes a JSON or CSV result stamped with seed, spec hash and version.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use doeblin_core::bridge::{build_slab, estimate_birecurrent, slab_components, BetaStatus};
use doeblin_core::cftp::{empirical_pi_check, run_cftp};
use doeblin_core::doeblin::{estimate_graph_components, predict_components, state_path};
use doeblin_core::driver::{builtin::builtin, make_oracle, validate_spec, SpecFile};
use doeblin_core::mtp::{
    cycle_formula_estimate, estimate_transports, lwc_distance, MassTransport, RegistryTransport,
    WindowPlan,
};
use doeblin_core::renewal::{enumerate_sb, pb_stationary};
use doeblin_core::{Capped, Error, ExactChain, State, Time};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DOEBLIN_OUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_SPEC: i32 = 1;
    pub const FAILURE: i32 = 2;
    pub const USAGE: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(
    name = "doeblin",
    version,
    about = "Doeblin-graph, bridge-graph and CFTP experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Chain spec: a JSON file path or `builtin:NAME`.
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub streams: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub radius: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; defaults to `$DOEBLIN_OUT_DIR/<command>.<ext>`, else stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check row sums, x* recurrence and the class structure.
    Validate(RunConfig),
    /// State paths from (0, x*).
    Simulate(RunConfig),
    /// A bridge-graph window [0, window] with spine and components.
    Bridge(RunConfig),
    /// Bi-recurrent path estimate on [0, window].
    Beta(RunConfig),
    /// Coupling from the past, one sample per stream.
    Cftp {
        #[command(flatten)]
        config: RunConfig,
        /// Also test the samples against the exact stationary law.
        #[arg(long)]
        pi_check: bool,
    },
    /// Exact slice-chain transition matrix and stationary law.
    Pb(RunConfig),
    /// Support of the slice chain.
    Sb(RunConfig),
    /// Mass-transport balance for the registry transports.
    Mtp {
        #[command(flatten)]
        config: RunConfig,
        /// Transport ids (1-6 or zero); all six when omitted.
        #[arg(long, value_delimiter = ',')]
        transport: Vec<String>,
    },
    /// Total variation between windowed and size-biased ball laws.
    Lwc {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_delimiter = ',', default_values_t = [50u64, 400])]
        n: Vec<u64>,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        roots: u64,
    },
    /// Predicted and probe-estimated component counts.
    Components(RunConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Simulate(_) => "simulate",
            Command::Bridge(_) => "bridge",
            Command::Beta(_) => "beta",
            Command::Cftp { .. } => "cftp",
            Command::Pb(_) => "pb",
            Command::Sb(_) => "sb",
            Command::Mtp { .. } => "mtp",
            Command::Lwc { .. } => "lwc",
            Command::Components(_) => "components",
        }
    }

    pub fn config(&self) -> &RunConfig {
        match self {
            Command::Validate(c)
            | Command::Simulate(c)
            | Command::Bridge(c)
            | Command::Beta(c)
            | Command::Pb(c)
            | Command::Sb(c)
            | Command::Components(c) => c,
            Command::Cftp { config, .. }
            | Command::Mtp { config, .. }
            | Command::Lwc { config, .. } => config,
        }
    }
}

/// Structured result of one command before serialization.
struct Outcome {
    result: Value,
    /// CSV header and rows.
    table: (Vec<String>, Vec<Vec<String>>),
    exit: i32,
}

impl Outcome {
    fn ok(result: Value, table: (Vec<String>, Vec<Vec<String>>)) -> Self {
        Outcome {
            result,
            table,
            exit: exit::OK,
        }
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) => exit::INVALID_SPEC,
        Error::CouplingFailed { .. }
        | Error::Partial(_)
        | Error::Singular(_)
        | Error::NotReady(_)
        | Error::Censored(_) => exit::FAILURE,
        Error::Usage(_)
        | Error::Parse(_)
        | Error::InvalidState(_)
        | Error::ModeMismatch(_)
        | Error::NotApplicable(_) => exit::USAGE,
    }
}

/// Loads `builtin:NAME` or a JSON spec file.
pub fn load_spec(arg: &str) -> Result<ExactChain, Error> {
    match arg.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => {
            let text = std::fs::read_to_string(arg)
                .map_err(|e| Error::Usage(format!("cannot read {arg}: {e}")))?;
            SpecFile::from_json(&text)?.to_spec()
        }
    }
}

/// SHA-256 of the compact JSON form of the spec.
pub fn spec_hash(spec: &ExactChain) -> String {
    let canonical = serde_json::to_string(&SpecFile::from_spec(spec)).expect("spec serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let command = cli.command;
    let config = command.config().clone();
    let spec = match load_spec(&config.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let report = validate_spec(&spec);
    let is_validate = matches!(command, Command::Validate(_));
    if !report.valid && !is_validate {
        eprintln!("error: spec is invalid: {}", report.issues.join("; "));
        return exit::INVALID_SPEC;
    }

    let outcome = match dispatch(&command, &spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };

    let meta = json!({
        "tool": "doeblin",
        "version": TOOL_VERSION,
        "command": command.name(),
        "spec": spec.name(),
        "spec_hash": spec_hash(&spec),
        "seed": config.seed,
    });
    let bytes = match config.format {
        Format::Json => {
            let doc = json!({"meta": meta, "result": outcome.result});
            let mut s = serde_json::to_string_pretty(&doc).expect("result serializes");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => match render_csv(&meta, &outcome.table) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {e}");
                return exit::USAGE;
            }
        },
    };

    let target = config.output.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|d| {
            PathBuf::from(d).join(format!("{}.{}", command.name(), config.format.extension()))
        })
    });
    let written = match &target {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return exit::USAGE;
    }
    outcome.exit
}

fn render_csv(
    meta: &Value,
    (cols, rows): &(Vec<String>, Vec<Vec<String>>),
) -> Result<Vec<u8>, String> {
    let mut out = String::new();
    let m = meta.as_object().unwrap();
    let stamp: Vec<String> = m
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect();
    writeln!(out, "# {}", stamp.join(" ")).unwrap();
    let mut w = csv::Writer::from_writer(out.into_bytes());
    w.write_record(cols).map_err(|e| e.to_string())?;
    for r in rows {
        w.write_record(r).map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

fn dispatch(command: &Command, spec: &ExactChain) -> Result<Outcome, Error> {
    let c = command.config();
    match command {
        Command::Validate(_) => {
            let r = validate_spec(spec);
            let rows = r
                .row_sum_violations
                .iter()
                .map(|v| vec![v.row.to_string(), v.state.to_string(), v.sum.clone()])
                .collect();
            let exit = if r.valid {
                exit::OK
            } else {
                exit::INVALID_SPEC
            };
            if !r.valid {
                for issue in &r.issues {
                    eprintln!("invalid: {issue}");
                }
            }
            Ok(Outcome {
                result: serde_json::to_value(&r).unwrap(),
                table: (header(&["row", "state", "sum"]), rows),
                exit,
            })
        }
        Command::Simulate(_) => {
            let horizon = c.window.unwrap_or(100);
            let streams = c.streams.unwrap_or(1);
            let mut paths = Vec::new();
            let mut rows = Vec::new();
            for s in 0..streams {
                let o = make_oracle(c.seed, s);
                let p = state_path(spec, &o, 0, spec.x_star(), horizon)?;
                for (k, y) in p.states.iter().enumerate() {
                    rows.push(vec![s.to_string(), k.to_string(), y.to_string()]);
                }
                paths.push(json!({"stream": s, "path": p}));
            }
            Ok(Outcome::ok(
                json!({"paths": paths}),
                (header(&["stream", "t", "state"]), rows),
            ))
        }
        Command::Bridge(_) => {
            let window = c.window.unwrap_or(100) as Time;
            let o = make_oracle(c.seed, 0);
            let slab = build_slab(spec, &o, (0, window), true)?;
            let comps = slab_components(&slab);
            let mut doc = slab.to_json(None);
            doc["component_count"] = json!(comps.count);
            let rows = slab
                .slices()
                .map(|(t, s)| {
                    let states: Vec<String> = s.iter().map(|y| y.to_string()).collect();
                    vec![t.to_string(), s.len().to_string(), states.join(";")]
                })
                .collect();
            Ok(Outcome::ok(doc, (header(&["t", "size", "states"]), rows)))
        }
        Command::Beta(_) => {
            let window = c.window.unwrap_or(100) as Time;
            let o = make_oracle(c.seed, 0);
            let est = estimate_birecurrent(spec, &o, (0, window), c.cap.unwrap_or(1 << 20), 3)?;
            let rows = (0..=window)
                .map(|t| {
                    let k = t as usize;
                    vec![
                        t.to_string(),
                        est.beta[k].map(|y| y.to_string()).unwrap_or_default(),
                        est.stabilization_depth[k]
                            .map(|d| d.to_string())
                            .unwrap_or_default(),
                    ]
                })
                .collect();
            let exit = if est.status == BetaStatus::Failed {
                exit::FAILURE
            } else {
                exit::OK
            };
            Ok(Outcome {
                result: serde_json::to_value(&est).unwrap(),
                table: (header(&["t", "beta", "stabilization_depth"]), rows),
                exit,
            })
        }
        Command::Cftp { pi_check, .. } => {
            let cap = c.cap.unwrap_or(1 << 16);
            let streams = c.streams.unwrap_or(1);
            let mut results = Vec::new();
            let mut rows = Vec::new();
            let mut failed = 0u64;
            for s in 0..streams {
                let r = run_cftp(spec, &make_oracle(c.seed, s), cap)?;
                if r.sample.is_none() {
                    failed += 1;
                }
                let tau = match r.tau {
                    Capped::Within(t) => t.to_string(),
                    Capped::CapExceeded => "CapExceeded".into(),
                };
                rows.push(vec![
                    s.to_string(),
                    tau,
                    r.sample
                        .map(|y| y.to_string())
                        .unwrap_or_else(|| "Failure".into()),
                ]);
                results.push(json!({"stream": s, "result": r}));
            }
            let mut doc = json!({"cap": cap, "failures": failed, "samples": results});
            if *pi_check {
                doc["pi_check"] =
                    serde_json::to_value(empirical_pi_check(spec, streams, c.seed, cap)?).unwrap();
            }
            let exit = if failed > 0 { exit::FAILURE } else { exit::OK };
            Ok(Outcome {
                result: doc,
                table: (header(&["stream", "tau", "sample"]), rows),
                exit,
            })
        }
        Command::Pb(_) => {
            let cap = c.cap.unwrap_or(4096) as usize;
            let st = pb_stationary(spec, cap)?;
            let rows = st
                .matrix
                .states
                .iter()
                .zip(&st.pi)
                .map(|(e, p)| vec![e.to_string(), p.to_string()])
                .collect();
            Ok(Outcome::ok(st.to_json(), (header(&["subset", "pi"]), rows)))
        }
        Command::Sb(_) => {
            let cap = c.cap.unwrap_or(4096) as usize;
            let sb = enumerate_sb(spec, cap)?;
            let rows = sb.states.iter().map(|e| vec![e.to_string()]).collect();
            let exit = if sb.complete { exit::OK } else { exit::FAILURE };
            Ok(Outcome {
                result: serde_json::to_value(&sb).unwrap(),
                table: (header(&["subset"]), rows),
                exit,
            })
        }
        Command::Mtp { transport, .. } => {
            let chosen: Vec<RegistryTransport> = if transport.is_empty() {
                RegistryTransport::registry().to_vec()
            } else {
                transport
                    .iter()
                    .map(|s| RegistryTransport::parse(s))
                    .collect::<Result<_, _>>()?
            };
            let refs: Vec<&dyn MassTransport> =
                chosen.iter().map(|t| t as &dyn MassTransport).collect();
            let window = c.window.unwrap_or(10_000);
            let streams = c.streams.unwrap_or(64);
            let est = estimate_transports(spec, c.seed, &refs, WindowPlan::new(window), streams)?;
            let rows = est
                .iter()
                .map(|e| {
                    vec![
                        spec.name().to_string(),
                        e.transport.clone(),
                        fmt_f64(e.w_plus.mean),
                        fmt_f64(e.w_minus.mean),
                        fmt_f64(e.joint_stderr),
                        if e.balanced(3.0) { "pass" } else { "fail" }.to_string(),
                    ]
                })
                .collect();
            let mut doc = json!({"window": window, "streams": streams, "transports": est});
            if spec.is_finite() {
                let cycle = cycle_formula_estimate(spec, c.seed, window, streams)?;
                doc["cycle_formula"] = json!(cycle
                    .iter()
                    .map(|(y, m)| json!({"state": y, "estimate": m}))
                    .collect::<Vec<_>>());
            }
            Ok(Outcome::ok(
                doc,
                (
                    header(&[
                        "spec",
                        "transport_id",
                        "estimate+",
                        "estimate-",
                        "stderr",
                        "pass",
                    ]),
                    rows,
                ),
            ))
        }
        Command::Lwc { n, roots, .. } => {
            let radius = c.radius.unwrap_or(2);
            let streams = c.streams.unwrap_or(32);
            let table = lwc_distance(spec, c.seed, radius, n, streams, *roots)?;
            let rows = table
                .iter()
                .map(|r| {
                    vec![
                        spec.name().to_string(),
                        r.n.to_string(),
                        fmt_f64(r.tv),
                        r.samples.to_string(),
                        fmt_f64(r.censored_fraction),
                    ]
                })
                .collect();
            Ok(Outcome::ok(
                json!({"radius": radius, "streams": streams, "rows": table}),
                (
                    header(&["spec", "n", "tv", "samples", "censored_fraction"]),
                    rows,
                ),
            ))
        }
        Command::Components(_) => {
            let window = c.window.unwrap_or(1000);
            let probes: Vec<(Time, State)> = match spec.states() {
                Some(states) => states.iter().map(|&x| (0, x)).collect(),
                None => vec![(0, spec.x_star())],
            };
            let o = make_oracle(c.seed, 0);
            let r = estimate_graph_components(spec, &o, window, &probes)?;
            let predicted = predict_components(spec).ok();
            let rows = vec![vec![
                spec.name().to_string(),
                predicted.map(|p| p.to_string()).unwrap_or_default(),
                r.class_count.to_string(),
                r.converged.to_string(),
            ]];
            Ok(Outcome::ok(
                json!({
                    "predicted_count": predicted,
                    "class_count": r.class_count,
                    "converged": r.converged,
                    "observed_classes": r.observed_classes,
                }),
                (
                    header(&["spec", "predicted", "observed", "converged"]),
                    rows,
                ),
            ))
        }
    }
}
