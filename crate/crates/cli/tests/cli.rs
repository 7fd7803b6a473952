use std::process::{Command, Output};

use serde_json::Value;

fn doeblin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doeblin"))
        .args(args)
        .env_remove("DOEBLIN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn meta_block_is_stamped() {
    let out = doeblin(&["sb", "--spec", "builtin:uniform3", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    let meta = &doc["meta"];
    assert_eq!(meta["tool"], "doeblin");
    assert_eq!(meta["command"], "sb");
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["spec_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["result"]["states"].as_array().unwrap().len(), 4);
}

#[test]
fn spec_files_hash_like_their_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uniform3.json");
    std::fs::write(
        &path,
        r#"{"name":"uniform3","states":[0,1,2],
            "matrix":[["1/3","1/3","1/3"],["1/3","1/3","1/3"],["1/3","1/3","1/3"]],
            "x_star":0,"noise_mode":"PerTimeState"}"#,
    )
    .unwrap();
    let a = json_stdout(&doeblin(&["pb", "--spec", path.to_str().unwrap()]));
    let b = json_stdout(&doeblin(&["pb", "--spec", "builtin:uniform3"]));
    assert_eq!(a["meta"]["spec_hash"], b["meta"]["spec_hash"]);
    assert_eq!(a["result"], b["result"]);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_doeblin"))
        .args(["pb", "--spec", "builtin:star", "--format", "csv"])
        .env("DOEBLIN_OUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("pb.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# command=pb "));
    assert_eq!(lines.next(), Some("subset,pi"));
    assert_eq!(lines.next(), Some("{0},1/3"));
}

#[test]
fn usage_errors_exit_3() {
    for args in [
        &["mtp", "--spec", "builtin:uniform3", "--streams", "0"][..],
        &["lwc", "--spec", "builtin:uniform3", "--radius", "0"],
        &["pb", "--spec", "builtin:uniform3", "--format", "xml"],
        &["pb", "--spec", "builtin:uniform3", "--colour"],
        &["frobnicate"],
        &["mtp", "--spec", "builtin:uniform3", "--transport", "9"],
        &["pb", "--spec", "builtin:flip"],
    ] {
        assert_eq!(doeblin(args).status.code(), Some(3), "{args:?}");
    }
}

#[test]
fn invalid_spec_exits_1_for_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"states":[0,1],"matrix":[["1/2","1/2"],["2/3","1/2"]],"x_star":0,"noise_mode":"PerTimeState"}"#,
    )
    .unwrap();
    for cmd in ["validate", "pb", "cftp", "simulate"] {
        let out = doeblin(&[cmd, "--spec", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
    }
    let out = doeblin(&["validate", "--spec", path.to_str().unwrap()]);
    let doc = json_stdout(&out);
    assert_eq!(doc["result"]["row_sum_violations"][0]["row"], 1);
}

#[test]
fn cycle_cftp_reports_failure() {
    let out = doeblin(&[
        "cftp",
        "--spec",
        "builtin:cycle3",
        "--cap",
        "64",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "0,CapExceeded,Failure"), "{text}");
}

#[test]
fn simulate_follows_the_cycle() {
    let doc = json_stdout(&doeblin(&[
        "simulate",
        "--spec",
        "builtin:cycle3",
        "--window",
        "4",
    ]));
    assert_eq!(
        doc["result"]["paths"][0]["path"]["states"],
        serde_json::json!([0, 1, 2, 0, 1])
    );
}

#[test]
fn components_and_mtp_run() {
    let doc = json_stdout(&doeblin(&["components", "--spec", "builtin:cycle5"]));
    assert_eq!(doc["result"]["predicted_count"], 5);
    assert_eq!(doc["result"]["class_count"], 5);
    let out = doeblin(&[
        "mtp",
        "--spec",
        "builtin:uniform3",
        "--window",
        "500",
        "--streams",
        "4",
        "--transport",
        "1,3",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("spec,transport_id,estimate+,estimate-,stderr,pass"));
    assert_eq!(text.lines().count(), 4);
}
