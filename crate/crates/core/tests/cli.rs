use std::process::{Command, Output};

use luce_contracts::io::LuceSpecDoc;
use luce_contracts::model::{Contract, LuceSpec};
use serde_json::Value;

fn luce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_luce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

const QUAD: &str = "power:2:2,power:2:2";

#[test]
fn two_agent_symmetric_weight() {
    let out = luce(&["two-agent", "--c1", "2", "--c2", "2", "--w", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["lambda"], 0.5);
    assert_eq!(v["profile"], serde_json::json!([0.4, 0.4]));
}

#[test]
fn two_agent_sweep_is_csv() {
    let out = luce(&["two-agent", "--c1", "2", "--c2", "2", "--sweep", "0.4:2.5:3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "w,lambda,p1,p2");
    assert_eq!(rows[1], "0.4,0,0.25,0.5");
    assert!(rows[2].starts_with("1.45,"));
    assert_eq!(rows[3], "2.5,1,0.5,0.25");
}

#[test]
fn check_reports_the_violated_subset() {
    let out = luce(&["check", "--profile", "0.5,0.05", "--costs", "power:2:2,power:4:2"]);
    assert_eq!(out.status.code(), Some(3));
    let v = &json_lines(&out)[0];
    assert_eq!(v["condition"]["holds"], false);
    assert_eq!(v["condition"]["worst_subset"], serde_json::json!([1]));
    assert!((v["condition"]["lhs"].as_f64().unwrap() - 0.9804).abs() < 1e-4);
    assert!((v["condition"]["rhs"].as_f64().unwrap() - 0.9524).abs() < 1e-4);
}

#[test]
fn check_batch_prints_one_line_per_profile() {
    let out = luce(&["check", "--profile", "0.4,0.4", "--profile", "0.5,0.25", "--costs", QUAD]);
    assert_eq!(out.status.code(), Some(0));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|v| v["maximal_candidate"] == true));
    assert_eq!(lines[1]["condition"]["tight_sets"], serde_json::json!([[1], [1, 2]]));
}

#[test]
fn synthesize_priority_profile() {
    let out = luce(&["synthesize", "--profile", "0.5,0.25", "--costs", QUAD]);
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["partition"], serde_json::json!([[1], [2]]));
    assert_eq!(v["budget"], 1.0);
    let doc: LuceSpecDoc = serde_json::from_value(serde_json::json!({
        "partition": v["partition"], "weights": v["weights"]
    }))
    .unwrap();
    assert_eq!(LuceSpec::try_from(doc).unwrap(), LuceSpec::priority(&[0, 1]).unwrap());
}

#[test]
fn exit_codes() {
    let not_luce = luce(&["synthesize", "--profile", "0.5,0.05", "--costs", "power:2:2,power:4:2"]);
    assert_eq!(not_luce.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&not_luce.stderr).contains("I = {1}"));

    for args in [
        &["check", "--profile", "0.4", "--costs", "power:0.5:2"][..],
        &["check", "--profile", "0,0.5", "--costs", QUAD],
        &["check", "--profile", "0.4,0.4", "--costs", "quadratic:2"],
        &["two-agent", "--c1", "1", "--c2", "2", "--w", "1"],
        &["synthesize", "--costs", QUAD],
        &["no-such-command"],
    ] {
        assert_eq!(luce(args).status.code(), Some(2), "{args:?}");
    }

    let dir = tempfile::tempdir().unwrap();
    let contract = dir.path().join("f.json");
    let f = LuceSpec::equal_split(2).unwrap().expand();
    std::fs::write(&contract, serde_json::to_string(&f).unwrap()).unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"costs": [{"kind": "power", "scale": 2, "exponent": 2}, {"kind": "power", "scale": 2, "exponent": 2}],
            "solver": {"max_iterations": 1, "starts": 1}}"#,
    )
    .unwrap();
    let stalled = luce(&["solve", "--contract", contract.to_str().unwrap(), "--config", config.to_str().unwrap()]);
    assert_eq!(stalled.status.code(), Some(4));
}

#[test]
fn solve_reads_a_contract_file_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let f = LuceSpec::priority(&[0, 1]).unwrap().expand();
    std::fs::write(&path, serde_json::to_string(&f).unwrap()).unwrap();
    let out = luce(&["solve", "--contract", path.to_str().unwrap(), "--costs", QUAD]);
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["equilibria"][0]["profile"], serde_json::json!([0.5, 0.25]));
    assert_eq!(v["equilibria"][0]["z"], 1.0);
    let back: Contract = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, f);
}

#[test]
fn config_file_wins_and_out_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("problem.json");
    std::fs::write(
        &config,
        r#"{"n": 2, "costs": [{"kind": "power", "scale": 2, "exponent": 2},
                              {"kind": "power", "scale": 2, "exponent": 2}],
            "budget": 1, "objective": {"kind": "linear", "weights": [3, 1]}}"#,
    )
    .unwrap();
    let out_path = dir.path().join("result.json");
    let out = luce(&[
        "optimize",
        "--config",
        config.to_str().unwrap(),
        "--objective",
        "1,1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("using the config file"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["partition"], serde_json::json!([[1], [2]]));
    assert_eq!(v["value"], 1.75);
}

#[test]
fn config_rejects_inadmissible_costs_and_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"costs": [{"kind": "power", "scale": 2, "exponent": 2}], "budget": 3}"#).unwrap();
    let out = luce(&["check", "--config", bad.to_str().unwrap(), "--profile", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    let typo = dir.path().join("typo.json");
    std::fs::write(&typo, r#"{"cost": []}"#).unwrap();
    assert_eq!(luce(&["check", "--config", typo.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let args = ["payments", "--profile", "0.3,0.45", "--costs", "power:2:2,power:3:2.5", "--samples", "25", "--seed", "7"];
    let a = luce(&args);
    let b = luce(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = &json_lines(&a)[0];
    assert_eq!(v["samples"]["all_pass"], true);
    assert_eq!(v["piece_rate"]["verdict"]["sosd"], true);

    let f1 = luce(&["frontier", "--grid", "20", "--samples", "10", "--costs", QUAD, "--threads", "2"]);
    let f2 = luce(&["frontier", "--grid", "20", "--samples", "10", "--costs", QUAD, "--threads", "3"]);
    assert_eq!(f1.stdout, f2.stdout);
    let text = String::from_utf8(f1.stdout).unwrap();
    assert!(text.starts_with("param1,p1,p2,z\n0,0.25,0.5,1\n"));
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn payments_csv_table() {
    let out = luce(&["payments", "--csv", "--profile", "0.4,0.4", "--costs", QUAD]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "contract,value,probability\nluce,0,0.36\nluce,1,0.64\npiece_rate,0,0.36\npiece_rate,0.8,0.48\n\
         piece_rate,1.6,0.16\nbonus_pool,0,0.84\nbonus_pool,4,0.16\n"
    );
}

#[test]
fn floats_have_twelve_significant_digits() {
    let out = luce(&["two-agent", "--c1", "3", "--c2", "2", "--w", "1"]);
    let v = &json_lines(&out)[0];
    for x in v["profile"].as_array().unwrap() {
        let text = x.to_string();
        let digits = text.trim_start_matches("0.").trim_start_matches('0').len();
        assert!(digits <= 12, "{text}");
    }
}
