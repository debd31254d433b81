mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::*;
use contract_ledger::ledger::{LedgerState, SafetyLevel};
use contract_ledger::model::Transfer;
use contract_ledger::query::cli::{contracts_dir, load_ledger, load_registry, run_command};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cledger").chain(args.iter().copied());
    let code = run_command(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    let r = cli(&a);
    (r.code, serde_json::from_str(r.out.trim()).unwrap())
}

struct Fixture {
    _dir: TempDir,
    ledger: PathBuf,
}

impl Fixture {
    fn path(&self) -> &str {
        self.ledger.to_str().unwrap()
    }
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn append(ledger: &str, cid: &str, t: &Transfer, i: usize, extra: &[&str]) -> Run {
    let ts = format!("2024-01-01T00:00:{:02}Z", i);
    let (r, from, to) = (t.resource.to_string(), t.from.to_string(), t.to.to_string());
    let mut args = vec![
        "ledger",
        "append",
        ledger,
        "--contract",
        cid,
        "--resource",
        &r,
        "--from",
        &from,
        "--to",
        &to,
        "--validator",
        "v1",
        "--timestamp",
        &ts,
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

fn fixture(cid: &str, spec: &str, ts: &[Transfer]) -> Fixture {
    let dir = TempDir::new().unwrap();
    let ledger = dir.path().join("f.ldg");
    let p = ledger.to_str().unwrap().to_string();
    assert_eq!(cli(&["ledger", "init", &p]).code, 0);
    let spec_path = write_spec(dir.path(), "spec.json", spec);
    assert_eq!(cli(&["contract", "add", &p, &spec_path]).code, 0);
    for (i, t) in ts.iter().enumerate() {
        let r = append(&p, cid, t, i, &[]);
        assert_eq!(r.code, 0, "{} {}", r.out, r.err);
    }
    Fixture { _dir: dir, ledger }
}

fn honoured() -> Fixture {
    fixture("Cd", INSURANCE_JSON, &honoured_run())
}

#[test]
fn appended_file_matches_the_library() {
    let f = honoured();
    let (reg, l) = insurance_ledger(&honoured_run());
    let on_disk = load_ledger(&f.ledger).unwrap();
    assert_eq!(on_disk.transfers(), l.transfers());
    assert_eq!(on_disk.verify_chain(), contract_ledger::ledger::ChainVerdict::Ok);
    let loaded = load_registry(&f.ledger).unwrap();
    assert_eq!(loaded.get("Cd"), reg.get("Cd"));
    assert!(contracts_dir(&f.ledger).join("Cd.json").exists());
}

#[test]
fn check_reports_contract_safety() {
    let f = honoured();
    let r = cli(&[
        "ledger",
        "check",
        f.path(),
        "--contract",
        "Cd",
        "--property",
        "contract",
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(r.out.trim(), "contract-safe");
    let r = cli(&[
        "ledger",
        "check",
        f.path(),
        "--contract",
        "Cd",
        "--property",
        "resource",
        "--resource",
        "claim",
    ]);
    assert_eq!((r.code, r.out.trim()), (0, "claim-safe"));
    assert_eq!(
        cli(&[
            "ledger",
            "check",
            f.path(),
            "--contract",
            "Cd",
            "--property",
            "resource"
        ])
        .code,
        2
    );
}

#[test]
fn check_verdicts_match_library_calls() {
    let mut trace = honoured_run()[..3].to_vec();
    trace.push(t("offer", "TOP", "customer"));
    let f = fixture("Cd", INSURANCE_JSON, &trace);
    let (reg, l) = insurance_ledger(&trace);
    let c = reg.get("Cd").unwrap();
    for (prop, level) in [
        ("wallet", SafetyLevel::Wallet),
        ("bundle", SafetyLevel::Bundle),
        ("contract", SafetyLevel::Contract),
    ] {
        let (code, v) = json(&["ledger", "check", f.path(), "--contract", "Cd", "--property", prop]);
        let safe = l.check_safety(c, &level).is_safe();
        assert_eq!(code == 0, safe, "{prop}");
        assert_eq!(
            v["verdict"],
            if safe {
                level.to_string()
            } else {
                format!("not {level}")
            }
        );
    }
}

#[test]
fn tampered_file_fails_verification_at_the_right_index() {
    let f = honoured();
    assert_eq!(cli(&["ledger", "verify", f.path()]).out.trim(), "chain ok");
    let text = fs::read_to_string(&f.ledger).unwrap();
    // Record 1 changes; record 2 still points at its old digest.
    let tampered = text.replacen("\"resource\":\"damageDoc\"", "\"resource\":\"damageDox\"", 1);
    assert_ne!(tampered, text);
    fs::write(&f.ledger, tampered).unwrap();
    let r = cli(&["ledger", "verify", f.path()]);
    assert_eq!(r.code, 1);
    assert_eq!(r.out.lines().next().unwrap(), "chain broken at index 2");
    // Appending to a broken chain is refused.
    let r = append(f.path(), "Cd", &t("offer", "TOP", "customer"), 9, &[]);
    assert_eq!(r.code, 1);
}

#[test]
fn strict_append_rejects_and_permissive_records() {
    let f = fixture("Cd", INSURANCE_JSON, &honoured_run()[..2]);
    let bad = t("damageDoc", "TOP", "insurer");
    let r = append(f.path(), "Cd", &bad, 2, &[]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("damageDoc"), "{}", r.out);
    assert_eq!(load_ledger(&f.ledger).unwrap().len(), 2);
    assert_eq!(append(f.path(), "Cd", &bad, 2, &["--permissive"]).code, 0);
    assert_eq!(load_ledger(&f.ledger).unwrap().len(), 3);
    let r = cli(&["ledger", "check", f.path(), "--contract", "Cd", "--property", "wallet"]);
    assert_eq!(r.code, 1);
    assert!(r.out.starts_with("not wallet-safe"));
    assert_eq!(append(f.path(), "Nope", &bad, 3, &[]).code, 2);
}

#[test]
fn future_query_on_a_three_record_prefix() {
    let f = fixture("Cd", INSURANCE_JSON, &honoured_run()[..3]);
    let r = cli(&["query", "eval", f.path(), "--at", "3", "--horizon", "6", "EXF bc(Cd)"]);
    assert_eq!(r.code, 0, "{} {}", r.out, r.err);
    assert_eq!(r.out.lines().next(), Some("true"));
}

#[test]
fn json_reports_have_the_fixed_schema() {
    let f = fixture("Cd", INSURANCE_JSON, &honoured_run()[..2]);
    let (code, v) = json(&[
        "query",
        "eval",
        f.path(),
        "--horizon",
        "2",
        "EXF app((offer,TOP,customer))",
    ]);
    assert_eq!(code, 1);
    let obj = v.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["command", "truncated_at_horizon", "verdict", "witnesses"]);
    assert_eq!(v["command"], "query eval");
    assert_eq!(v["verdict"], "false");
    assert_eq!(v["truncated_at_horizon"], true);
    assert!(v["witnesses"].is_array());
}

#[test]
fn json_output_is_deterministic() {
    let f = honoured();
    let args = ["--json", "contract", "state", f.path(), "--contract", "Cd", "--at", "8"];
    let first = cli(&args).out;
    assert_eq!(cli(&args).out, first);
    let v: Value = serde_json::from_str(first.trim()).unwrap();
    assert_eq!(v["verdict"], "Accepted");
}

#[test]
fn contract_state_reports_outcome() {
    let f = honoured();
    let (code, v) = json(&["contract", "state", f.path(), "--contract", "Cd"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "Refunded");
    let w: Vec<&str> = v["witnesses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert_eq!(w, ["legal: Refunded", "exec: Refunded", "outcome: Refunded HON"]);
}

#[test]
fn hypothetical_command() {
    let f = fixture("Cd", INSURANCE_JSON, &rejected_run());
    let r = cli(&["query", "hypothetical", f.path(), "app((refund,TOP,customer))"]);
    assert_eq!(r.code, 0, "{}", r.out);
    let r = cli(&["query", "hypothetical", f.path(), "@at 2 true"]);
    assert_eq!(r.code, 2);
}

#[test]
fn audit_lists_pairs() {
    let f = fixture("Ld", LAUNDERING_JSON, &laundering_trace());
    let (code, v) = json(&[
        "audit",
        "pattern",
        f.path(),
        "--first",
        "(m,bob,alice)",
        "--then",
        "(m,alice,george)",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "2 occurrences");
    assert_eq!(v["witnesses"], serde_json::json!(["(0,2)", "(5,6)", "repeated"]));
    let (code, v) = json(&[
        "audit",
        "pattern",
        f.path(),
        "--first",
        "(n,alice,george)",
        "--then",
        "(m,bob,alice)",
    ]);
    assert_eq!((code, v["verdict"].as_str()), (0, Some("1 occurrence")));
    let (code, _) = json(&[
        "audit",
        "pattern",
        f.path(),
        "--first",
        "(m,alice,george)",
        "--then",
        "(n,TOP,alice)",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn usage_and_io_errors_exit_with_two() {
    assert_eq!(cli(&[]).code, 2);
    assert_eq!(cli(&["ledger", "frobnicate"]).code, 2);
    assert_eq!(cli(&["ledger", "verify", "/nonexistent/x.ldg"]).code, 2);
    let f = honoured();
    assert_eq!(cli(&["ledger", "init", f.path()]).code, 2);
    assert_eq!(cli(&["query", "eval", f.path(), "chi("]).code, 2);
    assert_eq!(cli(&["query", "eval", f.path(), "app((gold,TOP,x))"]).code, 2);
    let r = cli(&["--json", "query", "eval", f.path(), "chi("]);
    let v: Value = serde_json::from_str(r.out.trim()).unwrap();
    assert_eq!(v["verdict"], "error");
    let r = cli(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("ledger"));
    assert!(r.err.is_empty());
}

#[test]
fn bad_spec_is_rejected() {
    let dir = TempDir::new().unwrap();
    let ledger = dir.path().join("g.ldg");
    let p = ledger.to_str().unwrap();
    cli(&["ledger", "init", p]);
    let spec = write_spec(
        dir.path(),
        "bad.json",
        &INSURANCE_JSON.replace("\"initial\": \"In\"", "\"initial\": \"Nowhere\""),
    );
    assert_eq!(cli(&["contract", "add", p, &spec]).code, 2);
    assert!(load_registry(&ledger).unwrap().is_empty());
    assert!(LedgerState::from_text(&fs::read_to_string(&ledger).unwrap())
        .unwrap()
        .is_empty());
}

#[test]
fn binary_exit_codes_follow_the_verdict() {
    let f = honoured();
    let run = |args: &[&str]| {
        std::process::Command::new(env!("CARGO_BIN_EXE_cledger"))
            .args(args)
            .output()
            .unwrap()
    };
    let ok = run(&["query", "eval", f.path(), "chi(9)"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).lines().next(), Some("true"));
    assert_eq!(run(&["query", "eval", f.path(), "chi(8)"]).status.code(), Some(1));
    assert_eq!(run(&["query", "eval"]).status.code(), Some(2));
}
