use std::path::PathBuf;
use std::process::Command;

use netlingua_core::fixtures;
use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn netlingua(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_netlingua")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn p(path: &std::path::Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let clos = fixture("clos");
    let (code, out, _) = netlingua(&["validate", p(&fixture("changesets/exemplar-s0.py")), p(&clos)]);
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = netlingua(&["validate", p(&fixture("changesets/connect-ethernet4.py")), p(&clos)]);
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = netlingua(&["validate", p(&fixture("changesets/connect-ethernet4-faulty.py")), p(&clos)]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 4);
    assert!(out.contains("Must condition (current() = ../../INTERFACE_LIST[name=current()]/name) not satisfied"));
}

#[test]
fn validate_reports_unparseable_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.py");
    std::fs::write(&f, "[{'device': 'S0', 'config': [").unwrap();
    let (code, out, _) = netlingua(&["validate", p(&f)]);
    assert_eq!(code, 1);
    assert!(out.starts_with("syntax error"));
}

#[test]
fn empty_change_set_only_bumps_the_revision() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let before = dir.path().join("before.json");
    let schema = fixtures::schema();
    std::fs::write(&before, fixtures::clos_state().to_snapshot_json(&schema)).unwrap();
    let after = dir.path().join("after.json");
    let (code, _, err) = netlingua(&["apply", p(&empty), p(&before), "--out", p(&after)]);
    assert_eq!(code, 0, "{err}");
    let mut a: Value = serde_json::from_str(&std::fs::read_to_string(&before).unwrap()).unwrap();
    let mut b: Value = serde_json::from_str(&std::fs::read_to_string(&after).unwrap()).unwrap();
    assert_eq!(b["revision"].as_u64(), a["revision"].as_u64().map(|r| r + 1));
    a.as_object_mut().unwrap().remove("revision");
    b.as_object_mut().unwrap().remove("revision");
    assert_eq!(a, b);
}

#[test]
fn apply_prints_the_new_snapshot() {
    let (code, out, _) = netlingua(&["apply", p(&fixture("changesets/connect-ethernet4.py"))]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["revision"], 1);
    let (code, _, err) = netlingua(&["apply", p(&fixture("changesets/connect-ethernet4-faulty.py")), "--state-dir", "/nonexistent"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(netlingua(&["frobnicate"]).0, 2);
    assert_eq!(netlingua(&["validate"]).0, 2);
    assert_eq!(netlingua(&["retrieve", "x", "--store", "nowhere"]).0, 2);
    let (code, out, _) = netlingua(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("validate"));
}

#[test]
fn replay_of_the_recorded_walkthrough_matches() {
    let (code, out, _) = netlingua(&["replay", p(&fixture("transcripts/connect-ethernet4.jsonl"))]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.trim(), "replay matches: 17 turns");
}

#[test]
fn replay_detects_a_tampered_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.jsonl");
    let tampered: String = fixtures::WALKTHROUGH_TRANSCRIPT
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if v["action"] == "Deploy" {
                v["payload"]["revision"] = 7.into();
            }
            v.to_string() + "\n"
        })
        .collect();
    std::fs::write(&f, tampered).unwrap();
    let (code, out, _) = netlingua(&["replay", p(&f)]);
    assert_eq!(code, 1);
    assert!(out.contains("turn 16"));
}

#[test]
fn retrieve_lists_ranked_hits() {
    let (code, out, _) = netlingua(&["retrieve", "Ethernet4 speed and MTU", "-k", "4"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.contains("state/nl/")));
    let (code, out, _) = netlingua(&["retrieve", "must condition on interface prefixes", "--store", "ir-doc", "-k", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn eval_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    let valid = fixtures::walkthrough().script.calls[3].output.clone();
    std::fs::write(&script, serde_json::json!({"calls": [{"output": valid}], "on_exhausted": "repeat-last"}).to_string()).unwrap();
    let data = dir.path().join("requests.jsonl");
    std::fs::write(&data, format!("{}\n", serde_json::json!({"request": fixtures::CONNECT_ETHERNET4_QUERY, "devices": ["S0", "S1", "L0", "L1"]}))).unwrap();
    let spec = dir.path().join("run.toml");
    std::fs::write(
        &spec,
        "dataset = \"requests.jsonl\"\ntrials = 1\nvariants = [\"verifier-only\"]\n[backend]\nkind = \"mock\"\nscript = \"script.json\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, err) = netlingua(&["eval", "--spec", p(&spec), "--out", p(&out_dir), "--format", "csv"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("| Configuration |"));
    assert_eq!(out.lines().filter(|l| l.starts_with('|')).count(), 3);
    assert!(out_dir.join("trials.csv").is_file());
    assert!(!out_dir.join("report.json").exists());
}
