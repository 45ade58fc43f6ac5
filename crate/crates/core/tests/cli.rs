//! End-to-end runs of the installed binary: goldens for the human tables,
//! document round-trips for the JSON ones, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dauction::cli::RunDoc;
use dauction::format::{witness_from_doc, VerdictDoc};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dauction"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn vcg_runs_the_two_link_chain_underwater() {
    let path = fixture("e1.json");
    let table = stdout_of(&["run", "--mechanism", "vcg", "--instance", path.to_str().unwrap()]);
    assert_eq!(table, "a  0  -1  1\nb  1  0  1 *\nrevenue = -1\n");
}

#[test]
fn explain_marks_the_leading_agent() {
    let path = fixture("w.json");
    let table = stdout_of(&["explain", "--instance", path.to_str().unwrap()]);
    let expected = "\
agent  dist  bid  rwd  prwd  notes
j1  1  4  100  4  critical interruption LEADING
a  2  20  93  13  critical interruption
x  2  7  0  0
j2  3  100  80  80  critical interruption
b  4  30  0  0
highest bid = 100
";
    assert_eq!(table, expected);
}

#[test]
fn run_json_totals_match_the_table() {
    let path = fixture("t2.json");
    let text = stdout_of(&[
        "run",
        "--mechanism",
        "ivcg",
        "--instance",
        path.to_str().unwrap(),
        "--json",
    ]);
    let doc: RunDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.mechanism, "ivcg");
    assert_eq!(doc.winner, "c");
    let total: dauction::money::Money = doc.agents.iter().map(|row| row.payment.clone()).sum();
    assert_eq!(total, doc.revenue);
    assert_eq!(doc.agents.len(), 4);
    assert!(doc.agents.iter().all(|row| row.bid.is_some()));
}

#[test]
fn reports_override_truthful_bids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent.json");
    std::fs::write(
        &path,
        r#"{
  "seller_neighbors": ["a"],
  "agents": {
    "a": { "valuation": "0", "neighbors": ["b"] },
    "b": { "valuation": "1" }
  },
  "reports": { "b": null }
}"#,
    )
    .unwrap();
    let table = stdout_of(&["run", "--mechanism", "vcg", "--instance", path.to_str().unwrap()]);
    // With b staying away the chain collapses to a alone; her zero bid wins a
    // zero-revenue sale and b's row shows no bid at all.
    assert_eq!(table, "a  0  0  0 *\nb  -  0  0\nrevenue = 0\n");
}

#[test]
fn decimal_money_prints_as_a_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("halves.json");
    std::fs::write(
        &path,
        r#"{
  "seller_neighbors": ["p", "q"],
  "agents": {
    "p": { "valuation": "2.5" },
    "q": { "valuation": "1" }
  }
}"#,
    )
    .unwrap();
    let table = stdout_of(&["run", "--mechanism", "vcg", "--instance", path.to_str().unwrap()]);
    assert_eq!(table, "p  5/2  1  3/2 *\nq  1  0  0\nrevenue = 1\n");
}

#[test]
fn process_exit_codes_follow_the_contract() {
    let t2 = fixture("t2.json");
    let t2 = t2.to_str().unwrap();

    let usage = run(&["run", "--mechanism", "nope", "--instance", t2]);
    assert_eq!(usage.status.code(), Some(64));
    assert!(!usage.stderr.is_empty());

    let missing = run(&["run", "--mechanism", "vcg", "--instance", "/no/such/file.json"]);
    assert_eq!(missing.status.code(), Some(65));

    let bad_family = run(&["matrix", "--max-agents", "0", "--bid-max", "4"]);
    assert_eq!(bad_family.status.code(), Some(64));

    let gap_without_mechanism = run(&["run", "--mechanism", "vcg", "--delta", "1", "--instance", t2]);
    assert_eq!(gap_without_mechanism.status.code(), Some(64));
}

#[test]
fn audit_json_witnesses_replay() {
    let out = run(&[
        "audit",
        "--mechanism",
        "pvcg",
        "--property",
        "ic",
        "--max-agents",
        "3",
        "--bid-max",
        "3",
        "--json",
    ]);
    // A failure of a property expected to fail is a consistent result.
    assert_eq!(out.status.code(), Some(0));
    let doc: VerdictDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.status, "fails");
    let witness = witness_from_doc(doc.witness.as_ref().unwrap()).unwrap();
    witness.verify().unwrap();
}

#[test]
fn generated_instances_run_and_regenerate() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        let out = run(&[
            "gen",
            "--count",
            "4",
            "--seed",
            "11",
            "--max-agents",
            "4",
            "--bid-max",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let names = |dir: &tempfile::TempDir| -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let first_names = names(&first);
    assert_eq!(first_names.len(), 4);
    assert_eq!(first_names, names(&second));
    for name in &first_names {
        let path = first.path().join(name);
        let out = run(&["run", "--mechanism", "vcg", "--instance", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "generated instance {name} fails to run");
    }
}
