//! The acceptance suite: seven end-to-end checks, one test per criterion,
//! each passing or failing on its own line of the test report.
//!
//! 1. the worked small-tree table reproduced through the binary, under a
//!    second;
//! 2. the full property matrix over the five-agent family, exit code zero,
//!    every verdict matching the established pattern and every failure
//!    replayed from its JSON witness;
//! 3. hand-computed goldens: the underwater chain, the profitable-relay
//!    chain, and the split-identity payoffs on it;
//! 4. exact inequality sweeps across the whole five-agent family;
//! 5. the gap mechanism's fallback/lift dichotomy across the same family;
//! 6. rebate tightness: marginal-contribution payoffs met with equality;
//! 7. split-identity attacks found (and replayed) against the rebate and
//!    gap mechanisms, with the interruption mechanism surviving every
//!    bounded attack.
//!
//! The matrix expectations in criterion 2 deliberately mark both incentive
//! columns of the gap mechanism as failing: its side payment can be steered
//! by the entry agent, once by overbidding into the leading slot and once
//! by hiding a relay branch. See `audit::expected_cell` for the two
//! counterexamples; the audits replay both witnesses here.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use dauction::audit::sweeps::{revenue_and_bounds_sweep, SweepOutcome};
use dauction::audit::{check_property, AttackModel, FamilySpec, Property, VerdictStatus};
use dauction::cli::MatrixDoc;
use dauction::format::witness_from_doc;
use dauction::mechanisms::{self, Mechanism};
use dauction::model::{Agent, AgentId, GlobalProfile, Instance, Report};
use dauction::money::Money;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dauction"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_table(mechanism: &str, instance: &Path) -> String {
    let out = bin()
        .args(["run", "--mechanism", mechanism, "--instance", instance.to_str().unwrap()])
        .output()
        .expect("binary spawns");
    assert!(
        out.status.success(),
        "{mechanism} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn money(n: i64) -> Money {
    Money::from_int(n)
}

/// Truthful two-link chain: seller -> a(entry) -> b(top).
fn chain(entry: i64, top: i64) -> GlobalProfile {
    let a = AgentId::new("a");
    let b = AgentId::new("b");
    let instance = Instance::new(
        [a.clone()],
        [
            (a, Agent { valuation: money(entry), neighbors: [b.clone()].into() }),
            (b, Agent { valuation: money(top), neighbors: [].into() }),
        ],
    );
    GlobalProfile::truthful(Arc::new(instance))
}

#[test]
fn acceptance_1_small_tree_table() {
    let started = Instant::now();
    let t2 = fixture("t2.json");
    assert_eq!(
        run_table("ivcg", &t2),
        "a  1  0  0\nb  1  0  0\nc  4  2  2 *\nd  2  0  0\nrevenue = 2\n"
    );
    assert_eq!(
        run_table("idm", &t2),
        "a  1  -1  1\nb  1  0  0\nc  4  2  2 *\nd  2  0  0\nrevenue = 1\n"
    );
    assert_eq!(
        run_table("danmu", &t2),
        "a  1  1  0 *\nb  1  0  0\nc  4  0  0\nd  2  0  0\nrevenue = 1\n"
    );
    assert!(started.elapsed() < Duration::from_secs(1), "trio took {:?}", started.elapsed());
}

#[test]
fn acceptance_2_property_matrix_with_replayable_witnesses() {
    let out = bin()
        .args(["matrix", "--max-agents", "5", "--bid-max", "4", "--delta", "1", "--json"])
        .output()
        .expect("binary spawns");
    assert_eq!(
        out.status.code(),
        Some(0),
        "matrix exited nonzero: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: MatrixDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc.contradictions.is_empty(), "contradicted: {:?}", doc.contradictions);
    assert!(doc.inconclusive.is_empty(), "inconclusive: {:?}", doc.inconclusive);
    assert!(doc.unexhibited.is_empty(), "not exhibited: {:?}", doc.unexhibited);
    assert_eq!(
        (doc.caps.outcome, doc.caps.deviation, doc.caps.replica_chain, doc.caps.general),
        (5, 4, 3, 2)
    );

    let expected: [(&str, [&str; 6]); 5] = [
        ("vcg", ["holds", "holds", "holds", "holds", "fails", "fails"]),
        ("idm", ["fails", "holds", "holds", "holds", "holds", "fails"]),
        ("pvcg", ["holds", "holds", "fails", "holds", "holds", "fails"]),
        ("ivcg", ["fails", "holds", "holds", "holds", "holds", "holds"]),
        ("delta-ivcg", ["fails", "holds", "fails", "fails", "holds", "fails"]),
    ];
    assert_eq!(doc.rows.len(), expected.len());
    let mut replayed = 0usize;
    for (row, (mechanism, statuses)) in doc.rows.iter().zip(&expected) {
        assert_eq!(&row.mechanism, mechanism);
        let columns: Vec<&str> = row.cells.iter().map(|c| c.column.as_str()).collect();
        assert_eq!(columns, ["efficiency", "ir", "ic", "wic", "wbb", "fnp"]);
        for (cell, want) in row.cells.iter().zip(statuses) {
            assert_eq!(&cell.status, want, "{mechanism} {}", cell.column);
            if *want != "fails" {
                continue;
            }
            let witnesses: Vec<_> = cell
                .verdicts
                .iter()
                .filter_map(|v| v.witness.as_ref())
                .collect();
            assert!(!witnesses.is_empty(), "{mechanism} {} fails without a witness", cell.column);
            for doc in witnesses {
                let witness = witness_from_doc(doc).unwrap();
                witness.verify().unwrap_or_else(|e| {
                    panic!("{mechanism} {} witness does not replay: {e}", cell.column)
                });
                replayed += 1;
            }
        }
    }
    assert_eq!(replayed, 11, "one replayed witness per failing cell");
}

#[test]
fn acceptance_3_worked_example_goldens() {
    // Two-link chain with a worthless relay: the full-rebate sale runs the
    // seller one unit underwater.
    let vcg = mechanisms::run(&Mechanism::Vcg, &chain(0, 1)).unwrap();
    assert_eq!(vcg.revenue(), money(-1));

    // Profitable-relay chain: the full rebate hands the relay the entire
    // top bid, the participation rebate only her own.
    let relay_chain = chain(10, 100);
    let a = AgentId::new("a");
    let vcg = mechanisms::run(&Mechanism::Vcg, &relay_chain).unwrap();
    assert_eq!(vcg.payment(&a), money(-100));
    let pvcg = mechanisms::run(&Mechanism::Pvcg, &relay_chain).unwrap();
    assert_eq!(pvcg.payment(&a), money(-10));
    let honest_vcg = vcg.utility(&a, &money(10));
    let honest_pvcg = pvcg.utility(&a, &money(10));
    assert_eq!(honest_vcg, money(100));
    assert_eq!(honest_pvcg, money(10));

    // The relay splits in two, threading a 20-bid identity between herself
    // and the top bidder. Both rebate mechanisms now pay the coalition.
    let z1 = AgentId::new("z1");
    let b = AgentId::new("b");
    let instance = Instance::new(
        [a.clone()],
        [
            (
                a.clone(),
                Agent { valuation: money(10), neighbors: [b.clone(), z1.clone()].into() },
            ),
            (b.clone(), Agent { valuation: money(100), neighbors: [].into() }),
            (z1.clone(), Agent { valuation: money(20), neighbors: [b.clone()].into() }),
        ],
    );
    let attacked = GlobalProfile::from_reports(
        Arc::new(instance),
        [(a.clone(), Report::Present { bid: money(10), neighbors: [z1.clone()].into() })].into(),
    )
    .unwrap();
    let coalition = |outcome: &mechanisms::Outcome| {
        let value = if outcome.winner == a || outcome.winner == z1 {
            money(10)
        } else {
            Money::zero()
        };
        value - outcome.payment(&a) - outcome.payment(&z1)
    };

    let vcg = mechanisms::run(&Mechanism::Vcg, &attacked).unwrap();
    assert_eq!(vcg.winner, b);
    assert_eq!(vcg.payment(&a), money(-100));
    assert_eq!(vcg.payment(&z1), money(-90));
    let vcg_coalition = coalition(&vcg);
    assert_eq!(vcg_coalition, money(190));
    assert!(vcg_coalition > honest_vcg, "the split must profit under full rebates");

    let pvcg = mechanisms::run(&Mechanism::Pvcg, &attacked).unwrap();
    assert_eq!(pvcg.payment(&a), money(-10));
    assert_eq!(pvcg.payment(&z1), money(-10));
    assert_eq!(coalition(&pvcg), money(20));
}

static SWEEP: OnceLock<SweepOutcome> = OnceLock::new();

/// Every instance on up to five agents with integer bids to 4, swept once
/// and shared by criteria 4 through 6.
fn full_family_sweep() -> &'static SweepOutcome {
    SWEEP.get_or_init(|| {
        let family = FamilySpec::new(5, 4).unwrap();
        let deltas = [Money::from_int(1), Money::from_ratio(1, 2)];
        revenue_and_bounds_sweep(family, &deltas).unwrap()
    })
}

#[test]
fn acceptance_4_inequality_sweeps() {
    let sweep = full_family_sweep();
    assert_eq!(sweep.failures, Vec::<String>::new());
    assert_eq!(sweep.instances, FamilySpec::new(5, 4).unwrap().size());
    assert!(sweep.unique_top_instances > 0);
    assert!(sweep.unique_top_instances < sweep.instances);
}

#[test]
fn acceptance_5_gap_fallback_dichotomy() {
    let sweep = full_family_sweep();
    assert_eq!(sweep.failures, Vec::<String>::new());
    assert!(
        sweep.gap_hits.iter().all(|&hits| hits > 0),
        "a gap never fired: {:?}",
        sweep.gap_hits
    );
}

#[test]
fn acceptance_6_rebate_bounds_are_tight() {
    let sweep = full_family_sweep();
    assert_eq!(sweep.failures, Vec::<String>::new());
    assert_eq!(sweep.participation_tight_at, Some(1));
}

#[test]
fn acceptance_7_split_identity_witnesses() {
    let started = Instant::now();
    let small = FamilySpec::new(3, 4).unwrap();
    let tiny = FamilySpec::new(2, 4).unwrap();
    let chain = Property::FalseNameProofness(AttackModel::Chain);
    let replica = Property::FalseNameProofness(AttackModel::Replica);
    let general = Property::FalseNameProofness(AttackModel::General);

    // Threaded fake identities beat both rebate mechanisms and the gap
    // mechanism; each witness replays exactly.
    let gap = Mechanism::DeltaIvcg { delta: Money::from_int(1) };
    for mechanism in [Mechanism::Vcg, Mechanism::Pvcg, gap] {
        let verdict = check_property(&mechanism, chain, small, None).unwrap();
        assert_eq!(verdict.status, VerdictStatus::Fails, "{mechanism} resists chain splits");
        verdict.witness.unwrap().verify().unwrap();
    }

    // Sibling replicas beat the diffusion resale mechanism.
    let verdict = check_property(&Mechanism::Idm, replica, small, None).unwrap();
    assert_eq!(verdict.status, VerdictStatus::Fails);
    verdict.witness.unwrap().verify().unwrap();

    // The interruption mechanism survives every bounded split, with the
    // whole family exhausted rather than budget-capped.
    for property in [replica, chain] {
        let verdict = check_property(&Mechanism::Ivcg, property, small, None).unwrap();
        assert_eq!(verdict.status, VerdictStatus::Holds, "ivcg {property}");
        assert!(verdict.witness.is_none());
        assert_eq!(verdict.instances_checked, verdict.family_size);
    }
    let verdict = check_property(&Mechanism::Ivcg, general, tiny, None).unwrap();
    assert_eq!(verdict.status, VerdictStatus::Holds);
    assert_eq!(verdict.instances_checked, verdict.family_size);

    assert!(started.elapsed() < Duration::from_secs(600), "took {:?}", started.elapsed());
}
