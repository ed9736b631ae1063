use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use adversary::*;
use hopnet::{gen_random_cycles, HopConfig};
use simnet::ProcessId;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

#[test]
fn dolev_strong_exhaustive_small() {
    let t = Instant::now();
    let r = ds_exhaustive(4, 1).unwrap();
    assert!(r.violations.is_empty(), "{:?}", &r.violations[..r.violations.len().min(3)]);
    assert!(r.latest_decision <= 3);
    eprintln!("ds N=4 f=1: {} runs in {:?}", r.runs, t.elapsed());
}

#[test]
fn dolev_strong_random() {
    let r = ds_random(6, 2, 300, 7).unwrap();
    assert_eq!(r.runs, 300);
    assert!(r.violations.is_empty(), "{:?}", r.violations.first());
}

#[test]
fn naive_marker_falls_to_the_split() {
    let spec = double_spend_split(MarkerKind::Naive, 4, 1, &BTreeSet::new(), p(1), p(3));
    let out = run_attack(&spec).unwrap();
    let split = out.split.as_ref().unwrap();
    assert!(split.d.is_empty());
    assert_eq!(split.accepted, vec![p(1), p(3)]);
    assert!(out.as_expected());
}

#[test]
fn cycle_coin_split_accepts_at_most_once() {
    let spec = double_spend_split(MarkerKind::CycleCoin, 6, 1, &BTreeSet::new(), p(2), p(4));
    let out = run_attack(&spec).unwrap();
    let split = out.split.as_ref().unwrap();
    // P2 lies on the way to P4
    assert!(split.d.contains(&p(2)));
    assert!(split.accepted.len() <= 1, "{:?}", split.accepted);
    assert!(out.as_expected(), "{:?}", out.violations);
}

#[test]
fn quorum_split_accepts_at_most_once() {
    let spec = double_spend_split(MarkerKind::Quorum, 4, 1, &BTreeSet::new(), p(1), p(2));
    let out = run_attack(&spec).unwrap();
    let split = out.split.as_ref().unwrap();
    assert!(split.d.len() >= 2);
    assert!(split.accepted.len() <= 1);
    assert!(out.as_expected(), "{:?}", out.violations);
}

#[test]
fn oversized_split_is_skipped() {
    let spec = double_spend_split(MarkerKind::CycleCoin, 6, 1, &BTreeSet::from([p(3)]), p(2), p(4));
    let out = run_attack(&spec).unwrap();
    assert!(out.split.unwrap().skipped);
}

#[test]
fn silent_path_process_is_routed_around() {
    let spec = silent_responder(MarkerKind::CycleCoin, 6, 1, p(2), 0, vec![p(4), p(4)]);
    let out = run_attack(&spec).unwrap();
    assert!(out.as_expected(), "{:?}", out.violations);
}

#[test]
fn replayer_changes_nothing() {
    for seed in 0..4 {
        let spec = stale_chain_replayer(MarkerKind::CycleCoin, 5, 1, p(3), seed, vec![p(2), p(4), p(1)]);
        let out = run_attack(&spec).unwrap();
        assert!(out.as_expected(), "seed {seed}: {:?}", out.violations);
    }
}

#[test]
fn quorum_resists_silence_and_replay() {
    for from in [0, 1, 2] {
        let out = run_attack(&silent_responder(MarkerKind::Quorum, 4, 1, p(2), from, vec![p(1), p(3)])).unwrap();
        assert!(out.as_expected(), "{:?}", out.violations);
    }
    let out = run_attack(&stale_chain_replayer(MarkerKind::Quorum, 4, 1, p(3), 1, vec![p(1), p(2)])).unwrap();
    assert!(out.as_expected(), "{:?}", out.violations);
}

#[test]
fn random_coin_gallery_smoke() {
    let cases: Vec<CoinCase> = (0..120).map(|s| coin_case_random(s, 7)).collect();
    let r = run_coin_cases(&cases).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures.first());
    assert_eq!(r.per_tactic.len(), 5);
}

#[test]
fn bank_gallery_smoke() {
    for seed in 0..40 {
        let case = bank_case_random(seed, 5, 3, 4, seed % 4 == 0);
        let r = case.run().unwrap();
        assert!(r.violations.is_empty(), "seed {seed}: {:?} in {case:?}", r.violations);
        if case.corrupted.is_empty() {
            assert_eq!(r.honest_final, r.supply);
        }
    }
}

#[test]
fn dispute_sweep_short_paths() {
    let cycles = Arc::new(gen_random_cycles(10, 4, 3).unwrap());
    let cfg = HopConfig { transcript: false, ..HopConfig::default() };
    let r = dispute_sweep(cycles, 3, &cfg, 1).unwrap();
    assert_eq!(r.routes, 1 + 2 + 4);
    assert!(r.disputed() > 0);
    assert!(r.wrong().is_empty(), "{:?}", r.wrong());
}

#[test]
fn attack_table_csv() {
    let rec = AttackRecord { attack: "split".into(), protocol: "naive".into(), n: 4, f: 1, violations: 1 };
    assert_eq!(records_to_csv(&[rec]).unwrap(), "attack,protocol,N,f,violations\nsplit,naive,4,1,1\n");
}

#[test]
fn compositions_count() {
    for d in 1..=6 {
        assert_eq!(compositions(d).len(), 1 << (d - 1));
    }
}
