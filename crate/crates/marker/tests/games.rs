use std::collections::BTreeSet;

use marker::*;
use proptest::prelude::*;
use simnet::*;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn ds_honest_count(n: u64, f: u64) -> u64 {
    n + (f + 1) * (n - 1) + (n - 2 - f) * (f + 1)
}

#[test]
fn bb_marker_honest_chain() {
    let params = Params { n: 4, f: 1 };
    let targets = [p(1), p(2), p(3)];
    let cfg = NetworkConfig::new(4, 1, 4, 3);
    let out = run_marker_game(cfg, NoAdversary, &chain_inputs(4, &targets), |me| BbMarker::new(params, me, p(0)))
        .unwrap();
    assert!(out.violations().is_empty(), "{:?}", out.violations());
    for (i, t) in targets.iter().enumerate() {
        assert_eq!(out.record.rounds[i].marks[t], Mark::Received { from: Some(if i == 0 { p(0) } else { targets[i - 1] }) });
        assert_eq!(out.metrics.messages_per_round[i], ds_honest_count(4, 1));
    }
}

#[test]
fn checker_flags_planted_violations() {
    let honest: BTreeSet<_> = (0..4).map(p).collect();
    let mut r = RoundRecord::default();
    r.marked_before.insert(p(0));
    r.inputs.insert(p(0), p(1));
    r.marks.insert(p(1), Mark::Received { from: Some(p(0)) });
    r.marks.insert(p(2), Mark::Received { from: Some(p(3)) });
    let v = check_marker_conditions(&GameRecord { honest: honest.clone(), rounds: vec![r.clone()] });
    assert!(v.iter().any(|v| matches!(v, Violation::Consistency { .. })));
    assert!(v.iter().any(|v| matches!(v, Violation::Impersonation { process, .. } if *process == p(2))));
    r.marks.remove(&p(2));
    r.marks.insert(p(1), Mark::Unmarked);
    let v = check_marker_conditions(&GameRecord { honest, rounds: vec![r] });
    assert_eq!(v, vec![Violation::Liveness { round: 0, payer: p(0), target: p(1) }]);
}

#[test]
fn bb_marker_equivocating_holder() {
    let params = Params { n: 4, f: 1 };
    let honest = [p(1), p(2), p(3)];
    for pattern in 0..64u32 {
        let adv = FnAdversary::new([p(0)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
            if view.step != 0 {
                return;
            }
            for (i, to) in honest.iter().enumerate() {
                let mask = (pattern >> (2 * i)) & 3;
                for target in [2u64, 3] {
                    if mask & (1 << (target - 2)) != 0 {
                        let mut m = consensus::value(target + 1);
                        ctx.sign_as(p(0), &mut m, b"", &Nonce(vec![0]));
                        ctx.send(p(0), *to, m);
                    }
                }
            }
        });
        let cfg = NetworkConfig::new(4, 1, 4, 2);
        let out = run_marker_game(cfg, adv, &chain_inputs(4, &[p(2), p(3)]), |me| BbMarker::new(params, me, p(0)))
            .unwrap();
        assert!(out.violations().is_empty(), "pattern {pattern}: {:?}", out.violations());
        let holders: BTreeSet<_> = out.nodes.values().map(|n| n.holder()).collect();
        assert_eq!(holders.len(), 1);
    }
}

fn quorum_z(n: usize, f: usize, target: ProcessId, self_pay: SelfPay) -> u64 {
    let params = Params { n, f };
    let cfg = NetworkConfig::new(n, f, 3, 1);
    let out = run_marker_game(cfg, NoAdversary, &chain_inputs(n, &[target]), |me| {
        QuorumMarker::new(params, me, p(0), self_pay)
    })
    .unwrap();
    assert!(out.violations().is_empty());
    out.metrics.total_messages()
}

#[test]
fn quorum_counts_are_exact() {
    for n in 2..=10usize {
        for f in 0..=(n - 1) / 3 {
            let per_round = 2 * (3 * f + 1) as u64;
            let mut silent = 0;
            let mut transfer = 0;
            for t in 0..n {
                let z = quorum_z(n, f, ProcessId::from(t), SelfPay::Silent);
                assert_eq!(z, if t == 0 { 0 } else { per_round });
                silent += z;
                transfer += quorum_z(n, f, ProcessId::from(t), SelfPay::Transfer);
            }
            assert_eq!(transfer, (n * (6 * f + 2)) as u64);
            assert_eq!(silent, ((n - 1) * (6 * f + 2)) as u64);
        }
    }
}

#[test]
fn quorum_split_attack_fails() {
    let params = Params { n: 4, f: 1 };
    for (n1, n2) in [(p(1), p(2)), (p(1), p(3)), (p(2), p(3))] {
        // per broadcaster: nothing, n1, n2, or both
        for pattern in 0..256u32 {
            let adv = FnAdversary::new([p(0)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
                if view.step != 0 {
                    return;
                }
                let node = QuorumMarker::new(params, p(0), p(0), SelfPay::Silent);
                let (envs, _) = ctx.puppet(p(0), |ctx| {
                    [node.make_intent(0, n1, ctx).unwrap(), node.make_intent(0, n2, ctx).unwrap()]
                });
                for b in 0..4u32 {
                    let mask = (pattern >> (2 * b)) & 3;
                    for (k, env) in envs.iter().enumerate() {
                        if mask & (1 << k) != 0 {
                            ctx.send(p(0), p(b), env.clone());
                        }
                    }
                }
            });
            let cfg = NetworkConfig::new(4, 1, 3, 2);
            let out = run_marker_game(cfg, adv, &chain_inputs(4, &[n1, n2]), |me| {
                QuorumMarker::new(params, me, p(0), SelfPay::Silent)
            })
            .unwrap();
            assert!(out.violations().is_empty(), "{n1}/{n2} pattern {pattern}: {:?}", out.violations());
            let marked = out.record.rounds[0].marks.values().filter(|m| m.is_marked()).count();
            assert!(marked <= 1);
        }
    }
}

#[test]
fn quorum_round_is_three_steps() {
    let params = Params { n: 7, f: 2 };
    let node = QuorumMarker::new(params, p(0), p(0), SelfPay::Silent);
    assert_eq!(node.round_len(), 3);
    let cfg = NetworkConfig::new(7, 2, 3, 3);
    let targets = [p(3), p(3), p(5)];
    let out = run_marker_game(cfg, NoAdversary, &chain_inputs(7, &targets), |me| {
        QuorumMarker::new(params, me, p(0), SelfPay::Silent)
    })
    .unwrap();
    assert!(out.violations().is_empty());
    assert_eq!(out.metrics.messages_per_round, vec![14, 0, 14]);
    assert_eq!(out.record.rounds[1].marks[&p(3)], Mark::Kept);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn quorum_honest_games_have_no_violations(targets in prop::collection::vec(0u32..7, 1..5)) {
        let params = Params { n: 7, f: 2 };
        let targets: Vec<_> = targets.into_iter().map(ProcessId).collect();
        let cfg = NetworkConfig::new(7, 2, 3, targets.len() as u64).without_transcript();
        let out = run_marker_game(cfg, NoAdversary, &chain_inputs(7, &targets), |me| {
            QuorumMarker::new(params, me, p(0), SelfPay::Silent)
        }).unwrap();
        prop_assert!(out.violations().is_empty());
        for (i, r) in out.record.rounds.iter().enumerate() {
            let marked: Vec<_> = r.marks.iter().filter(|(_, m)| m.is_marked()).map(|(p, _)| *p).collect();
            prop_assert_eq!(marked, vec![targets[i]]);
        }
    }
}
