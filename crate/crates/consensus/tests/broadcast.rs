use consensus::*;
use simnet::*;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

/// All-honest message count, recomputed from the forwarding rule: the leader
/// reaches N, every other process forwards once, relays to the N-1 others and
/// the rest to the f+1 relays. The leader, already holding v, forwards nothing.
fn ds_honest_count(n: usize, f: usize) -> u64 {
    let relays = (f + 1) as u64;
    let others = (n - 1) as u64 - relays;
    n as u64 + relays * (n as u64 - 1) + others * relays
}

#[test]
fn honest_leader_is_adopted_by_everyone() {
    let params = Params { n: 4, f: 1 };
    let out = run_protocol(params, NoAdversary, true, |me| DolevStrong::new(params, me, p(0), Some(value(1)))).unwrap();
    assert_eq!(out.decisions.len(), 4);
    assert!(out.decisions.values().all(|v| *v == value(1)));
    assert_eq!(out.last_decision_step(), Some(3));
    assert_eq!(out.metrics.total_messages(), 12);
}

#[test]
fn honest_counts_match_the_forwarding_rule_and_bounds() {
    for n in 3..=12usize {
        for f in 0..=3usize {
            if f + 1 >= n {
                continue;
            }
            let params = Params { n, f };
            let out = run_protocol(params, NoAdversary, false, |me| DolevStrong::new(params, me, p(0), Some(value(1))))
                .unwrap();
            let m = out.metrics.total_messages();
            assert_eq!(m, ds_honest_count(n, f), "N={n} f={f}");
            assert!(m <= (n + 4 * n * (f + 1)) as u64);
            assert!(4 * out.metrics.total_signatures() >= (n * (f + 1)) as u64);
            assert!(out.decisions.values().all(|v| *v == value(1)));
        }
    }
}

#[test]
fn silent_leader_gives_sender_fault() {
    let params = Params { n: 4, f: 1 };
    let out = run_protocol(params, Silent([p(0)].into()), false, |me| DolevStrong::new(params, me, p(0), None)).unwrap();
    assert!(out.decisions.values().all(|v| *v == sender_fault()));
}

#[test]
fn silent_relay_does_not_break_consistency() {
    let params = Params { n: 4, f: 1 };
    let out = run_protocol(params, Silent([p(1)].into()), false, |me| DolevStrong::new(params, me, p(0), Some(value(9))))
        .unwrap();
    assert!(out.decisions.values().all(|v| *v == value(9)));
    let honest: Vec<_> = out.processes.iter().map(|(p, d)| (*p, d)).collect();
    assert!(audit_extractions(honest).is_empty());
}

#[test]
fn equivocating_leader_split_at_step_zero() {
    let params = Params { n: 4, f: 1 };
    let honest = [p(1), p(2), p(3)];
    // each honest process gets any subset of {1, 2} from the corrupted leader
    for pattern in 0..64u32 {
        let adv = FnAdversary::new([p(0)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
            if view.step != 0 {
                return;
            }
            for (i, to) in honest.iter().enumerate() {
                let mask = (pattern >> (2 * i)) & 3;
                for v in [1u64, 2] {
                    if mask & (1 << (v - 1)) != 0 {
                        let mut m = value(v);
                        ctx.sign_as(p(0), &mut m, b"", &Nonce::root());
                        ctx.send(p(0), *to, m);
                    }
                }
            }
        });
        let out = run_protocol(params, adv, false, |me| DolevStrong::new(params, me, p(0), None)).unwrap();
        assert!(out.consistent(), "pattern {pattern:06b}");
        assert!(out.decided_at.values().all(|t| *t <= 3));
        let honest: Vec<_> = out.processes.iter().map(|(p, d)| (*p, d)).collect();
        assert!(audit_extractions(honest).is_empty());
    }
}

#[test]
fn relay_set_excludes_leader() {
    let params = Params { n: 6, f: 2 };
    assert_eq!(relay_set(params, p(0)), vec![p(1), p(2), p(3)]);
    assert_eq!(relay_set(params, p(2)), vec![p(0), p(1), p(3)]);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]
    /// Any set of silent non-leaders keeps an honest leader's value.
    #[test]
    fn silent_faults_keep_validity(n in 4usize..9, f in 1usize..3, mask in 0u32..256, v in 1u64..1000) {
        proptest::prop_assume!(f + 1 < n);
        let silent: std::collections::BTreeSet<_> =
            (1..n as u32).filter(|i| mask & (1 << i) != 0).take(f).map(p).collect();
        let params = Params { n, f };
        let out = run_protocol(params, Silent(silent), false, |me| DolevStrong::new(params, me, p(0), Some(value(v))))
            .unwrap();
        proptest::prop_assert!(out.decisions.values().all(|d| *d == value(v)));
        proptest::prop_assert_eq!(out.decisions.len(), out.processes.len());
    }
}
