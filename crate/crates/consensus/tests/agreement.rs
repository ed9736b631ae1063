use consensus::*;
use simnet::*;

type Tc = TurpinCoan<MajorityBa>;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn messages_in_steps(out: &RunOutcome<impl Clone>, steps: std::ops::Range<u64>) -> usize {
    out.transcript.events.iter().filter(|e| steps.contains(&e.step)).count()
}

#[test]
fn majority_unanimity() {
    let params = Params { n: 4, f: 1 };
    let out = run_protocol(params, NoAdversary, false, |me| <MajorityBa as BinaryAgreement>::start(params, me, true))
        .unwrap();
    assert!(out.decisions.values().all(|v| is_bit(v, true)));
}

#[test]
fn majority_with_equivocating_member() {
    let params = Params { n: 4, f: 1 };
    let honest = [p(0), p(1), p(2)];
    for pattern in 0..64u32 {
        for bit in [false, true] {
            // P3 equivocates in its own instance, nonce [3]
            let adv = FnAdversary::new([p(3)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
                if view.step != 0 {
                    return;
                }
                for (i, to) in honest.iter().enumerate() {
                    let mask = (pattern >> (2 * i)) & 3;
                    for v in [0u64, 1] {
                        if mask & (1 << v) != 0 {
                            let mut m = value(v);
                            ctx.sign_as(p(3), &mut m, b"", &Nonce(vec![3]));
                            ctx.send(p(3), *to, m);
                        }
                    }
                }
            });
            let out = run_protocol(params, adv, false, |me| <MajorityBa as BinaryAgreement>::start(params, me, bit))
                .unwrap();
            assert!(out.consistent());
            if bit {
                assert!(out.decisions.values().all(|v| is_bit(v, true)));
            }
        }
    }
}

#[test]
fn cross_instance_replay_is_harmless() {
    // a corrupted process re-sends every message it receives to every honest process
    let params = Params { n: 4, f: 1 };
    let adv = FnAdversary::new([p(2)], |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
        for d in view.inbox(p(2)) {
            for to in [p(0), p(1), p(3)] {
                ctx.send(p(2), to, d.msg.clone());
            }
        }
    });
    let out = run_protocol(params, adv, false, |me| <MajorityBa as BinaryAgreement>::start(params, me, me.0 % 2 == 0))
        .unwrap();
    assert!(out.consistent());
    for (_, ba) in &out.processes {
        for (i, o) in ba.outcomes().iter().enumerate() {
            if i != 2 {
                assert_eq!(*o, Some(&value((i % 2 == 0) as u64)));
            }
        }
    }
}

#[test]
fn turpin_coan_validity_and_overhead() {
    let params = Params { n: 4, f: 1 };
    let out = run_protocol(params, NoAdversary, true, |me| Tc::start(params, me, value(7))).unwrap();
    assert!(out.decisions.values().all(|v| *v == value(7)));
    let base = run_protocol(params, NoAdversary, true, |me| <MajorityBa as BinaryAgreement>::start(params, me, false))
        .unwrap();
    assert_eq!(out.last_decision_step().unwrap(), base.last_decision_step().unwrap() + 2);
    let extra = out.metrics.total_messages() - base.metrics.total_messages();
    assert_eq!(extra as usize, messages_in_steps(&out, 0..2));
    assert!(extra <= 2 * 16);
}

#[test]
fn turpin_coan_unanimous_without_faults() {
    let params = Params { n: 4, f: 0 };
    let out = run_protocol(params, NoAdversary, false, |me| Tc::start(params, me, value(3))).unwrap();
    assert!(out.decisions.values().all(|v| *v == value(3)));
}

#[test]
fn turpin_coan_overhead_over_a_grid() {
    for n in 4..=8usize {
        for f in 0..=(n - 1) / 3 {
            let params = Params { n, f };
            let inputs = |me: ProcessId| value(1 + (me.0 as u64 % 3));
            let out = run_protocol(params, NoAdversary, true, |me| Tc::start(params, me, inputs(me))).unwrap();
            assert!(out.consistent());
            let extra = messages_in_steps(&out, 0..2);
            assert!(extra <= 2 * n * n, "N={n} f={f}");
            assert!(out.processes.values().all(|t| t.duration() == params.f as u64 + 4));
        }
    }
}

/// Corrupted P3 sends each honest process any value claim and any perplexity
/// claim, then stays silent inside the binary agreement.
#[test]
fn turpin_coan_exhaustive_claims() {
    let params = Params { n: 4, f: 1 };
    let honest = [p(0), p(1), p(2)];
    let claims: Vec<Option<u64>> = vec![None, Some(1), Some(2)];
    let inputs_sets: [[u64; 3]; 4] = [[1, 1, 1], [1, 1, 2], [1, 2, 2], [1, 2, 3]];
    for inputs in inputs_sets {
        for pattern in 0..216u32 {
            let mut choice = [(None, false); 3];
            let mut x = pattern;
            for c in choice.iter_mut() {
                *c = (claims[(x % 3) as usize], (x / 3) % 2 == 1);
                x /= 6;
            }
            let adv = FnAdversary::new([p(3)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
                for (i, to) in honest.iter().enumerate() {
                    let (v, perplexed) = choice[i];
                    if view.step == 0 {
                        if let Some(v) = v {
                            let mut w = simnet::codec::Writer::new();
                            w.u8(1);
                            w.bytes(&value(v).encode());
                            ctx.send(p(3), *to, SignedMessage::new(w.finish()));
                        }
                    } else if view.step == 1 && perplexed {
                        ctx.send(p(3), *to, SignedMessage::new(vec![2]));
                    }
                }
                if view.step == 0 {
                    ctx.wake_at(1);
                }
            });
            let out = run_protocol(params, adv, false, |me| Tc::start(params, me, value(inputs[me.index()]))).unwrap();
            assert!(out.consistent(), "inputs {inputs:?} pattern {pattern}");
            let d = out.common_decision().unwrap();
            if inputs.iter().all(|v| *v == inputs[0]) {
                assert_eq!(*d, value(inputs[0]));
            }
            if out.processes.values().any(|t| t.agreed_alert() == Some(true)) {
                assert_eq!(*d, sender_fault());
            }
            assert!(out.processes.values().all(|t| !t.hit_tie()));
        }
    }
}

#[test]
fn bb_from_ba_validity_and_overhead() {
    let params = Params { n: 4, f: 1 };
    let bb = run_protocol(params, NoAdversary, true, |me| {
        BbFromBa::<Tc>::new(params, me, p(0), (me == p(0)).then(|| value(5)))
    })
    .unwrap();
    assert!(bb.decisions.values().all(|v| *v == value(5)));
    let ba = run_protocol(params, NoAdversary, true, |me| Tc::start(params, me, value(5))).unwrap();
    assert_eq!(bb.last_decision_step().unwrap(), ba.last_decision_step().unwrap() + 1);
    assert_eq!(bb.metrics.total_messages() - ba.metrics.total_messages(), 4);
}

#[test]
fn bb_from_ba_equivocating_leader() {
    let params = Params { n: 4, f: 1 };
    let honest = [p(1), p(2), p(3)];
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
                        ctx.sign_as(p(0), &mut m, b"", &Nonce(vec![1]));
                        ctx.send(p(0), *to, m);
                    }
                }
            }
        });
        let out = run_protocol(params, adv, false, |me| BbFromBa::<Tc>::new(params, me, p(0), None)).unwrap();
        assert!(out.consistent(), "pattern {pattern:06b}");
    }
}
