use std::sync::Arc;

use cyclecoin::*;
use marker::*;
use simnet::*;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn run<A: Adversary>(n: usize, f: usize, targets: &[ProcessId], adv: A) -> GameOutcome<CycleCoinNode> {
    let params = Params { n, f };
    let topo = Arc::new(CycleTopology::ring(n));
    let cfg = NetworkConfig::new(n, f, round_len(n, f), targets.len() as u64);
    run_marker_game(cfg, adv, &chain_inputs(n, targets), |me| CycleCoinNode::new(topo.clone(), params, me, p(0)))
        .unwrap()
}

fn local_cost(dist: u64) -> u64 {
    2 * dist.saturating_sub(1) + u64::from(dist >= 1)
}

#[test]
fn five_message_payment() {
    let out = run(6, 1, &[p(3)], NoAdversary);
    assert!(out.violations().is_empty(), "{:?}", out.violations());
    assert_eq!(out.metrics.messages_per_round[0], 5);
    assert_eq!(out.record.rounds[0].marks[&p(3)], Mark::Received { from: Some(p(0)) });
    let c = out.nodes[&p(3)].chain().unwrap();
    assert_eq!(Bracket(c).to_string(), "[P0,(P0,xP0,P1,xP0,P2,yP0)]");
}

#[test]
fn locality_costs() {
    for n in 3..=7usize {
        for t in 0..n as u32 {
            let out = run(n, 1, &[p(t)], NoAdversary);
            assert!(out.violations().is_empty());
            assert_eq!(out.metrics.messages_per_round[0], local_cost(t as u64), "N={n} target {t}");
            for q in (t + 1)..n as u32 {
                assert_eq!(out.metrics.received_by(p(q)), 0);
            }
        }
    }
}

#[test]
fn sequential_walk_never_touches_last() {
    let n = 7;
    let targets: Vec<_> = (1..n as u32 - 1).map(p).collect();
    let out = run(n, 2, &targets, NoAdversary);
    assert!(out.violations().is_empty());
    assert_eq!(out.metrics.received_by(p(n as u32 - 1)), 0);
    assert!(out.metrics.messages_per_round.iter().all(|m| *m == 1));
}

#[test]
fn self_payment_keeps_and_pads() {
    let out = run(5, 1, &[p(0), p(0), p(2)], NoAdversary);
    assert!(out.violations().is_empty());
    assert_eq!(out.metrics.messages_per_round, vec![0, 0, 3]);
    assert_eq!(out.record.rounds[0].marks[&p(0)], Mark::Kept);
    let c = out.nodes[&p(2)].chain().unwrap();
    assert_eq!(Bracket(c).to_string(), "[P0,(yP0),(yP0),(P0,xP0,P1,yP0)]");
}

#[test]
fn wrapping_payments() {
    // 0 -> 4 -> 1 -> 3 on N=5: the second hop wraps past the origin
    let targets = [p(4), p(1), p(3)];
    let out = run(5, 1, &targets, NoAdversary);
    assert!(out.violations().is_empty(), "{:?}", out.violations());
    assert_eq!(out.metrics.messages_per_round, vec![7, 3, 3]);
    let topo = CycleTopology::ring(5);
    let c = out.nodes[&p(3)].chain().unwrap();
    let parsed = parse_chain(c, &topo, &Default::default(), p(0), &Nonce::root()).unwrap();
    assert_eq!(parsed.weight(&topo), 4 + 2 + 2);
}

#[test]
fn silent_path_process_is_deleted() {
    let out = run(5, 1, &[p(3)], Silent([p(1)].into()));
    assert!(out.violations().is_empty(), "{:?}", out.violations());
    assert_eq!(out.record.rounds[0].marks[&p(3)], Mark::Received { from: Some(p(0)) });
    for q in [0, 2, 3, 4] {
        assert!(out.nodes[&p(q)].deleted().contains(&p(1)), "P{q}");
    }
    let c = out.nodes[&p(3)].chain().unwrap();
    assert_eq!(Bracket(c).to_string(), "[P0,(P0,xP0,P2,yP0)]");
}

#[test]
fn silent_target_keeps_nobody_marked_twice() {
    let out = run(5, 1, &[p(2), p(4)], Silent([p(2)].into()));
    assert!(out.violations().is_empty(), "{:?}", out.violations());
    let marked = out.nodes.iter().filter(|(q, n)| **q != p(2) && n.is_marked()).count();
    assert_eq!(marked, 0);
}

#[test]
fn proof_of_response_is_free_when_honest() {
    for n in 4..=8usize {
        for f in 1..=(n - 2).min(3) {
            let out = run(n, f, &[p(n as u32 - 1), p(1)], NoAdversary);
            assert!(out.violations().is_empty());
            assert_eq!(out.metrics.messages_per_round, vec![local_cost(n as u64 - 1), local_cost(2)]);
        }
    }
}

#[test]
fn tight_total_at_max_faults() {
    for n in 4..=9usize {
        let f = n - 2;
        let total: u64 = (0..n as u32)
            .map(|t| run(n, f, &[p(t)], NoAdversary).metrics.messages_per_round[0])
            .sum();
        let dists: u64 = (0..n as u64).map(local_cost).sum();
        assert_eq!(total, dists);
        assert_eq!(total, (n as u64 - 1).pow(2));
    }
}

/// A corrupted origin offers P1 both the coin and a request to pass it on.
fn double_offer(chain_first: bool) -> GameOutcome<CycleCoinNode> {
    let n = 5;
    let adv = FnAdversary::new([p(0)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
        let root = Nonce::root();
        let mut sign = |s: ProcessId, m: &mut SignedMessage, t: &[u8]| ctx.sign_as(s, m, t, &root);
        let mut pay = genesis(p(0), &mut sign).unwrap();
        sign(p(0), &mut pay, b"");
        let mut req = pay.clone();
        sign(p(0), &mut pay, &y_tag(p(1)));
        sign(p(0), &mut req, &x_tag(p(1)));
        let (first, second) = if chain_first { (pay, req) } else { (req, pay) };
        match view.step {
            0 => ctx.send(p(0), p(1), first),
            1 => ctx.send(p(0), p(1), second),
            _ => {}
        }
        ctx.wake_at(1);
    });
    let params = Params { n, f: 1 };
    let topo = Arc::new(CycleTopology::ring(n));
    let cfg = NetworkConfig::new(n, 1, round_len(n, 1), 1);
    run_marker_game(cfg, adv, &chain_inputs(n, &[p(1)]), |me| CycleCoinNode::new(topo.clone(), params, me, p(0)))
        .unwrap()
}

#[test]
fn received_coin_blocks_signing() {
    let out = double_offer(true);
    assert!(out.violations().is_empty());
    let p1 = &out.nodes[&p(1)];
    assert!(p1.is_marked());
    assert!(p1.signed_partials().is_empty());
    // the refusal carries the coin P1 holds
    let refusal = out.transcript.events.iter().find(|e| e.sender == p(1)).unwrap();
    assert!(refusal.n_signatures >= 3);
}

#[test]
fn signed_partial_blocks_acceptance() {
    let out = double_offer(false);
    assert!(out.violations().is_empty());
    let p1 = &out.nodes[&p(1)];
    assert!(!p1.is_marked());
    assert_eq!(p1.signed_partials().len(), 1);
    assert_eq!(p1.max_signed_weight(), Some(1));
}

#[test]
fn replayed_chain_is_stale() {
    // P3 records the coin it got in round 0 and replays it to P4 in round 1
    let n = 5;
    let len = round_len(n, 1);
    let mut seen: Vec<SignedMessage> = Vec::new();
    let adv = FnAdversary::new([p(3)], move |view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>| {
        for d in view.inbox(p(3)) {
            seen.push(d.msg.clone());
        }
        if view.step == len + 3 {
            for m in &seen {
                ctx.send(p(3), p(4), m.clone());
            }
        }
        ctx.wake_at(len + 3);
    });
    let params = Params { n, f: 1 };
    let topo = Arc::new(CycleTopology::ring(n));
    let cfg = NetworkConfig::new(n, 1, len, 2);
    let out = run_marker_game(cfg, adv, &chain_inputs(n, &[p(3), p(4)]), |me| {
        CycleCoinNode::new(topo.clone(), params, me, p(0))
    })
    .unwrap();
    assert!(out.violations().is_empty());
    assert!(!out.nodes[&p(4)].is_marked());
}

#[test]
fn claims_are_answered_with_evidence() {
    let out = double_offer(false);
    let p1 = &out.nodes[&p(1)];
    let coin = out
        .transcript
        .events
        .iter()
        .filter(|e| e.sender == p(0))
        .map(|e| SignedMessage::decode(&hex_bytes(&e.payload_hex)).unwrap())
        .find(|m| m.top().is_some_and(|t| t.tag == y_tag(p(1))))
        .unwrap();
    let mut wb = Workbench::new(Default::default());
    let ctx = wb.ctx(p(1), 0, Params { n: 5, f: 1 });
    let answer = p1.answer_claim(&coin, ctx.nonce());
    drop(ctx);
    let topo = CycleTopology::ring(5);
    let none = Default::default();
    // the run's oracle is gone; rebuild one holding every signature in the transcript
    let oracle = out_oracle(&out);
    let v = verify_payment_claim(&topo, p(0), &Nonce::root(), &none, &oracle, &coin, p(1), &answer);
    assert!(matches!(v, Verdict::Refuted(_)), "{v:?}");
    let v = verify_payment_claim(&topo, p(0), &Nonce::root(), &none, &oracle, &coin, p(1), &ClaimAnswer::Refuted(coin.clone()));
    assert_eq!(v, Verdict::BogusDenial);

    let honest = run(5, 1, &[p(2)], NoAdversary);
    let c = honest.nodes[&p(2)].chain().unwrap().clone();
    let ctx = wb.ctx(p(2), 0, Params { n: 5, f: 1 });
    assert_eq!(honest.nodes[&p(2)].answer_claim(&c, ctx.nonce()), ClaimAnswer::Paid);
}

fn hex_bytes(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

fn out_oracle(out: &GameOutcome<CycleCoinNode>) -> SignatureOracle {
    let mut o = SignatureOracle::new(Default::default());
    for e in &out.transcript.events {
        let m = SignedMessage::decode(&hex_bytes(&e.payload_hex)).unwrap();
        for (signer, content) in m.all_signatures() {
            o.sign(simnet::Authority::Process(signer), signer, &content).unwrap();
        }
    }
    o
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
    #[test]
    fn honest_walks_cost_their_distance(n in 3usize..7, raw in proptest::collection::vec(0u32..7, 1..4)) {
        let targets: Vec<_> = raw.iter().map(|t| p(t % n as u32)).collect();
        let out = run(n, 1, &targets, NoAdversary);
        proptest::prop_assert!(out.violations().is_empty());
        let topo = CycleTopology::ring(n);
        let mut holder = p(0);
        for (k, t) in targets.iter().enumerate() {
            proptest::prop_assert_eq!(out.metrics.messages_per_round[k], local_cost(topo.dist(holder, *t)));
            holder = *t;
        }
        proptest::prop_assert!(out.nodes[&holder].is_marked());
        proptest::prop_assert_eq!(out.nodes.values().filter(|x| x.is_marked()).count(), 1);
    }
}
