use std::collections::BTreeSet;

use proptest::prelude::*;
use simnet::*;

/// Sends scripted payloads and logs (step, sender, payload) of everything received.
#[derive(Clone, Default)]
struct Scripted {
    script: Vec<(StepIndex, ProcessId, Vec<u8>, bool)>,
    log: Vec<(StepIndex, ProcessId, Vec<u8>)>,
}

impl Process for Scripted {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        for d in inbox {
            self.log.push((ctx.step(), d.from, d.msg.payload.clone()));
        }
        for (s, to, payload, signed) in self.script.clone() {
            if s == ctx.step() {
                let mut m = SignedMessage::new(payload);
                if signed {
                    ctx.sign(&mut m, b"");
                }
                ctx.send(to, m);
            } else if s > ctx.step() {
                ctx.wake_at(s);
            }
        }
    }
}

fn net_with(
    n: usize,
    scripts: Vec<Vec<(StepIndex, ProcessId, Vec<u8>, bool)>>,
) -> Network<Scripted, NoAdversary> {
    let cfg = NetworkConfig::new(n, 0, 4, 2);
    Network::new(cfg, NoAdversary, |p| Scripted { script: scripts[p.index()].clone(), log: vec![] }).unwrap()
}

#[test]
fn empty_network_step_is_a_no_op() {
    let mut net = net_with(3, vec![vec![]; 3]);
    net.advance_step().unwrap();
    assert_eq!(net.step(), 1);
    assert_eq!(net.metrics().total_messages(), 0);
}

#[test]
fn single_delivery_arrives_next_step_with_true_sender() {
    let mut net = net_with(2, vec![vec![(0, ProcessId(1), b"hi".to_vec(), true)], vec![]]);
    net.advance_step().unwrap();
    assert_eq!(net.metrics().total_messages(), 1);
    net.advance_step().unwrap();
    let log = &net.process(ProcessId(1)).unwrap().log;
    assert_eq!(log, &vec![(1, ProcessId(0), b"hi".to_vec())]);
}

#[test]
fn self_send_counts_as_one_message() {
    let mut net = net_with(2, vec![vec![(0, ProcessId(0), b"me".to_vec(), false)], vec![]]);
    net.run().unwrap();
    assert_eq!(net.metrics().total_messages(), 1);
    assert_eq!(net.process(ProcessId(0)).unwrap().log.len(), 1);
}

#[test]
fn wakeups_let_the_engine_skip_idle_steps() {
    let mut net = net_with(2, vec![vec![(6, ProcessId(1), b"late".to_vec(), false)], vec![]]);
    net.run().unwrap();
    assert_eq!(net.process(ProcessId(1)).unwrap().log, vec![(7, ProcessId(0), b"late".to_vec())]);
    assert_eq!(net.metrics().messages_per_round, vec![0, 1]);
}

#[test]
fn metrics_csv_has_one_row_per_round() {
    let mut net = net_with(2, vec![vec![(0, ProcessId(1), b"a".to_vec(), true)], vec![]]);
    net.run().unwrap();
    assert_eq!(net.metrics().to_csv(), "round,messages,signatures\n0,1,1\n1,0,0\n");
}

/// Corrupted P0 replays whatever it holds and tries tricks depending on mode.
#[derive(Clone)]
struct Trick {
    mode: u8,
}

impl Adversary for Trick {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        [ProcessId(0), ProcessId(3)].into()
    }
    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>) {
        match (self.mode, view.step) {
            // sign as a corrupted peer: allowed
            (0, 0) => {
                let mut m = SignedMessage::new(b"x".to_vec());
                assert!(ctx.sign_as(ProcessId(3), &mut m, b"", &Nonce::root()));
                ctx.send(ProcessId(0), ProcessId(1), m);
            }
            // sign as honest P1: forgery fault
            (1, 0) => {
                let mut m = SignedMessage::new(b"x".to_vec());
                ctx.sign_as(ProcessId(1), &mut m, b"", &Nonce::root());
            }
            // send as honest P2: impersonation
            (2, 0) => ctx.send(ProcessId(2), ProcessId(1), SignedMessage::new(vec![])),
            // relay a signature that only honest processes have seen
            (3, 1) => {
                let leaked = SignedMessage {
                    payload: b"secret".to_vec(),
                    attachments: vec![],
                    stack: vec![SigEntry { signer: ProcessId(1), tag: vec![], nonce: Nonce::root() }],
                };
                ctx.send(ProcessId(0), ProcessId(2), leaked);
            }
            // relay a signature received by a corrupted process: allowed
            (4, 1) => {
                for d in view.inbox(ProcessId(0)) {
                    ctx.send(ProcessId(0), ProcessId(2), d.msg.clone());
                }
            }
            _ => {}
        }
    }
}

fn tricked(mode: u8) -> Result<Network<Scripted, Trick>, SimError> {
    let cfg = NetworkConfig::new(4, 2, 4, 1);
    let mut net = Network::new(cfg, Trick { mode }, |p| Scripted {
        script: match p.0 {
            1 => vec![(0, ProcessId(2), b"secret".to_vec(), true), (0, ProcessId(0), b"public".to_vec(), true)],
            _ => vec![],
        },
        log: vec![],
    })?;
    net.run()?;
    Ok(net)
}

#[test]
fn corrupted_may_sign_for_corrupted_peer() {
    let net = tricked(0).unwrap();
    assert_eq!(net.process(ProcessId(1)).unwrap().log.len(), 1);
    // adversary sends are not counted
    assert_eq!(net.metrics().total_messages(), 2);
}

#[test]
fn adversary_signing_for_honest_aborts() {
    assert!(matches!(tricked(1), Err(SimError::Forgery { .. })));
}

#[test]
fn adversary_sending_as_honest_aborts() {
    assert!(matches!(tricked(2), Err(SimError::ImpersonatedSender(_))));
}

#[test]
fn adversary_cannot_use_unseen_honest_signature() {
    assert!(matches!(tricked(3), Err(SimError::Forgery { .. })));
}

#[test]
fn adversary_may_relay_received_signatures() {
    let net = tricked(4).unwrap();
    let log = &net.process(ProcessId(2)).unwrap().log;
    assert!(log.iter().any(|(_, from, p)| *from == ProcessId(0) && p == b"public"));
    assert!(audit_unforgeability(net.transcript(), net.oracle()).is_empty());
}

#[test]
fn transcript_jsonl_round_trips() {
    let net = tricked(4).unwrap();
    let text = net.transcript().to_jsonl();
    assert_eq!(Transcript::from_jsonl(&text).unwrap(), *net.transcript());
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(NetworkConfig::new(3, 3, 1, 1).validate().is_err());
    assert!(NetworkConfig::new(3, 1, 0, 1).validate().is_err());
    assert!(NetworkConfig::new(3, 1, 1, 0).validate().is_err());
    let too_many = Network::new(NetworkConfig::new(4, 1, 1, 1), Trick { mode: 0 }, |_| Scripted::default());
    assert!(too_many.is_err());
}

type Script = Vec<(StepIndex, ProcessId, Vec<u8>, bool)>;

fn arb_scripts(n: usize) -> impl Strategy<Value = Vec<Script>> {
    let send = (0u64..6, 0..n as u32, prop::collection::vec(any::<u8>(), 0..4), any::<bool>())
        .prop_map(|(s, to, p, signed)| (s, ProcessId(to), p, signed));
    prop::collection::vec(prop::collection::vec(send, 0..5), n)
}

proptest! {
    #[test]
    fn identical_runs_give_identical_transcripts(scripts in arb_scripts(4)) {
        let run = || {
            let mut net = net_with(4, scripts.clone());
            net.run().unwrap();
            (net.transcript().to_jsonl(), net.metrics().clone())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn counters_match_transcript_recount(scripts in arb_scripts(4)) {
        let mut net = net_with(4, scripts.clone());
        net.run().unwrap();
        let (m, s) = net.transcript().recount(&BTreeSet::new(), 2);
        prop_assert_eq!(&m, &net.metrics().messages_per_round);
        prop_assert_eq!(&s, &net.metrics().signatures_per_round);
        let expected: usize = scripts.iter().map(|s| s.len()).sum();
        prop_assert_eq!(net.metrics().total_messages() as usize, expected);
    }

    #[test]
    fn every_receipt_was_sent_one_step_earlier(scripts in arb_scripts(4)) {
        let mut net = net_with(4, scripts);
        net.run().unwrap();
        for (p, proc_) in net.honest_processes() {
            for (step, from, payload) in &proc_.log {
                let hit = net.transcript().events.iter().any(|e| {
                    e.step + 1 == *step && e.sender == *from && e.recipient == p
                        && SignedMessage::decode(&hex::decode(&e.payload_hex).unwrap()).unwrap().payload == *payload
                });
                prop_assert!(hit);
            }
        }
        prop_assert!(audit_lockstep(net.transcript(), 8));
    }
}
