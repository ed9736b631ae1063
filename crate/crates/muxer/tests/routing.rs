use std::collections::BTreeSet;

use muxer::*;
use proptest::prelude::*;
use simnet::*;

fn params() -> Params {
    Params { n: 4, f: 1 }
}

fn signed_under(bench: &mut Workbench, signers: &[(u32, Vec<u64>)]) -> SignedMessage {
    let mut m = SignedMessage::new(b"v".to_vec());
    for (s, nonce) in signers {
        let mut ctx = bench.ctx(ProcessId(*s), 0, params());
        ctx.with_nonce(Nonce(nonce.clone()), |ctx| assert!(ctx.sign(&mut m, b"")));
    }
    m
}

#[test]
fn uniform_nonce_routes_to_its_instance() {
    let mut bench = Workbench::default();
    let m = signed_under(&mut bench, &[(0, vec![5]), (1, vec![5])]);
    assert_eq!(route(&m, &Nonce::root()), Route::Instance(5));
}

#[test]
fn spliced_signature_is_discarded() {
    // corrupted P3 countersigns an instance-A message under instance B
    let mut bench = Workbench::new([ProcessId(3)].into());
    let m = signed_under(&mut bench, &[(0, vec![0]), (3, vec![1])]);
    assert_eq!(route(&m, &Nonce::root()), Route::Discard);
}

#[test]
fn unsigned_and_parent_level_messages_are_local() {
    let mut bench = Workbench::default();
    assert_eq!(route(&SignedMessage::new(vec![1]), &Nonce::root()), Route::Local);
    let m = signed_under(&mut bench, &[(0, vec![2])]);
    assert_eq!(route(&m, &Nonce(vec![2])), Route::Local);
    assert_eq!(route(&m, &Nonce(vec![3])), Route::Discard);
}

#[test]
fn nested_routing_uses_the_next_component() {
    let mut bench = Workbench::default();
    let m = signed_under(&mut bench, &[(0, vec![2, 7]), (1, vec![2, 7])]);
    assert_eq!(route(&m, &Nonce::root()), Route::Instance(2));
    assert_eq!(route(&m, &Nonce(vec![2])), Route::Instance(7));
    let mixed = signed_under(&mut bench, &[(0, vec![2]), (1, vec![2, 7])]);
    assert_eq!(route(&mixed, &Nonce(vec![2])), Route::Discard);
}

#[test]
fn wrapped_content_differs_across_instances() {
    let mut bench = Workbench::default();
    let mut seen = BTreeSet::new();
    for id in 0..3 {
        let mut m = SignedMessage::new(b"same".to_vec());
        let mut ctx = bench.ctx(ProcessId(0), 0, params());
        assert!(wrap_outgoing(&mut ctx, id, &mut m, b""));
        let bytes = m.stack_signed_bytes().pop().unwrap();
        assert_eq!(parse_signed_bytes(&bytes).unwrap().1, Nonce(vec![id]));
        assert!(seen.insert(bytes));
    }
    assert_eq!(bench.oracle.issued(), 3);
}

#[test]
fn allocator_is_dense() {
    let mut a = NonceAllocator::new();
    assert_eq!((a.alloc(), a.alloc(), a.alloc()), (0, 1, 2));
    assert_eq!(a.allocated(), 3);
}

/// Each instance signs one message to everyone at step 0 and counts what it receives.
#[derive(Clone, Default)]
struct Counter {
    received: usize,
}

#[derive(Clone)]
struct Host {
    instances: Mux<Counter>,
}

impl Process for Host {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        let first = ctx.step() == 0;
        self.instances.service(inbox, ctx, first, |_| None, |_, inst, mail, ctx| {
            inst.received += mail.len();
            if first {
                let mut m = SignedMessage::new(b"hello".to_vec());
                ctx.sign(&mut m, b"");
                ctx.send_all(&m);
            }
        });
    }
}

#[test]
fn muxed_metrics_are_the_sum_over_instances() {
    let mut mux = Mux::new();
    for id in 0..3 {
        mux.insert(id, Counter::default());
    }
    let cfg = NetworkConfig::new(4, 0, 2, 1);
    let mut net = Network::new(cfg, NoAdversary, |_| Host { instances: mux.clone() }).unwrap();
    net.run().unwrap();
    let m = net.metrics();
    let total: u64 = m.per_instance.values().map(|c| c.messages).sum();
    assert_eq!(total, m.total_messages());
    for id in 0..3 {
        assert_eq!(m.per_instance[&Some(id)].messages, 16);
    }
    for (_, h) in net.honest_processes() {
        assert!(h.instances.iter().all(|(_, c)| c.received == 4));
    }
}

proptest! {
    #[test]
    fn wrap_then_route_round_trips(id in 0u64..1000, parent in prop::collection::vec(0u64..50, 0..3)) {
        let mut bench = Workbench::default();
        let mut m = SignedMessage::new(b"p".to_vec());
        let mut ctx = bench.ctx(ProcessId(1), 0, params());
        let parent = Nonce(parent);
        ctx.with_nonce(parent.clone(), |ctx| wrap_outgoing(ctx, id, &mut m, b""));
        prop_assert_eq!(route(&m, &parent), Route::Instance(id));
    }
}
