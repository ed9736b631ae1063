use cancel::*;
use cyclecoin::CycleTopology;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::ProcessId;

fn ids(v: &[u32]) -> Vec<ProcessId> {
    v.iter().map(|i| ProcessId(*i)).collect()
}

fn inst(n: usize, a: &[u32], b: &[u32]) -> PairingInstance {
    PairingInstance::new(CycleTopology::ring(n), ids(a), ids(b)).unwrap()
}

#[test]
fn single_pair() {
    let i = inst(5, &[3], &[1]);
    assert_eq!(pair_greedy(&i), Pairing { assignment: vec![0], total_cost: 3 });
    assert_eq!(pair_bruteforce(&i).unwrap(), pair_greedy(&i));
}

#[test]
fn crossing_payments_cancel() {
    let i = inst(11, &[0, 6], &[7, 1]);
    assert_eq!(i.total(&[0, 1]), 13);
    let g = pair_greedy(&i);
    assert_eq!(g.total_cost, 2);
    let pairs: Vec<_> = g.pairs(&i).collect();
    assert_eq!(pairs, vec![(ProcessId(0), ProcessId(1)), (ProcessId(6), ProcessId(7))]);
    assert_eq!(pair_bruteforce(&i).unwrap().total_cost, 2);
}

#[test]
fn oracle_refuses_large_q() {
    let v: Vec<u32> = (0..10).collect();
    assert!(matches!(pair_bruteforce(&inst(12, &v, &v)), Err(CancelError::TooLarge(10))));
    assert!(PairingInstance::new(CycleTopology::ring(4), ids(&[0]), ids(&[])).is_err());
    assert!(PairingInstance::new(CycleTopology::ring(4), ids(&[9]), ids(&[0])).is_err());
}

#[test]
fn csv_roundtrip() {
    let i = PairingInstance::new(CycleTopology::new(ids(&[2, 0, 3, 1])), ids(&[0, 3]), ids(&[1, 2])).unwrap();
    let text = i.to_csv();
    assert!(text.starts_with("cycle,2 0 3 1\nsource,sink\n"));
    let back = PairingInstance::from_csv(&text).unwrap();
    assert_eq!(back.sources, i.sources);
    assert_eq!(back.sinks, i.sinks);
    assert_eq!(pair_greedy(&back), pair_greedy(&i));
    assert!(PairingInstance::from_csv("cycle,0 0\nsource,sink\n").is_err());
}

/// Every multiset of Q sources and Q sinks on small rings.
#[test]
fn greedy_matches_oracle_exhaustively_small() {
    for n in 2..=6usize {
        for q in 1..=3usize {
            let total = n.pow(2 * q as u32);
            for code in 0..total {
                let mut c = code;
                let mut pick = || {
                    let v = (c % n) as u32;
                    c /= n;
                    v
                };
                let a: Vec<u32> = (0..q).map(|_| pick()).collect();
                let b: Vec<u32> = (0..q).map(|_| pick()).collect();
                let i = inst(n, &a, &b);
                let g = pair_greedy(&i);
                assert_eq!(g.total_cost, pair_bruteforce(&i).unwrap().total_cost, "N={n} {a:?} {b:?}");
                assert!(improving_swaps(&i, &g).is_empty());
            }
        }
    }
}

#[test]
fn greedy_matches_oracle_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let n = rng.gen_range(2..=12usize);
        let q = rng.gen_range(1..=7usize);
        let a: Vec<u32> = (0..q).map(|_| rng.gen_range(0..n as u32)).collect();
        let b: Vec<u32> = (0..q).map(|_| rng.gen_range(0..n as u32)).collect();
        let i = inst(n, &a, &b);
        assert_eq!(pair_greedy(&i).total_cost, pair_bruteforce(&i).unwrap().total_cost, "N={n} {a:?} {b:?}");
    }
}

proptest! {
    #[test]
    fn oracle_is_a_lower_bound(n in 2usize..10, raw in proptest::collection::vec((0u32..10, 0u32..10), 1..6), rot in 0usize..6) {
        let a: Vec<u32> = raw.iter().map(|x| x.0 % n as u32).collect();
        let b: Vec<u32> = raw.iter().map(|x| x.1 % n as u32).collect();
        let i = inst(n, &a, &b);
        let best = pair_bruteforce(&i).unwrap();
        let q = a.len();
        let rotated: Vec<usize> = (0..q).map(|k| (k + rot) % q).collect();
        prop_assert!(best.total_cost <= i.total(&rotated));
        prop_assert_eq!(best.total_cost, i.total(&best.assignment));
    }
}

#[test]
fn dp_oracle_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.gen_range(2..=12usize);
        let q = rng.gen_range(1..=7usize);
        let a: Vec<u32> = (0..q).map(|_| rng.gen_range(0..n as u32)).collect();
        let b: Vec<u32> = (0..q).map(|_| rng.gen_range(0..n as u32)).collect();
        let i = inst(n, &a, &b);
        assert_eq!(min_cost_dp(&i), pair_bruteforce(&i).unwrap().total_cost);
    }
}

#[test]
fn sweep_counts_rotation_classes() {
    let r = exhaustive_sweep(4, 2);
    assert!(r.mismatches.is_empty());
    // N=2, Q=1: source {0} (rotation class of {1}) against sinks {0} and {1}
    let small = exhaustive_sweep(2, 1);
    assert_eq!(small.instances, 2);
    assert!(exhaustive_sweep(7, 4).mismatches.is_empty());
}
