use std::collections::BTreeSet;
use std::sync::Arc;

use cyclecoin::CycleTopology;
use hopnet::{
    bfs_distances, diameter, gen_binary_search_cycle, gen_random_cycles, CycleSet, HopError, HopGraph, Leg,
};
use simnet::ProcessId;

fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

fn cycle(ids: &[u32]) -> CycleTopology {
    CycleTopology::new(ids.iter().map(|i| p(*i)).collect())
}

fn has_edge(c: &CycleTopology, a: u32, b: u32) -> bool {
    c.succ(p(a)) == p(b)
}

#[test]
fn binary_search_cycle_for_29() {
    let c = gen_binary_search_cycle(29).unwrap();
    assert!(has_edge(&c, 0, 14));
    assert!(has_edge(&c, 14, 21));
    assert!(has_edge(&c, 13, 6));
}

#[test]
fn binary_search_cycle_is_a_permutation() {
    // CycleTopology::new panics on anything else
    for n in 3..400 {
        let c = gen_binary_search_cycle(n).unwrap();
        assert_eq!(c.n(), n);
    }
    assert_eq!(gen_binary_search_cycle(3).unwrap().order().len(), 3);
    assert!(gen_binary_search_cycle(2).is_err());
}

#[test]
fn random_cycles_shape() {
    let s = gen_random_cycles(8, 2, 7).unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|c| c.n() == 8));
    for i in 0..2 {
        let (fwd, back) = (s.get(2 * i), s.get(2 * i + 1));
        for q in 0..8 {
            assert_eq!(back.succ(fwd.succ(p(q))), p(q));
        }
    }
    assert_eq!(s, gen_random_cycles(8, 2, 7).unwrap());
    assert_ne!(s, gen_random_cycles(8, 2, 8).unwrap());
    assert!(gen_random_cycles(8, 1, 7).is_err());
}

#[test]
fn topology_text_roundtrip() {
    let s = gen_random_cycles(10, 3, 1).unwrap();
    assert_eq!(CycleSet::from_text(&s.to_text()).unwrap(), s);
    assert!(matches!(CycleSet::from_text("0 1 2\n0 1 1\n"), Err(HopError::Topology(_))));
    assert!(matches!(CycleSet::from_text("0 1 2\n0 1 2 3\n"), Err(HopError::Topology(_))));
}

#[test]
fn single_cycle_without_intermediaries_has_no_hops() {
    let cycles = Arc::new(CycleSet::new(vec![CycleTopology::ring(5)]).unwrap());
    let g = HopGraph::build(cycles, &[vec![1; 5]], &BTreeSet::new()).unwrap();
    assert_eq!(g.hop_edge_count(), 0);
    assert_eq!(g.step_edge_count(), 5);
    let path = g.shortest_path(p(1), p(4)).unwrap();
    assert_eq!(path.len(), 3);
    assert_eq!(path.hops(), 0);
}

#[test]
fn balanced_system_hops_everywhere() {
    let cycles = Arc::new(gen_random_cycles(9, 2, 3).unwrap());
    let g = HopGraph::balanced(cycles);
    // each of the 4·9 vertices hops to the 3 other cycles
    assert_eq!(g.hop_edge_count(), 4 * 9 * 3);
    assert_eq!(g.vertex_count(), 36);
}

#[test]
fn adjacent_payee_is_one_step() {
    let cycles = Arc::new(gen_random_cycles(9, 2, 3).unwrap());
    let g = HopGraph::balanced(cycles.clone());
    let a = p(4);
    let b = cycles.get(1).succ(a);
    let path = g.shortest_path(a, b).unwrap();
    assert_eq!(path.len(), 1);
}

fn figure_three() -> HopGraph {
    let cycles = CycleSet::new(vec![
        cycle(&[0, 1, 2, 3, 4, 5]),
        cycle(&[5, 2, 4, 1, 0, 3]),
        cycle(&[4, 1, 2, 3, 5, 0]),
    ])
    .unwrap();
    let mut balances = vec![vec![0; 6]; 3];
    balances[0][4] = 1;
    balances[1][5] = 1;
    balances[2][2] = 1;
    let trusted = BTreeSet::from([p(5), p(2)]);
    HopGraph::build(Arc::new(cycles), &balances, &trusted).unwrap()
}

#[test]
fn figure_three_route() {
    let g = figure_three();
    // hops into the middle cycle at P5 (from the other two) and into the outer at P2
    assert_eq!(g.hop_edge_count(), 4);
    assert_eq!(g.start_set(p(4)), vec![0]);
    let drawn = [(0, 4), (0, 5), (1, 5), (1, 2), (2, 2), (2, 3)];
    for w in drawn.windows(2) {
        let (u, v) = ((w[0].0, p(w[0].1)), (w[1].0, p(w[1].1)));
        assert!(g.neighbors(u).contains(&v), "{u:?} -> {v:?}");
    }
    let path = g.shortest_path(p(4), p(3)).unwrap();
    assert_eq!(path.len(), 5);
}

#[test]
fn legs_split_at_hops() {
    let g = figure_three();
    let path = hopnet::HopPath {
        vertices: vec![(0, p(4)), (0, p(5)), (1, p(5)), (1, p(2)), (2, p(2)), (2, p(3))],
    };
    assert_eq!(path.hops(), 2);
    assert_eq!(
        path.legs(),
        vec![
            Leg { cycle: 0, from: p(4), to: p(5), steps: 1 },
            Leg { cycle: 1, from: p(5), to: p(2), steps: 1 },
            Leg { cycle: 2, from: p(2), to: p(3), steps: 1 },
        ]
    );
    assert!(g.shortest_path(p(4), p(4)).is_err());
    assert!(matches!(g.shortest_path(p(0), p(3)), Err(HopError::NoFunds(_))));
}

#[test]
fn payer_without_funds_is_reported() {
    let cycles = Arc::new(CycleSet::new(vec![CycleTopology::ring(4), CycleTopology::ring(4)]).unwrap());
    let g = HopGraph::build(cycles.clone(), &[vec![1, 0, 0, 0], vec![0; 4]], &BTreeSet::new()).unwrap();
    assert_eq!(g.shortest_path(p(0), p(2)).unwrap().len(), 2);
    let g = HopGraph::build(cycles, &[vec![0; 4], vec![0; 4]], &BTreeSet::new()).unwrap();
    assert!(matches!(g.shortest_path(p(0), p(2)), Err(HopError::NoFunds(_))));
}

#[test]
fn path_doubling_bound_on_random_systems() {
    for seed in 0..3 {
        let cycles = Arc::new(gen_random_cycles(64, 2, seed).unwrap());
        let g = HopGraph::balanced(cycles.clone());
        let adj = cycles.undirected();
        for a in (0..64).step_by(7) {
            let dist = bfs_distances(&adj, p(a));
            for b in 0..64 {
                if a == b {
                    continue;
                }
                let path = g.shortest_path(p(a), p(b)).unwrap();
                assert!(path.len() <= 2 * dist[b as usize] + path.hops() as u64);
                // one in-cycle leg per undirected edge plus the switches between them
                assert!(path.len() <= 2 * dist[b as usize]);
            }
        }
    }
}

#[test]
fn random_union_has_small_diameter() {
    let cycles = gen_random_cycles(256, 2, 11).unwrap();
    let d = diameter(&cycles.undirected());
    // 4-regular random graphs on 256 vertices sit near log_3(256) ≈ 5
    assert!((4..=9).contains(&d), "diameter {d}");
}
