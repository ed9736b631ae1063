use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use simnet::ProcessId;

use crate::exec::{execute_hop_payment, HopConfig, HopStatus, Route};
use crate::topology::bfs_distances;
use crate::{gen_random_cycles, HopError, HopGraph};

/// One sampled transaction of a scaling run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopSample {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub pair: usize,
    pub a: u32,
    pub b: u32,
    /// D, the hop-graph distance.
    pub d: u64,
    pub hops: usize,
    /// Shortest path in the undirected union of the cycles.
    pub undirected: u64,
    pub messages: u64,
    pub paid: bool,
}

/// Balanced random K-permutation system: `pairs` random transactions, each
/// executed as its own macro round.
pub fn hop_experiment(n: usize, k: usize, seed: u64, pairs: usize, coin_f: usize) -> Result<Vec<HopSample>, HopError> {
    let cycles = Arc::new(gen_random_cycles(n, k, seed)?);
    let graph = HopGraph::balanced(cycles.clone());
    let adj = cycles.undirected();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let cfg = HopConfig { coin_f, transcript: false, seed, ..HopConfig::default() };
    let mut out = Vec::with_capacity(pairs);
    for pair in 0..pairs {
        let a = ProcessId::from(rng.gen_range(0..n));
        let mut b = ProcessId::from(rng.gen_range(0..n - 1));
        if b >= a {
            b = ProcessId(b.0 + 1);
        }
        let path = graph.shortest_path(a, b)?;
        let route = Route::from_path(&path);
        let run = execute_hop_payment(cycles.clone(), route, &BTreeMap::new(), &cfg)?;
        out.push(HopSample {
            n,
            k,
            seed,
            pair,
            a: a.0,
            b: b.0,
            d: path.len(),
            hops: path.hops(),
            undirected: bfs_distances(&adj, a)[b.index()],
            messages: run.messages(),
            paid: run.status() == HopStatus::Paid,
        });
    }
    Ok(out)
}

/// CSV with a header row.
pub fn samples_to_csv(samples: &[HopSample]) -> Result<String, HopError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s)?;
    }
    let bytes = w.into_inner().map_err(|e| HopError::Topology(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
