use std::collections::VecDeque;
use std::sync::Arc;

use cyclecoin::CycleTopology;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simnet::ProcessId;

use crate::HopError;

/// Directed N-cycles over the same processes, indexed by k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSet {
    cycles: Vec<Arc<CycleTopology>>,
}

impl CycleSet {
    pub fn new(cycles: Vec<CycleTopology>) -> Result<Self, HopError> {
        let Some(first) = cycles.first() else { return Err(HopError::Topology("no cycles".into())) };
        let n = first.n();
        if cycles.iter().any(|c| c.n() != n) {
            return Err(HopError::Topology("cycles differ in length".into()));
        }
        Ok(CycleSet { cycles: cycles.into_iter().map(Arc::new).collect() })
    }

    pub fn n(&self) -> usize {
        self.cycles[0].n()
    }

    /// K', the number of directed cycles.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn get(&self, k: usize) -> &Arc<CycleTopology> {
        &self.cycles[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<CycleTopology>> {
        self.cycles.iter()
    }

    /// One cycle per line, ids separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.cycles {
            let ids: Vec<String> = c.order().iter().map(|p| p.0.to_string()).collect();
            s.push_str(&ids.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, HopError> {
        let mut cycles = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ids = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map(ProcessId))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HopError::Topology(format!("line {}: {e}", i + 1)))?;
            if !is_permutation(&ids) {
                return Err(HopError::Topology(format!("line {}: not a permutation of 0..{}", i + 1, ids.len())));
            }
            cycles.push(CycleTopology::new(ids));
        }
        Self::new(cycles)
    }

    /// Adjacency of the undirected union, duplicates removed.
    pub fn undirected(&self) -> Vec<Vec<u32>> {
        let n = self.n();
        let mut adj = vec![Vec::new(); n];
        for c in &self.cycles {
            for p in c.order() {
                let q = c.succ(*p);
                adj[p.index()].push(q.0);
                adj[q.index()].push(p.0);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

fn is_permutation(ids: &[ProcessId]) -> bool {
    let mut seen = vec![false; ids.len()];
    ids.len() >= 2
        && ids.iter().all(|p| p.index() < seen.len() && !std::mem::replace(&mut seen[p.index()], true))
}

/// Hop counts from `src` in an undirected adjacency list; `u64::MAX` if unreachable.
pub fn bfs_distances(adj: &[Vec<u32>], src: ProcessId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; adj.len()];
    let mut q = VecDeque::new();
    dist[src.index()] = 0;
    q.push_back(src.0);
    while let Some(u) = q.pop_front() {
        let du = dist[u as usize];
        for &v in &adj[u as usize] {
            if dist[v as usize] == u64::MAX {
                dist[v as usize] = du + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Exact diameter by BFS from every vertex.
pub fn diameter(adj: &[Vec<u32>]) -> u64 {
    (0..adj.len()).map(|s| bfs_distances(adj, ProcessId::from(s)).into_iter().max().unwrap_or(0)).max().unwrap_or(0)
}

/// K uniformly random cyclic orders of 0..N, each in both orientations.
/// Cycle 2i is permutation i and 2i+1 its reverse.
pub fn gen_random_cycles(n: usize, k: usize, seed: u64) -> Result<CycleSet, HopError> {
    if k < 2 || n < 4 {
        return Err(HopError::Topology(format!("random cycles need K >= 2 and N >= 4, got K={k} N={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cycles = Vec::with_capacity(2 * k);
    for _ in 0..k {
        let mut order: Vec<ProcessId> = (0..n).map(ProcessId::from).collect();
        order.shuffle(&mut rng);
        let mut rev = order.clone();
        rev.reverse();
        cycles.push(CycleTopology::new(order));
        cycles.push(CycleTopology::new(rev));
    }
    CycleSet::new(cycles)
}

/// Median-path construction: from `cur` in the range [lo, hi), jump to the
/// median, spawning a new path at median-1 for the left half.
pub fn gen_binary_search_cycle(n: usize) -> Result<CycleTopology, HopError> {
    if n < 3 {
        return Err(HopError::Topology(format!("binary-search cycle needs N >= 3, got {n}")));
    }
    let mut covered = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([(0usize, 0usize, n)]);
    while let Some((start, mut lo, hi)) = queue.pop_front() {
        let mut cur = start;
        if !std::mem::replace(&mut covered[cur], true) {
            order.push(cur);
        }
        loop {
            let m = (lo + hi) / 2;
            if m == lo || m == cur {
                break;
            }
            if !std::mem::replace(&mut covered[m], true) {
                order.push(m);
            }
            if m - 1 > lo {
                queue.push_back((m - 1, lo, m - 1));
            }
            cur = m;
            lo = m;
        }
    }
    order.extend((0..n).filter(|p| !covered[*p]));
    Ok(CycleTopology::new(order.into_iter().map(ProcessId::from).collect()))
}
