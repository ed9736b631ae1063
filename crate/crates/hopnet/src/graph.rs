use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use simnet::ProcessId;

use crate::{CycleSet, HopError};

/// A vertex of the hop graph: process `p` on cycle `k`.
pub type Vertex = (usize, ProcessId);

/// The round graph over (cycle, process) pairs: steps follow each cycle,
/// hops switch cycle at a trusted process that holds value on the cycle it
/// switches to.
#[derive(Debug, Clone)]
pub struct HopGraph {
    cycles: Arc<CycleSet>,
    /// `value[k][p] > 0`.
    funded: Vec<Vec<bool>>,
    trusted: Vec<bool>,
}

impl HopGraph {
    /// `balances[k][p]` is Value(C_k, P_p).
    pub fn build(cycles: Arc<CycleSet>, balances: &[Vec<u64>], trusted: &BTreeSet<ProcessId>) -> Result<Self, HopError> {
        let n = cycles.n();
        if balances.len() != cycles.len() || balances.iter().any(|b| b.len() != n) {
            return Err(HopError::Topology("balances must be K' rows of N".into()));
        }
        let funded = balances.iter().map(|row| row.iter().map(|v| *v > 0).collect()).collect();
        let trusted = (0..n).map(|p| trusted.contains(&ProcessId::from(p))).collect();
        Ok(HopGraph { cycles, funded, trusted })
    }

    /// Every process holds one unit on every cycle and every process is trusted.
    pub fn balanced(cycles: Arc<CycleSet>) -> Self {
        let (n, k) = (cycles.n(), cycles.len());
        HopGraph { cycles, funded: vec![vec![true; n]; k], trusted: vec![true; n] }
    }

    pub fn cycles(&self) -> &Arc<CycleSet> {
        &self.cycles
    }

    pub fn n(&self) -> usize {
        self.cycles.n()
    }

    pub fn vertex_count(&self) -> usize {
        self.n() * self.cycles.len()
    }

    fn index(&self, (k, p): Vertex) -> usize {
        k * self.n() + p.index()
    }

    fn vertex(&self, i: usize) -> Vertex {
        (i / self.n(), ProcessId::from(i % self.n()))
    }

    pub fn is_funded(&self, k: usize, p: ProcessId) -> bool {
        self.funded[k][p.index()]
    }

    /// Out-neighbours in ascending (k, p) order.
    pub fn neighbors(&self, (k, p): Vertex) -> Vec<Vertex> {
        let mut out = vec![(k, self.cycles.get(k).succ(p))];
        if self.trusted[p.index()] {
            out.extend((0..self.cycles.len()).filter(|k2| *k2 != k && self.funded[*k2][p.index()]).map(|k2| (k2, p)));
        }
        out.sort_unstable();
        out
    }

    pub fn step_edge_count(&self) -> usize {
        self.vertex_count()
    }

    pub fn hop_edge_count(&self) -> usize {
        (0..self.vertex_count()).map(|i| self.neighbors(self.vertex(i)).len() - 1).sum()
    }

    /// Cycles on which `a` can start a payment.
    pub fn start_set(&self, a: ProcessId) -> Vec<usize> {
        (0..self.cycles.len()).filter(|k| self.funded[*k][a.index()]).collect()
    }

    /// Breadth-first search from every funded (k, a); among the closest
    /// (k', b) the smallest k' wins, and each vertex keeps the parent that
    /// discovered it first.
    pub fn shortest_path(&self, a: ProcessId, b: ProcessId) -> Result<HopPath, HopError> {
        if a == b {
            return Err(HopError::SelfPayment(a));
        }
        let starts = self.start_set(a);
        if starts.is_empty() {
            return Err(HopError::NoFunds(a));
        }
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut parent = vec![u32::MAX; self.vertex_count()];
        let mut q = VecDeque::new();
        for k in starts {
            let i = self.index((k, a));
            dist[i] = 0;
            q.push_back(i);
        }
        while let Some(u) = q.pop_front() {
            for v in self.neighbors(self.vertex(u)) {
                let vi = self.index(v);
                if dist[vi] == u32::MAX {
                    dist[vi] = dist[u] + 1;
                    parent[vi] = u as u32;
                    q.push_back(vi);
                }
            }
        }
        let end = (0..self.cycles.len())
            .map(|k| self.index((k, b)))
            .filter(|i| dist[*i] != u32::MAX)
            .min_by_key(|i| (dist[*i], *i))
            .ok_or(HopError::NoPath { a, b })?;
        let mut vertices = vec![self.vertex(end)];
        let mut i = end;
        while parent[i] != u32::MAX {
            i = parent[i] as usize;
            vertices.push(self.vertex(i));
        }
        vertices.reverse();
        Ok(HopPath { vertices })
    }
}

/// A walk in the hop graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopPath {
    pub vertices: Vec<Vertex>,
}

impl HopPath {
    /// D, the number of edges.
    pub fn len(&self) -> u64 {
        self.vertices.len().saturating_sub(1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 2
    }

    pub fn hops(&self) -> usize {
        self.vertices.windows(2).filter(|w| w[0].1 == w[1].1).count()
    }

    pub fn steps(&self) -> usize {
        self.len() as usize - self.hops()
    }

    /// Cut into in-cycle legs at every hop.
    pub fn legs(&self) -> Vec<Leg> {
        let mut legs = Vec::new();
        let Some(&(k0, a)) = self.vertices.first() else { return legs };
        let mut cur = Leg { cycle: k0, from: a, to: a, steps: 0 };
        for w in self.vertices.windows(2) {
            if w[0].1 == w[1].1 {
                legs.push(cur);
                cur = Leg { cycle: w[1].0, from: w[1].1, to: w[1].1, steps: 0 };
            } else {
                cur.to = w[1].1;
                cur.steps += 1;
            }
        }
        legs.push(cur);
        legs
    }
}

/// One in-cycle payment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leg {
    pub cycle: usize,
    pub from: ProcessId,
    pub to: ProcessId,
    pub steps: u64,
}
