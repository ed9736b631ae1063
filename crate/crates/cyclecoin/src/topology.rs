use std::collections::BTreeSet;

use simnet::ProcessId;

/// A directed N-cycle over the processes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleTopology {
    order: Vec<ProcessId>,
    pos: Vec<usize>,
}

impl CycleTopology {
    /// `order[k] -> order[k+1]` are the edges. Panics unless `order` is a permutation of 0..N.
    pub fn new(order: Vec<ProcessId>) -> Self {
        let n = order.len();
        assert!(n >= 2, "a cycle needs two processes");
        let mut pos = vec![usize::MAX; n];
        for (k, p) in order.iter().enumerate() {
            assert!(p.index() < n && pos[p.index()] == usize::MAX, "not a permutation");
            pos[p.index()] = k;
        }
        CycleTopology { order, pos }
    }

    /// 0 -> 1 -> ... -> N-1 -> 0.
    pub fn ring(n: usize) -> Self {
        Self::new((0..n).map(ProcessId::from).collect())
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[ProcessId] {
        &self.order
    }

    pub fn position(&self, p: ProcessId) -> usize {
        self.pos[p.index()]
    }

    pub fn succ(&self, p: ProcessId) -> ProcessId {
        self.order[(self.pos[p.index()] + 1) % self.n()]
    }

    /// Edges from a to b along the cycle; 0 when a == b.
    pub fn dist(&self, a: ProcessId, b: ProcessId) -> u64 {
        let n = self.n();
        ((self.pos[b.index()] + n - self.pos[a.index()]) % n) as u64
    }

    /// a inclusive, b exclusive.
    pub fn path(&self, a: ProcessId, b: ProcessId) -> Vec<ProcessId> {
        let mut out = Vec::new();
        let mut q = a;
        while q != b {
            out.push(q);
            q = self.succ(q);
        }
        out
    }

    /// Next process after `p` that is not deleted.
    pub fn succ_alive(&self, p: ProcessId, deleted: &BTreeSet<ProcessId>) -> ProcessId {
        let mut q = self.succ(p);
        while deleted.contains(&q) && q != p {
            q = self.succ(q);
        }
        q
    }

    /// True when `to` follows `from` with only deleted processes in between,
    /// without passing `stop`.
    pub fn next_alive_is(&self, from: ProcessId, to: ProcessId, stop: ProcessId, deleted: &BTreeSet<ProcessId>) -> bool {
        let mut q = self.succ(from);
        loop {
            if q == to {
                return to != stop;
            }
            if q == stop || !deleted.contains(&q) {
                return false;
            }
            q = self.succ(q);
        }
    }
}
