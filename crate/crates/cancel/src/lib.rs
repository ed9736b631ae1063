//! Pairing payers with recipients on one cycle so the total walk is short.

use cyclecoin::CycleTopology;
use simnet::ProcessId;
use thiserror::Error;

/// Largest Q the brute-force oracle accepts.
pub const BRUTE_FORCE_MAX_Q: usize = 9;

#[derive(Debug, Error)]
pub enum CancelError {
    #[error("brute force refused: Q={0} exceeds {BRUTE_FORCE_MAX_Q}")]
    TooLarge(usize),
    #[error("{sources} sources but {sinks} sinks")]
    Unbalanced { sources: usize, sinks: usize },
    #[error("process {0} is not on the cycle")]
    Unknown(u32),
    #[error("bad instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct PairingInstance {
    pub cycle: CycleTopology,
    pub sources: Vec<ProcessId>,
    pub sinks: Vec<ProcessId>,
}

/// `assignment[i]` is the sink index paired with source i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub assignment: Vec<usize>,
    pub total_cost: u64,
}

impl Pairing {
    pub fn pairs<'a>(&'a self, inst: &'a PairingInstance) -> impl Iterator<Item = (ProcessId, ProcessId)> + 'a {
        self.assignment.iter().enumerate().map(|(i, j)| (inst.sources[i], inst.sinks[*j]))
    }
}

impl PairingInstance {
    pub fn new(cycle: CycleTopology, sources: Vec<ProcessId>, sinks: Vec<ProcessId>) -> Result<Self, CancelError> {
        if sources.len() != sinks.len() {
            return Err(CancelError::Unbalanced { sources: sources.len(), sinks: sinks.len() });
        }
        if let Some(p) = sources.iter().chain(&sinks).find(|p| p.index() >= cycle.n()) {
            return Err(CancelError::Unknown(p.0));
        }
        Ok(PairingInstance { cycle, sources, sinks })
    }

    pub fn q(&self) -> usize {
        self.sources.len()
    }

    pub fn cost(&self, i: usize, j: usize) -> u64 {
        self.cycle.dist(self.sources[i], self.sinks[j])
    }

    pub fn total(&self, assignment: &[usize]) -> u64 {
        assignment.iter().enumerate().map(|(i, j)| self.cost(i, *j)).sum()
    }

    /// Reads `cycle,<order separated by spaces>` then `source,sink` rows.
    pub fn from_csv(text: &str) -> Result<Self, CancelError> {
        let mut lines = text.splitn(2, '\n');
        let head = lines.next().unwrap_or_default().trim();
        let order = head
            .strip_prefix("cycle,")
            .ok_or_else(|| CancelError::Format("first line must be cycle,<order>".into()))?;
        let order: Vec<ProcessId> = order
            .split_whitespace()
            .map(|t| t.parse::<u32>().map(ProcessId).map_err(|e| CancelError::Format(e.to_string())))
            .collect::<Result<_, _>>()?;
        let mut seen = order.clone();
        seen.sort();
        if seen.iter().enumerate().any(|(i, p)| p.index() != i) || order.len() < 2 {
            return Err(CancelError::Format("cycle order must be a permutation of 0..N".into()));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(lines.next().unwrap_or_default().as_bytes());
        let (mut sources, mut sinks) = (Vec::new(), Vec::new());
        for row in rdr.deserialize::<(u32, u32)>() {
            let (a, b) = row?;
            sources.push(ProcessId(a));
            sinks.push(ProcessId(b));
        }
        Self::new(CycleTopology::new(order), sources, sinks)
    }

    pub fn to_csv(&self) -> String {
        let order: Vec<String> = self.cycle.order().iter().map(|p| p.0.to_string()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "sink"]).expect("in-memory write");
        for (a, b) in self.sources.iter().zip(&self.sinks) {
            w.serialize((a.0, b.0)).expect("in-memory write");
        }
        let rows = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8");
        format!("cycle,{}\n{rows}", order.join(" "))
    }
}

/// Lowest unmatched source first, each to its cheapest unmatched sink (lowest index on ties).
pub fn pair_greedy(inst: &PairingInstance) -> Pairing {
    let q = inst.q();
    let mut used = vec![false; q];
    let mut assignment = Vec::with_capacity(q);
    for i in 0..q {
        let j = (0..q).filter(|j| !used[*j]).min_by_key(|j| (inst.cost(i, *j), *j)).expect("q sinks for q sources");
        used[j] = true;
        assignment.push(j);
    }
    let total_cost = inst.total(&assignment);
    Pairing { assignment, total_cost }
}

/// Exact minimum over all Q! bijections, ties to the lexicographically smallest.
pub fn pair_bruteforce(inst: &PairingInstance) -> Result<Pairing, CancelError> {
    let q = inst.q();
    if q > BRUTE_FORCE_MAX_Q {
        return Err(CancelError::TooLarge(q));
    }
    let mut best: Option<Pairing> = None;
    let mut perm: Vec<usize> = Vec::with_capacity(q);
    let mut used = vec![false; q];
    fn rec(inst: &PairingInstance, perm: &mut Vec<usize>, used: &mut [bool], acc: u64, best: &mut Option<Pairing>) {
        let i = perm.len();
        if best.as_ref().is_some_and(|b| acc > b.total_cost) {
            return;
        }
        if i == used.len() {
            // lexicographic enumeration: the first minimum found wins ties
            if best.as_ref().is_none_or(|b| acc < b.total_cost) {
                *best = Some(Pairing { assignment: perm.clone(), total_cost: acc });
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                perm.push(j);
                rec(inst, perm, used, acc + inst.cost(i, j), best);
                perm.pop();
                used[j] = false;
            }
        }
    }
    rec(inst, &mut perm, &mut used, 0, &mut best);
    Ok(best.expect("at least the empty pairing"))
}

/// Minimum total cost by dynamic programming over subsets of sinks.
///
/// A second exact oracle, fast enough for exhaustive sweeps.
pub fn min_cost_dp(inst: &PairingInstance) -> u64 {
    let q = inst.q();
    let mut best = vec![u64::MAX; 1 << q];
    best[0] = 0;
    for mask in 0..(1usize << q) {
        let cur = best[mask];
        if cur == u64::MAX {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == q {
            continue;
        }
        for j in 0..q {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                best[next] = best[next].min(cur + inst.cost(i, j));
            }
        }
    }
    best[(1 << q) - 1]
}

/// Pairs (i, j) of matched indices where exchanging sinks would lower the total.
pub fn improving_swaps(inst: &PairingInstance, p: &Pairing) -> Vec<(usize, usize)> {
    let a = &p.assignment;
    let mut out = Vec::new();
    for i in 0..a.len() {
        for k in (i + 1)..a.len() {
            if inst.cost(i, a[k]) + inst.cost(k, a[i]) < inst.cost(i, a[i]) + inst.cost(k, a[k]) {
                out.push((i, k));
            }
        }
    }
    out
}

/// Result of checking greedy against the exact optimum over many instances.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub instances: u64,
    /// (N, sources, sinks, greedy, optimum) for each disagreement.
    pub mismatches: Vec<(usize, Vec<u32>, Vec<u32>, u64, u64)>,
}

fn multisets(n: u32, q: usize, out: &mut Vec<Vec<u32>>) {
    fn rec(n: u32, q: usize, lo: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for v in lo..n {
            cur.push(v);
            rec(n, q, v, cur, out);
            cur.pop();
        }
    }
    rec(n, q, 0, &mut Vec::new(), out);
}

fn greedy_on(cost: &[[u64; 8]; 8], q: usize) -> u64 {
    let mut used = 0u32;
    let mut total = 0;
    for row in cost.iter().take(q) {
        let (c, j) = (0..q).filter(|j| used & (1 << j) == 0).map(|j| (row[j], j)).min().expect("free sink");
        used |= 1 << j;
        total += c;
    }
    total
}

fn dp_on(cost: &[[u64; 8]; 8], q: usize, best: &mut [u64]) -> u64 {
    best.fill(u64::MAX);
    best[0] = 0;
    for mask in 0..(1usize << q) {
        let cur = best[mask];
        let i = mask.count_ones() as usize;
        if cur == u64::MAX || i == q {
            continue;
        }
        for j in 0..q {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                best[next] = best[next].min(cur + cost[i][j]);
            }
        }
    }
    best[(1 << q) - 1]
}

/// True when no rotation of the multiset sorts lexicographically below it.
fn is_rotation_minimal(m: &[u32], n: u32) -> bool {
    (1..n).all(|r| {
        let mut rot: Vec<u32> = m.iter().map(|v| (v + r) % n).collect();
        rot.sort_unstable();
        rot.as_slice() >= m
    })
}

/// Every source multiset and sink multiset of size Q on the ring of size N,
/// for all 2 ≤ N ≤ `max_n` and 1 ≤ Q ≤ `max_q`, up to rotation.
pub fn exhaustive_sweep(max_n: usize, max_q: usize) -> SweepReport {
    let mut report = SweepReport::default();
    for n in 2..=max_n {
        for q in 1..=max_q {
            let mut all = Vec::new();
            multisets(n as u32, q, &mut all);
            let sources: Vec<&Vec<u32>> = all.iter().filter(|m| is_rotation_minimal(m, n as u32)).collect();
            let mut cost = [[0u64; 8]; 8];
            let mut best = vec![u64::MAX; 1 << q];
            for a in &sources {
                for b in &all {
                    for (i, x) in a.iter().enumerate() {
                        for (j, y) in b.iter().enumerate() {
                            cost[i][j] = u64::from((y + n as u32 - x) % n as u32);
                        }
                    }
                    let g = greedy_on(&cost, q);
                    let opt = dp_on(&cost, q, &mut best);
                    report.instances += 1;
                    if g != opt {
                        report.mismatches.push((n, a.to_vec(), b.clone(), g, opt));
                    }
                }
            }
        }
    }
    report
}
