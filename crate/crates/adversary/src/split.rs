use std::collections::{BTreeMap, BTreeSet};

use marker::{chain_inputs, run_marker_game, MarkerNode, MarkerProcess, Violation};
use simnet::{NetworkConfig, NoAdversary, ProcessId, SimError};

use crate::gallery::Gallery;

/// Result of one two-copy double spend by the round-0 holder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitReport {
    /// Processes that send or receive anything when the holder pays n₁ (resp. n₂)
    /// in an all-honest reference run.
    pub x: [BTreeSet<ProcessId>; 2],
    /// X(n₁) ∩ X(n₂) without the holder.
    pub d: BTreeSet<ProcessId>,
    /// |Z| exceeded f, so nothing was run.
    pub skipped: bool,
    /// Honest processes newly marked after the attacked round.
    pub accepted: Vec<ProcessId>,
    pub violations: Vec<Violation>,
}

impl SplitReport {
    pub fn double_spent(&self) -> bool {
        self.accepted.len() > 1
    }
}

/// Processes touched by an all-honest run where P0 pays `target` once.
pub fn involvement<M: MarkerNode>(
    n: usize,
    f: usize,
    target: ProcessId,
    make: &impl Fn(ProcessId) -> M,
) -> Result<BTreeSet<ProcessId>, SimError> {
    let len = make(ProcessId(0)).round_len();
    let out = run_marker_game(NetworkConfig::new(n, f, len, 1), NoAdversary, &chain_inputs(n, &[target]), make)?;
    Ok(out.transcript.events.iter().flat_map(|e| [e.sender, e.recipient]).collect())
}

/// Corrupts `z` (which should contain the holder P0) and runs two copies of
/// the honest code, one paying `n1` and one paying `n2`. Honest replies are
/// routed to a copy by which reference run their sender appears in.
pub fn split_attack<M: MarkerNode>(
    n: usize,
    f: usize,
    z: &BTreeSet<ProcessId>,
    n1: ProcessId,
    n2: ProcessId,
    make: impl Fn(ProcessId) -> M,
) -> Result<SplitReport, SimError> {
    let x = [involvement(n, f, n1, &make)?, involvement(n, f, n2, &make)?];
    let d: BTreeSet<ProcessId> = x[0].intersection(&x[1]).copied().filter(|p| *p != ProcessId(0)).collect();
    let mut report = SplitReport { x: x.clone(), d, skipped: z.len() > f, accepted: Vec::new(), violations: Vec::new() };
    if report.skipped {
        return Ok(report);
    }
    let rows = [chain_inputs(n, &[n1]), chain_inputs(n, &[n2])];
    let pairs: BTreeMap<ProcessId, _> = z
        .iter()
        .map(|p| {
            let copy = |s: usize| MarkerProcess::new(make(*p), rows[s][p.index()].clone());
            (*p, (copy(0), copy(1)))
        })
        .collect();
    let demux = [&x[0] - z, &x[1] - z];
    let adv = Gallery::split(pairs, Some(demux));
    let len = make(ProcessId(0)).round_len();
    // honest processes are never the holder in round 0, so their inputs are self
    let out = run_marker_game(NetworkConfig::new(n, f, len, 1), adv, &rows[0], &make)?;
    report.accepted =
        out.record.rounds[0].marks.iter().filter(|(_, m)| m.is_marked()).map(|(p, _)| *p).collect();
    report.violations = out.violations();
    Ok(report)
}
