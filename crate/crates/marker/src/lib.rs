//! The marker game: a single token moves between processes one round at a
//! time, and at most one honest process may believe it holds it.
//!
//! A solution implements [`MarkerNode`]. [`MarkerProcess`] hosts a node in a
//! simnet network, feeds it the per-round inputs and records what it decided
//! at the end of each round. [`check_marker_conditions`] audits the records.

use std::collections::{BTreeMap, BTreeSet};

use simnet::{
    Adversary, Ctx, Delivery, MetricsLedger, Network, NetworkConfig, Process, ProcessId, RoundIndex, SimError,
    StepIndex, Transcript,
};

mod bb;
mod quorum;

pub use bb::BbMarker;
pub use quorum::{broadcasters, MarkerProof, QuorumMarker, SelfPay};

/// What a process decided at the end of a round about the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Unmarked,
    /// Was marked and stays marked (self-directed input).
    Kept,
    /// Newly marked; `from` is the decided predecessor, `None` for dishonest-or-⊥.
    Received { from: Option<ProcessId> },
}

impl Mark {
    pub fn is_marked(self) -> bool {
        !matches!(self, Mark::Unmarked)
    }
}

/// One per-process marker solution.
pub trait MarkerNode: Clone {
    fn round_len(&self) -> StepIndex;

    /// Called at local step 0 of every round, at the last local step, on
    /// every step with mail, and on any step the node asked to be woken at.
    /// `input` is the target this process would pay if it is marked.
    fn on_step(&mut self, round: RoundIndex, local: StepIndex, input: ProcessId, inbox: &[Delivery], ctx: &mut Ctx<'_>);

    /// Called right after the last local step of `round`.
    fn end_round(&mut self, round: RoundIndex, ctx: &mut Ctx<'_>) -> Mark;

    fn is_marked(&self) -> bool;
}

/// Hosts a [`MarkerNode`] as a simnet process.
#[derive(Debug, Clone)]
pub struct MarkerProcess<M> {
    pub node: M,
    /// Target per round; rounds past the end default to self.
    pub inputs: Vec<ProcessId>,
    pub marked_at_start: Vec<bool>,
    pub marks: Vec<Mark>,
}

impl<M: MarkerNode> MarkerProcess<M> {
    pub fn new(node: M, inputs: Vec<ProcessId>) -> Self {
        MarkerProcess { node, inputs, marked_at_start: Vec::new(), marks: Vec::new() }
    }
}

impl<M: MarkerNode> Process for MarkerProcess<M> {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        let t = ctx.step();
        let len = self.node.round_len();
        let (round, local) = (t / len, t % len);
        if local == 0 {
            self.marked_at_start.push(self.node.is_marked());
            ctx.wake_at(t + len - 1);
            ctx.wake_at(t + len);
        }
        let input = self.inputs.get(round as usize).copied().unwrap_or(ctx.me());
        self.node.on_step(round, local, input, inbox, ctx);
        if local == len - 1 {
            let mark = self.node.end_round(round, ctx);
            self.marks.push(mark);
        }
    }
}

/// Per-round view of a finished game, restricted to honest processes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundRecord {
    pub marked_before: BTreeSet<ProcessId>,
    pub inputs: BTreeMap<ProcessId, ProcessId>,
    pub marks: BTreeMap<ProcessId, Mark>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GameRecord {
    pub honest: BTreeSet<ProcessId>,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Consistency { round: RoundIndex, marked: Vec<ProcessId> },
    Liveness { round: RoundIndex, payer: ProcessId, target: ProcessId },
    Impersonation { round: RoundIndex, process: ProcessId, claimed: ProcessId },
}

/// Empty iff every round satisfies consistency, liveness and non-impersonation.
pub fn check_marker_conditions(record: &GameRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, r) in record.rounds.iter().enumerate() {
        let round = i as RoundIndex;
        if r.marked_before.len() > 1 {
            out.push(Violation::Consistency { round, marked: r.marked_before.iter().copied().collect() });
        }
        let after: Vec<ProcessId> = r.marks.iter().filter(|(_, m)| m.is_marked()).map(|(p, _)| *p).collect();
        if after.len() > 1 {
            out.push(Violation::Consistency { round: round + 1, marked: after });
        }
        for m in &r.marked_before {
            let target = r.inputs.get(m).copied().unwrap_or(*m);
            if !record.honest.contains(&target) {
                continue;
            }
            let expect = if target == *m { Mark::Kept } else { Mark::Received { from: Some(*m) } };
            if r.marks.get(&target) != Some(&expect) {
                out.push(Violation::Liveness { round, payer: *m, target });
            }
        }
        for (p, mark) in &r.marks {
            let claimed = match mark {
                Mark::Kept => *p,
                Mark::Received { from: Some(d) } => *d,
                _ => continue,
            };
            if !record.honest.contains(&claimed) {
                continue;
            }
            let ok = r.marked_before.contains(&claimed) && r.inputs.get(&claimed) == Some(p);
            if !ok {
                out.push(Violation::Impersonation { round, process: *p, claimed });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GameOutcome<M> {
    pub record: GameRecord,
    pub metrics: MetricsLedger,
    pub transcript: Transcript,
    pub nodes: BTreeMap<ProcessId, M>,
}

impl<M> GameOutcome<M> {
    pub fn violations(&self) -> Vec<Violation> {
        check_marker_conditions(&self.record)
    }
}

/// Collects the honest records of a finished network.
pub fn record_of<M: MarkerNode, A: Adversary>(net: &Network<MarkerProcess<M>, A>, rounds: usize) -> GameRecord {
    let mut record = GameRecord { honest: net.honest(), rounds: vec![RoundRecord::default(); rounds] };
    for (p, host) in net.honest_processes() {
        for (i, r) in record.rounds.iter_mut().enumerate() {
            if host.marked_at_start.get(i) == Some(&true) {
                r.marked_before.insert(p);
            }
            r.inputs.insert(p, host.inputs.get(i).copied().unwrap_or(p));
            r.marks.insert(p, host.marks.get(i).copied().unwrap_or(Mark::Unmarked));
        }
    }
    record
}

/// Plays a K-round game. `inputs[p][i]` is the target of process p at round i.
pub fn run_marker_game<M: MarkerNode, A: Adversary>(
    cfg: NetworkConfig,
    adversary: A,
    inputs: &[Vec<ProcessId>],
    mut make: impl FnMut(ProcessId) -> M,
) -> Result<GameOutcome<M>, SimError> {
    let rounds = cfg.rounds as usize;
    let len = make(ProcessId(0)).round_len();
    if cfg.steps_per_round != len {
        return Err(SimError::Config(format!("steps_per_round {} but the solution needs {len}", cfg.steps_per_round)));
    }
    let mut net = Network::new(cfg, adversary, |p| {
        MarkerProcess::new(make(p), inputs.get(p.index()).cloned().unwrap_or_default())
    })?;
    net.run()?;
    Ok(GameOutcome {
        record: record_of(&net, rounds),
        metrics: net.metrics().clone(),
        transcript: net.transcript().clone(),
        nodes: net.honest_processes().map(|(p, h)| (p, h.node.clone())).collect(),
    })
}

/// Inputs where the holder of round i pays `targets[i]`; everyone else points at itself.
pub fn chain_inputs(n: usize, targets: &[ProcessId]) -> Vec<Vec<ProcessId>> {
    (0..n)
        .map(|p| {
            let me = ProcessId::from(p);
            let mut holder = ProcessId(0);
            targets
                .iter()
                .map(|t| {
                    let input = if holder == me { *t } else { me };
                    holder = *t;
                    input
                })
                .collect()
        })
        .collect()
}
