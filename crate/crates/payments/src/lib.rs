//! Payment systems from marker games.
//!
//! A bank of V marker instances runs in parallel, one per unit of supply.
//! A process's balance is the number of instances in which it holds the
//! marker; paying one unit means paying in one of those instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use marker::{Mark, MarkerNode};
use muxer::Mux;
use simnet::{
    Adversary, Ctx, Delivery, MetricsLedger, Network, NetworkConfig, Process, ProcessId, RoundIndex, SimError,
    StepIndex, Transcript,
};

/// Origins of the V instances: `initial[n]` instances start at process n.
pub fn instance_origins(initial: &[u64]) -> Vec<ProcessId> {
    initial.iter().enumerate().flat_map(|(n, v)| std::iter::repeat_n(ProcessId::from(n), *v as usize)).collect()
}

/// One process's view of one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BankRound {
    pub balance: u64,
    pub input: ProcessId,
    /// Instance used to pay, if any.
    pub paid_with: Option<u64>,
    /// Predecessors decided by newly marked instances; `None` is ⊥.
    pub senders: Vec<Option<ProcessId>>,
}

/// Hosts V marker instances for one process.
#[derive(Debug, Clone)]
pub struct BankProcess<M> {
    me: ProcessId,
    instances: Mux<M>,
    inputs: Vec<ProcessId>,
    pub rounds: Vec<BankRound>,
    pub final_balance: u64,
    /// Set when told to pay with an empty balance.
    pub misconfigured: Option<RoundIndex>,
}

impl<M: MarkerNode> BankProcess<M> {
    pub fn new(me: ProcessId, instances: impl IntoIterator<Item = M>, inputs: Vec<ProcessId>) -> Self {
        let mut mux = Mux::new();
        for (v, inst) in instances.into_iter().enumerate() {
            mux.insert(v as u64, inst);
        }
        BankProcess { me, instances: mux, inputs, rounds: Vec::new(), final_balance: 0, misconfigured: None }
    }

    pub fn balance(&self) -> u64 {
        self.instances.iter().filter(|(_, m)| m.is_marked()).count() as u64
    }

    pub fn instances(&self) -> &Mux<M> {
        &self.instances
    }

    fn round_len(&self) -> StepIndex {
        self.instances.iter().next().map(|(_, m)| m.round_len()).unwrap_or(1)
    }
}

impl<M: MarkerNode> Process for BankProcess<M> {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        let t = ctx.step();
        let len = self.round_len();
        let (round, local) = (t / len, t % len);
        if local == 0 {
            let input = self.inputs.get(round as usize).copied().unwrap_or(self.me);
            let balance = self.balance();
            let mut paid_with = None;
            if input != self.me {
                if balance == 0 {
                    self.misconfigured.get_or_insert(round);
                } else {
                    // lowest marked instance pays
                    paid_with = self.instances.iter().find(|(_, m)| m.is_marked()).map(|(v, _)| v);
                }
            }
            self.rounds.push(BankRound { balance, input, paid_with, senders: Vec::new() });
            ctx.wake_at(t + len - 1);
            ctx.wake_at(t + len);
        }
        let Some(cur) = self.rounds.last().cloned() else { return };
        let me = self.me;
        self.instances.service(inbox, ctx, true, |_| None, |v, node, mail, ctx| {
            let input = if cur.paid_with == Some(v) { cur.input } else { me };
            node.on_step(round, local, input, mail, ctx);
        });
        if local == len - 1 {
            let mut senders = Vec::new();
            for (v, node) in self.instances.iter_mut() {
                let mark = ctx.scoped(v, |ctx| node.end_round(round, ctx));
                if let Mark::Received { from } = mark {
                    senders.push(from);
                }
            }
            if let Some(r) = self.rounds.last_mut() {
                r.senders = senders;
            }
            self.final_balance = self.balance();
        }
    }
}

/// Per-round honest records of a finished run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PaymentHistory {
    pub honest: BTreeSet<ProcessId>,
    /// v_{n,0} for every process.
    pub initial: Vec<u64>,
    /// `rounds[i][n]`, honest n only.
    pub rounds: Vec<BTreeMap<ProcessId, BankRound>>,
    /// Honest balances after the last round.
    pub final_balances: BTreeMap<ProcessId, u64>,
}

impl PaymentHistory {
    pub fn supply(&self) -> u64 {
        self.initial.iter().sum()
    }

    /// v_{n,i} for i in 0..=K.
    pub fn balance(&self, n: ProcessId, i: usize) -> Option<u64> {
        if i == self.rounds.len() {
            return self.final_balances.get(&n).copied();
        }
        self.rounds.get(i)?.get(&n).map(|r| r.balance)
    }

    /// One line per (round, honest process): round,process,balance,input,senders.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,process,balance,input,senders\n");
        for (i, r) in self.rounds.iter().enumerate() {
            for (p, b) in r {
                let senders: Vec<String> =
                    b.senders.iter().map(|s| s.map_or_else(|| "bot".to_string(), |p| p.0.to_string())).collect();
                let _ = writeln!(s, "{i},{},{},{},{}", p.0, b.balance, b.input.0, senders.join(" "));
            }
        }
        for (p, b) in &self.final_balances {
            let _ = writeln!(s, "{},{},{b},,", self.rounds.len(), p.0);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PsViolation {
    /// Honest balances exceed the supply, or one went negative.
    S1 { round: usize, honest_total: u64, bound: u64 },
    /// An honest process was listed as sender without targeting the receiver.
    S2 { round: usize, sender: ProcessId, receiver: ProcessId },
    S3 { round: usize, process: ProcessId, expected: u64, actual: u64 },
    /// An honest payer with funds did not show up at its honest target.
    L1 { round: usize, payer: ProcessId, target: ProcessId },
}

/// Audits non-duplication, non-impersonation, self-consistency and liveness.
///
/// The S1 bound is the whole supply V: coins a corrupted process starts with
/// may legitimately move into honest hands.
pub fn check_ps_conditions(h: &PaymentHistory) -> Vec<PsViolation> {
    let mut out = Vec::new();
    let bound = h.supply();
    for i in 0..=h.rounds.len() {
        let total: u64 = h.honest.iter().filter_map(|n| h.balance(*n, i)).sum();
        if total > bound {
            out.push(PsViolation::S1 { round: i, honest_total: total, bound });
        }
    }
    for (i, r) in h.rounds.iter().enumerate() {
        for (n2, b2) in r {
            for s in b2.senders.iter().flatten() {
                if let Some(b1) = r.get(s) {
                    if b1.input != *n2 {
                        out.push(PsViolation::S2 { round: i, sender: *s, receiver: *n2 });
                    }
                }
            }
        }
        for (n, b) in r {
            let delta = u64::from(b.balance > 0 && b.input != *n);
            let expected = b.balance + b.senders.len() as u64 - delta;
            let actual = h.balance(*n, i + 1).unwrap_or(0);
            if expected != actual {
                out.push(PsViolation::S3 { round: i, process: *n, expected, actual });
            }
        }
        for (n1, b1) in r {
            let target = b1.input;
            if target == *n1 || b1.balance == 0 {
                continue;
            }
            if let Some(b2) = r.get(&target) {
                if !b2.senders.contains(&Some(*n1)) {
                    out.push(PsViolation::L1 { round: i, payer: *n1, target });
                }
            }
        }
    }
    out
}

pub struct BankOutcome<M> {
    pub history: PaymentHistory,
    pub metrics: MetricsLedger,
    pub transcript: Transcript,
    pub processes: BTreeMap<ProcessId, BankProcess<M>>,
}

impl<M> BankOutcome<M> {
    pub fn violations(&self) -> Vec<PsViolation> {
        check_ps_conditions(&self.history)
    }
}

/// Runs a payment system. `make(instance, origin, me)` builds one marker node;
/// `inputs[n][i]` is process n's target in round i.
pub fn run_bank<M: MarkerNode, A: Adversary>(
    cfg: NetworkConfig,
    adversary: A,
    initial: &[u64],
    inputs: &[Vec<ProcessId>],
    mut make: impl FnMut(u64, ProcessId, ProcessId) -> M,
) -> Result<BankOutcome<M>, SimError> {
    if initial.len() != cfg.n_processes {
        return Err(SimError::Config(format!("{} initial balances for N={}", initial.len(), cfg.n_processes)));
    }
    let origins = instance_origins(initial);
    if let Some(o) = origins.first() {
        let len = make(0, *o, *o).round_len();
        if cfg.steps_per_round != len {
            return Err(SimError::Config(format!("steps_per_round {} but the marker needs {len}", cfg.steps_per_round)));
        }
    }
    let rounds = cfg.rounds as usize;
    let mut net = Network::new(cfg, adversary, |p| {
        let nodes: Vec<M> = origins.iter().enumerate().map(|(v, o)| make(v as u64, *o, p)).collect();
        BankProcess::new(p, nodes, inputs.get(p.index()).cloned().unwrap_or_default())
    })?;
    net.run()?;
    if let Some((p, r)) = net.honest_processes().find_map(|(p, b)| b.misconfigured.map(|r| (p, r))) {
        return Err(SimError::Config(format!("{p} told to pay with zero balance in round {r}")));
    }
    let mut history = PaymentHistory {
        honest: net.honest(),
        initial: initial.to_vec(),
        rounds: vec![BTreeMap::new(); rounds],
        final_balances: BTreeMap::new(),
    };
    for (p, b) in net.honest_processes() {
        for (i, r) in b.rounds.iter().enumerate().take(rounds) {
            history.rounds[i].insert(p, r.clone());
        }
        history.final_balances.insert(p, b.final_balance);
    }
    // processes never woken keep their initial view
    for i in 0..rounds {
        for p in &history.honest {
            history.rounds[i].entry(*p).or_insert_with(|| BankRound { input: *p, ..Default::default() });
        }
    }
    Ok(BankOutcome {
        history,
        metrics: net.metrics().clone(),
        transcript: net.transcript().clone(),
        processes: net.honest_processes().map(|(p, b)| (p, b.clone())).collect(),
    })
}

/// Plans random-looking but always-fundable inputs from honest-only bookkeeping:
/// `choose(round, payer, balance)` returns a target or None to idle. At most
/// one payer per round when `single` is set.
pub fn plan_inputs(
    n: usize,
    initial: &[u64],
    rounds: usize,
    honest: &BTreeSet<ProcessId>,
    single: bool,
    mut choose: impl FnMut(usize, ProcessId, u64) -> Option<ProcessId>,
) -> Vec<Vec<ProcessId>> {
    let mut bal: Vec<u64> = initial.to_vec();
    let mut inputs: Vec<Vec<ProcessId>> = (0..n).map(|p| vec![ProcessId::from(p); rounds]).collect();
    for i in 0..rounds {
        let mut moves = Vec::new();
        for p in honest {
            if single && !moves.is_empty() {
                break;
            }
            if bal[p.index()] == 0 {
                continue;
            }
            if let Some(t) = choose(i, *p, bal[p.index()]) {
                if t != *p && t.index() < n {
                    inputs[p.index()][i] = t;
                    moves.push((*p, t));
                }
            }
        }
        for (p, t) in moves {
            bal[p.index()] -= 1;
            if honest.contains(&t) {
                bal[t.index()] += 1;
            }
        }
    }
    inputs
}
