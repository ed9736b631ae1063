use std::collections::BTreeSet;

use consensus::{run_protocol, value, DolevStrong};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::{Adversary, AdvCtx, AdversaryView, Nonce, Params, ProcessId, SignedMessage, SimError, StepIndex};

/// One forged or relayed chain handed to an honest process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub to: ProcessId,
    pub value: u64,
    /// Step the chain is sent at; it arrives one step later.
    pub step: StepIndex,
    /// Signatures on the chain. `step + 1` makes it proper on arrival.
    pub len: usize,
}

/// Dolev-Strong adversary that builds chains from the corrupted keys plus
/// whatever proper chains the corrupted processes have received.
#[derive(Debug, Clone)]
pub struct DsAttack {
    pub corrupted: BTreeSet<ProcessId>,
    pub leader: ProcessId,
    pub plan: Vec<Injection>,
    seen: Vec<SignedMessage>,
}

impl DsAttack {
    pub fn new(corrupted: BTreeSet<ProcessId>, leader: ProcessId, plan: Vec<Injection>) -> Self {
        DsAttack { corrupted, leader, plan, seen: Vec::new() }
    }

    fn forge(&self, inj: &Injection, ctx: &mut AdvCtx<'_>) -> Option<SignedMessage> {
        let target = value(inj.value);
        let root = Nonce::root();
        let mut bases: Vec<SignedMessage> = self
            .seen
            .iter()
            .filter(|m| {
                let signers: BTreeSet<_> = m.signers().collect();
                m.stack.first().is_some_and(|e| e.signer == self.leader)
                    && m.unsigned() == target
                    && m.stack.iter().all(|e| e.tag.is_empty() && e.nonce.is_root())
                    && signers.len() == m.stack.len()
                    && !signers.contains(&inj.to)
                    && m.stack.len() <= inj.len
            })
            .cloned()
            .collect();
        if self.corrupted.contains(&self.leader) && inj.len >= 1 {
            let mut m = target.unsigned();
            if ctx.sign_as(self.leader, &mut m, b"", &root) {
                bases.push(m);
            }
        }
        bases.sort_by_key(|m| std::cmp::Reverse(m.stack.len()));
        for mut m in bases {
            let used: BTreeSet<_> = m.signers().collect();
            let spare: Vec<ProcessId> = self.corrupted.iter().copied().filter(|c| !used.contains(c)).collect();
            let need = inj.len - m.stack.len();
            if spare.len() < need {
                continue;
            }
            for c in &spare[..need] {
                ctx.sign_as(*c, &mut m, b"", &root);
            }
            return Some(m);
        }
        None
    }
}

impl Adversary for DsAttack {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        self.corrupted.clone()
    }

    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>) {
        for p in &self.corrupted {
            for d in view.inbox(*p) {
                if !self.seen.contains(&d.msg) {
                    self.seen.push(d.msg.clone());
                }
            }
        }
        if view.step == 0 {
            for inj in &self.plan {
                ctx.wake_at(inj.step);
            }
        }
        let Some(from) = self.corrupted.iter().next().copied() else { return };
        let due: Vec<Injection> = self.plan.iter().filter(|i| i.step == view.step).cloned().collect();
        for inj in due {
            if let Some(m) = self.forge(&inj, ctx) {
                ctx.send(from, inj.to, m);
            }
        }
    }
}

/// Outcome of a batch of Dolev-Strong runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DsReport {
    pub runs: usize,
    pub violations: Vec<String>,
    /// Latest honest decision step seen in any run.
    pub latest_decision: StepIndex,
}

impl DsReport {
    fn absorb(&mut self, other: DsReport) {
        self.runs += other.runs;
        self.violations.extend(other.violations);
        self.latest_decision = self.latest_decision.max(other.latest_decision);
    }
}

/// Runs one attack with leader P0 (value 1 when honest) and audits consistency,
/// validity and termination by step f+2.
pub fn ds_check(params: Params, attack: DsAttack) -> Result<DsReport, SimError> {
    let leader = attack.leader;
    let honest_leader = !attack.corrupted.contains(&leader);
    let expected = params.n - attack.corrupted.len();
    let label = format!("Z={:?} plan={:?}", attack.corrupted, attack.plan);
    let out = run_protocol(params, attack, false, |me| {
        DolevStrong::new(params, me, leader, (me == leader).then(|| value(1)))
    })?;
    let mut report = DsReport { runs: 1, ..Default::default() };
    if out.decisions.len() != expected {
        report.violations.push(format!("termination: {} of {expected} decided, {label}", out.decisions.len()));
    }
    if !out.consistent() {
        report.violations.push(format!("consistency: {label}"));
    }
    if honest_leader && out.decisions.values().any(|v| *v != value(1)) {
        report.violations.push(format!("validity: {label}"));
    }
    let last = out.last_decision_step().unwrap_or(0);
    if last > params.f as StepIndex + 2 {
        report.violations.push(format!("late decision at {last}: {label}"));
    }
    report.latest_decision = last;
    Ok(report)
}

fn corrupted_sets(n: usize, f: usize) -> Vec<BTreeSet<ProcessId>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) <= f {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).map(ProcessId::from).collect());
        }
    }
    out
}

/// Every corrupted set of size 1..=f and every assignment of a first proper
/// delivery step (or none) to each (honest receiver, value) pair.
///
/// An honest process only acts on the first proper chain per value, so these
/// plans cover every distinguishable behavior over the values {0, 1}.
pub fn ds_exhaustive(n: usize, f: usize) -> Result<DsReport, SimError> {
    let params = Params { n, f };
    let leader = ProcessId(0);
    let last = f as StepIndex + 2;
    let mut report = DsReport::default();
    for z in corrupted_sets(n, f) {
        let values: Vec<u64> = if z.contains(&leader) { vec![0, 1] } else { vec![1] };
        let pairs: Vec<(ProcessId, u64)> = params
            .processes()
            .filter(|p| !z.contains(p) && *p != leader)
            .flat_map(|p| values.iter().map(move |v| (p, *v)))
            .collect();
        // option 0 = never, option s = proper chain arriving at step s
        let radix = last as usize + 1;
        let total = radix.pow(pairs.len() as u32);
        for mut code in 0..total {
            let mut plan = Vec::new();
            for (to, v) in &pairs {
                let arrive = (code % radix) as StepIndex;
                code /= radix;
                if arrive > 0 {
                    plan.push(Injection { to: *to, value: *v, step: arrive - 1, len: arrive as usize });
                }
            }
            report.absorb(ds_check(params, DsAttack::new(z.clone(), leader, plan))?);
        }
    }
    Ok(report)
}

/// Seeded random corrupted sets and plans, including improper lengths and
/// deliveries after the decision step.
pub fn ds_random(n: usize, f: usize, count: usize, seed: u64) -> Result<DsReport, SimError> {
    let params = Params { n, f };
    let leader = ProcessId(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DsReport::default();
    for _ in 0..count {
        let size = rng.gen_range(1..=f);
        let mut z = BTreeSet::new();
        while z.len() < size {
            z.insert(ProcessId::from(rng.gen_range(0..n)));
        }
        let honest: Vec<ProcessId> = params.processes().filter(|p| !z.contains(p)).collect();
        let mut plan = Vec::new();
        for _ in 0..rng.gen_range(0..=3 * n) {
            let step = rng.gen_range(0..=f as StepIndex + 2);
            let len = if rng.gen_bool(0.8) { step as usize + 1 } else { rng.gen_range(1..=f + 2) };
            plan.push(Injection {
                to: honest[rng.gen_range(0..honest.len())],
                value: rng.gen_range(0..3),
                step,
                len,
            });
        }
        report.absorb(ds_check(params, DsAttack::new(z, leader, plan))?);
    }
    Ok(report)
}
