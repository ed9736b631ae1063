use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::message::{Nonce, ProcessId, RoundIndex, SignedMessage, StepIndex};
use crate::metrics::MetricsLedger;
use crate::oracle::{Authority, SignatureOracle};
use crate::transcript::{SendEvent, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_processes: usize,
    pub max_faults: usize,
    pub steps_per_round: u64,
    pub rounds: u64,
    pub seed: u64,
    /// Always true; kept explicit so exported configs say so.
    pub count_self_sends: bool,
    pub record_transcript: bool,
}

impl NetworkConfig {
    pub fn new(n: usize, f: usize, steps_per_round: u64, rounds: u64) -> Self {
        NetworkConfig {
            n_processes: n,
            max_faults: f,
            steps_per_round,
            rounds,
            seed: 0,
            count_self_sends: true,
            record_transcript: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn without_transcript(mut self) -> Self {
        self.record_transcript = false;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_processes == 0 {
            return Err(SimError::Config("N must be positive".into()));
        }
        if self.max_faults >= self.n_processes {
            return Err(SimError::Config(format!("f={} must be < N={}", self.max_faults, self.n_processes)));
        }
        if self.steps_per_round == 0 || self.rounds == 0 {
            return Err(SimError::Config("T and K must be at least 1".into()));
        }
        if !self.count_self_sends {
            return Err(SimError::Config("self-sends are always counted".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Params {
        Params { n: self.n_processes, f: self.max_faults }
    }

    pub fn total_steps(&self) -> StepIndex {
        self.steps_per_round * self.rounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub f: usize,
}

impl Params {
    pub fn processes(&self) -> impl Iterator<Item = ProcessId> {
        (0..self.n).map(ProcessId::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: ProcessId,
    pub msg: SignedMessage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: ProcessId,
    pub msg: SignedMessage,
}

/// Honest process behaviour: a deterministic function of its received history.
pub trait Process {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>);
}

/// Per-step handle a process uses to sign, verify, send and schedule wakeups.
pub struct Ctx<'a> {
    me: ProcessId,
    step: StepIndex,
    params: Params,
    authority: Authority,
    nonce: Nonce,
    oracle: &'a mut SignatureOracle,
    out: &'a mut Vec<Outgoing>,
    wake: &'a mut Vec<StepIndex>,
    fault: &'a mut Option<SimError>,
}

impl<'a> Ctx<'a> {
    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn step(&self) -> StepIndex {
        self.step
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn f(&self) -> usize {
        self.params.f
    }

    /// Nonce stamped on every signature made through this context.
    pub fn nonce(&self) -> &Nonce {
        &self.nonce
    }

    pub fn send(&mut self, to: ProcessId, msg: SignedMessage) {
        self.out.push(Outgoing { to, msg });
    }

    /// Sends to every process, self included.
    pub fn send_all(&mut self, msg: &SignedMessage) {
        for p in self.params.processes() {
            self.send(p, msg.clone());
        }
    }

    /// Appends `(msg · tag)_{me}`. Returns false if the oracle refused.
    pub fn sign(&mut self, msg: &mut SignedMessage, tag: &[u8]) -> bool {
        match self.oracle.append(self.authority, msg, self.me, tag, &self.nonce) {
            Ok(()) => true,
            Err(e) => {
                self.fault.get_or_insert(e);
                false
            }
        }
    }

    pub fn verify(&self, msg: &SignedMessage) -> bool {
        self.oracle.verify_message(msg)
    }

    pub fn oracle(&self) -> &SignatureOracle {
        self.oracle
    }

    pub fn wake_at(&mut self, step: StepIndex) {
        if step > self.step {
            self.wake.push(step);
        }
    }

    /// Runs `f` with one more nonce component, as a muxed sub-instance.
    pub fn scoped<R>(&mut self, component: u64, f: impl FnOnce(&mut Ctx<'_>) -> R) -> R {
        self.nonce.0.push(component);
        let r = f(self);
        self.nonce.0.pop();
        r
    }

    /// Runs `f` under an explicit nonce.
    pub fn with_nonce<R>(&mut self, nonce: Nonce, f: impl FnOnce(&mut Ctx<'_>) -> R) -> R {
        let saved = std::mem::replace(&mut self.nonce, nonce);
        let r = f(self);
        self.nonce = saved;
        r
    }
}

/// Standalone signing and sending context, for offline procedures and unit tests.
#[derive(Debug, Default)]
pub struct Workbench {
    pub oracle: SignatureOracle,
    pub outbox: Vec<Outgoing>,
    pub wakeups: Vec<StepIndex>,
    pub fault: Option<SimError>,
}

impl Workbench {
    pub fn new(corrupted: BTreeSet<ProcessId>) -> Self {
        Workbench { oracle: SignatureOracle::new(corrupted), ..Default::default() }
    }

    pub fn ctx(&mut self, me: ProcessId, step: StepIndex, params: Params) -> Ctx<'_> {
        let authority = if self.oracle.corrupted().contains(&me) { Authority::Adversary } else { Authority::Process(me) };
        Ctx {
            me,
            step,
            params,
            authority,
            nonce: Nonce::root(),
            oracle: &mut self.oracle,
            out: &mut self.outbox,
            wake: &mut self.wakeups,
            fault: &mut self.fault,
        }
    }

    pub fn take_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.outbox)
    }
}

/// What the adversary sees at a step: its own inboxes plus the transcript so far.
pub struct AdversaryView<'a> {
    pub step: StepIndex,
    pub params: Params,
    pub steps_per_round: u64,
    pub corrupted: &'a BTreeSet<ProcessId>,
    pub inboxes: &'a BTreeMap<ProcessId, Vec<Delivery>>,
    pub transcript: &'a Transcript,
}

impl AdversaryView<'_> {
    pub fn inbox(&self, p: ProcessId) -> &[Delivery] {
        self.inboxes.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub struct AdvCtx<'a> {
    step: StepIndex,
    params: Params,
    oracle: &'a mut SignatureOracle,
    out: &'a mut Vec<(ProcessId, Outgoing)>,
    wake: &'a mut Vec<StepIndex>,
    fault: &'a mut Option<SimError>,
}

impl<'a> AdvCtx<'a> {
    pub fn step(&self) -> StepIndex {
        self.step
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn sign_as(&mut self, signer: ProcessId, msg: &mut SignedMessage, tag: &[u8], nonce: &Nonce) -> bool {
        match self.oracle.append(Authority::Adversary, msg, signer, tag, nonce) {
            Ok(()) => true,
            Err(e) => {
                self.fault.get_or_insert(e);
                false
            }
        }
    }

    pub fn send(&mut self, from: ProcessId, to: ProcessId, msg: SignedMessage) {
        self.out.push((from, Outgoing { to, msg }));
    }

    pub fn verify(&self, msg: &SignedMessage) -> bool {
        self.oracle.verify_message(msg)
    }

    pub fn wake_at(&mut self, step: StepIndex) {
        if step > self.step {
            self.wake.push(step);
        }
    }

    /// Runs honest code on behalf of corrupted `p` and hands back what it tried to send.
    pub fn puppet<R>(&mut self, p: ProcessId, f: impl FnOnce(&mut Ctx<'_>) -> R) -> (R, Vec<Outgoing>) {
        let mut out = Vec::new();
        let r = {
            let mut ctx = Ctx {
                me: p,
                step: self.step,
                params: self.params,
                authority: Authority::Adversary,
                nonce: Nonce::root(),
                oracle: self.oracle,
                out: &mut out,
                wake: self.wake,
                fault: self.fault,
            };
            f(&mut ctx)
        };
        (r, out)
    }
}

/// Static-corruption, non-rushing adversary.
pub trait Adversary {
    fn corrupted(&self) -> BTreeSet<ProcessId>;
    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>);
}

/// No corruption at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAdversary;

impl Adversary for NoAdversary {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        BTreeSet::new()
    }
    fn on_step(&mut self, _: &AdversaryView<'_>, _: &mut AdvCtx<'_>) {}
}

/// Corrupted processes that never send anything.
#[derive(Debug, Clone, Default)]
pub struct Silent(pub BTreeSet<ProcessId>);

impl Adversary for Silent {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        self.0.clone()
    }
    fn on_step(&mut self, _: &AdversaryView<'_>, _: &mut AdvCtx<'_>) {}
}

/// Corrupted processes driven by process code of the adversary's choosing,
/// typically honest code with a planted deviation. Every puppet runs on every
/// adversary activation, so the code must tolerate extra wakeups.
#[derive(Debug, Clone, Default)]
pub struct Puppets<P> {
    pub puppets: BTreeMap<ProcessId, P>,
}

impl<P> Puppets<P> {
    pub fn new(puppets: impl IntoIterator<Item = (ProcessId, P)>) -> Self {
        Puppets { puppets: puppets.into_iter().collect() }
    }

    pub fn get(&self, p: ProcessId) -> Option<&P> {
        self.puppets.get(&p)
    }
}

impl<P: Process> Adversary for Puppets<P> {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        self.puppets.keys().copied().collect()
    }

    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>) {
        for (p, proc_) in self.puppets.iter_mut() {
            let ((), out) = ctx.puppet(*p, |c| proc_.on_step(view.inbox(*p), c));
            for o in out {
                ctx.send(*p, o.to, o.msg);
            }
        }
    }
}

/// Adversary from a closure, for one-off scripts.
#[derive(Clone)]
pub struct FnAdversary<F> {
    pub corrupted: BTreeSet<ProcessId>,
    pub strategy: F,
}

impl<F: FnMut(&AdversaryView<'_>, &mut AdvCtx<'_>)> FnAdversary<F> {
    pub fn new(corrupted: impl IntoIterator<Item = ProcessId>, strategy: F) -> Self {
        FnAdversary { corrupted: corrupted.into_iter().collect(), strategy }
    }
}

impl<F: FnMut(&AdversaryView<'_>, &mut AdvCtx<'_>)> Adversary for FnAdversary<F> {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        self.corrupted.clone()
    }
    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>) {
        (self.strategy)(view, ctx)
    }
}

#[derive(Debug, Clone)]
pub struct Network<P, A> {
    config: NetworkConfig,
    step: StepIndex,
    processes: Vec<Option<P>>,
    adversary: A,
    corrupted: BTreeSet<ProcessId>,
    oracle: SignatureOracle,
    pending: Vec<(ProcessId, Outgoing)>,
    wakeups: BTreeMap<StepIndex, BTreeSet<ProcessId>>,
    adversary_wakeups: BTreeSet<StepIndex>,
    knowledge: HashSet<(ProcessId, Vec<u8>)>,
    metrics: MetricsLedger,
    transcript: Transcript,
}

impl<P: Process, A: Adversary> Network<P, A> {
    /// Builds the network; `make` is called once per honest process.
    pub fn new(config: NetworkConfig, adversary: A, mut make: impl FnMut(ProcessId) -> P) -> Result<Self, SimError> {
        config.validate()?;
        let corrupted = adversary.corrupted();
        if corrupted.len() > config.max_faults {
            return Err(SimError::Config(format!("{} corrupted exceeds f={}", corrupted.len(), config.max_faults)));
        }
        if let Some(p) = corrupted.iter().find(|p| p.index() >= config.n_processes) {
            return Err(SimError::Config(format!("corrupted {p} out of range")));
        }
        let processes = (0..config.n_processes)
            .map(ProcessId::from)
            .map(|p| if corrupted.contains(&p) { None } else { Some(make(p)) })
            .collect();
        Ok(Network {
            metrics: MetricsLedger::with_rounds(config.rounds as usize),
            config,
            step: 0,
            processes,
            adversary,
            oracle: SignatureOracle::new(corrupted.clone()),
            corrupted,
            pending: Vec::new(),
            wakeups: BTreeMap::new(),
            adversary_wakeups: BTreeSet::new(),
            knowledge: HashSet::new(),
            transcript: Transcript::default(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn step(&self) -> StepIndex {
        self.step
    }

    pub fn round_of(&self, step: StepIndex) -> RoundIndex {
        step / self.config.steps_per_round
    }

    pub fn corrupted(&self) -> &BTreeSet<ProcessId> {
        &self.corrupted
    }

    pub fn honest(&self) -> BTreeSet<ProcessId> {
        self.config.params().processes().filter(|p| !self.corrupted.contains(p)).collect()
    }

    pub fn process(&self, p: ProcessId) -> Option<&P> {
        self.processes.get(p.index()).and_then(Option::as_ref)
    }

    pub fn process_mut(&mut self, p: ProcessId) -> Option<&mut P> {
        self.processes.get_mut(p.index()).and_then(Option::as_mut)
    }

    pub fn honest_processes(&self) -> impl Iterator<Item = (ProcessId, &P)> {
        self.processes.iter().enumerate().filter_map(|(i, p)| p.as_ref().map(|p| (ProcessId::from(i), p)))
    }

    pub fn adversary(&self) -> &A {
        &self.adversary
    }

    pub fn oracle(&self) -> &SignatureOracle {
        &self.oracle
    }

    pub fn metrics(&self) -> &MetricsLedger {
        &self.metrics
    }

    pub fn metrics_mut(&mut self) -> &mut MetricsLedger {
        &mut self.metrics
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Schedules an extra wakeup for an honest process (harness use).
    pub fn wake(&mut self, p: ProcessId, step: StepIndex) {
        self.wakeups.entry(step).or_default().insert(p);
    }

    fn has_work_at(&self, step: StepIndex) -> bool {
        step == 0
            || !self.pending.is_empty()
            || self.wakeups.contains_key(&step)
            || self.adversary_wakeups.contains(&step)
    }

    fn next_active_step(&self) -> StepIndex {
        if self.has_work_at(self.step) {
            return self.step;
        }
        let a = self.wakeups.range(self.step..).next().map(|(s, _)| *s);
        let b = self.adversary_wakeups.range(self.step..).next().copied();
        match (a, b) {
            (Some(a), Some(b)) => a.min(b),
            (Some(s), None) | (None, Some(s)) => s,
            (None, None) => StepIndex::MAX,
        }
    }

    /// Executes exactly one lockstep step.
    pub fn advance_step(&mut self) -> Result<(), SimError> {
        let t = self.step;
        let round = self.round_of(t);
        let params = self.config.params();

        let mut inboxes: BTreeMap<ProcessId, Vec<Delivery>> = BTreeMap::new();
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by_key(|(from, _)| *from);
        for (from, o) in pending {
            inboxes.entry(o.to).or_default().push(Delivery { from, msg: o.msg });
        }

        for p in &self.corrupted {
            if let Some(inbox) = inboxes.get(p) {
                for d in inbox {
                    self.knowledge.extend(d.msg.all_signatures());
                }
            }
        }

        let mut active: BTreeSet<ProcessId> = self.wakeups.remove(&t).unwrap_or_default();
        if t == 0 {
            active.extend(params.processes());
        }
        active.extend(inboxes.keys().copied());

        let mut fault = None;
        let mut sends: Vec<(ProcessId, Outgoing)> = Vec::new();
        let empty: Vec<Delivery> = Vec::new();
        for p in active.iter().copied().filter(|p| !self.corrupted.contains(p)) {
            let Some(proc_) = self.processes[p.index()].as_mut() else { continue };
            let mut out = Vec::new();
            let mut wake = Vec::new();
            {
                let mut ctx = Ctx {
                    me: p,
                    step: t,
                    params,
                    authority: Authority::Process(p),
                    nonce: Nonce::root(),
                    oracle: &mut self.oracle,
                    out: &mut out,
                    wake: &mut wake,
                    fault: &mut fault,
                };
                proc_.on_step(inboxes.get(&p).unwrap_or(&empty), &mut ctx);
            }
            for s in wake {
                self.wakeups.entry(s).or_default().insert(p);
            }
            sends.extend(out.into_iter().map(|o| (p, o)));
        }
        if let Some(e) = fault {
            return Err(e);
        }

        let adversary_due = self.adversary_wakeups.remove(&t)
            || t == 0
            || self.corrupted.iter().any(|p| inboxes.contains_key(p));
        if !self.corrupted.is_empty() && adversary_due {
            let corrupt_inboxes: BTreeMap<ProcessId, Vec<Delivery>> =
                inboxes.iter().filter(|(p, _)| self.corrupted.contains(p)).map(|(p, v)| (*p, v.clone())).collect();
            let mut out = Vec::new();
            let mut wake = Vec::new();
            let mut afault = None;
            {
                let view = AdversaryView {
                    step: t,
                    params,
                    steps_per_round: self.config.steps_per_round,
                    corrupted: &self.corrupted,
                    inboxes: &corrupt_inboxes,
                    transcript: &self.transcript,
                };
                let mut ctx = AdvCtx {
                    step: t,
                    params,
                    oracle: &mut self.oracle,
                    out: &mut out,
                    wake: &mut wake,
                    fault: &mut afault,
                };
                self.adversary.on_step(&view, &mut ctx);
            }
            if let Some(e) = afault {
                return Err(e);
            }
            self.adversary_wakeups.extend(wake);
            for (from, o) in &out {
                if !self.corrupted.contains(from) {
                    return Err(SimError::ImpersonatedSender(*from));
                }
                for (signer, content) in o.msg.all_signatures() {
                    if !self.corrupted.contains(&signer) && !self.knowledge.contains(&(signer, content)) {
                        return Err(SimError::Forgery {
                            signer,
                            detail: format!("adversary used an unseen signature at step {t}"),
                        });
                    }
                }
            }
            sends.extend(out);
        }

        for (from, o) in &sends {
            let sigs = o.msg.signature_count();
            if self.config.record_transcript {
                self.transcript.events.push(SendEvent {
                    step: t,
                    round,
                    sender: *from,
                    recipient: o.to,
                    payload_hex: hex::encode(o.msg.encode()),
                    n_signatures: sigs,
                });
            }
            if !self.corrupted.contains(from) {
                let instance = o.msg.stack.first().and_then(|e| e.nonce.0.first().copied());
                self.metrics.record_send(round, *from, o.to, sigs, instance);
            }
        }
        self.pending = sends.into_iter().filter(|(_, o)| o.to.index() < params.n).collect();
        self.step += 1;
        self.metrics.steps_used = self.step;
        Ok(())
    }

    /// Runs until `end` (exclusive), skipping steps where nothing can happen.
    pub fn run_until(&mut self, end: StepIndex) -> Result<(), SimError> {
        while self.step < end {
            let next = self.next_active_step();
            if next >= end {
                self.step = end;
                self.metrics.steps_used = end;
                break;
            }
            self.step = next;
            self.advance_step()?;
        }
        Ok(())
    }

    /// Runs all K·T steps.
    pub fn run(&mut self) -> Result<(), SimError> {
        self.run_until(self.config.total_steps())
    }
}
