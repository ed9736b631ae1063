use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::{Adversary, AdvCtx, AdversaryView, Delivery, Process, ProcessId, SignedMessage, StepIndex};

/// What the corrupted coalition does with the honest code it runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Tactic {
    /// Honest code, sent as is.
    Mimic,
    /// Honest code until `from`; nothing leaves the coalition afterwards.
    Silence { from: StepIndex },
    /// Honest code plus, with probability `rate` per activation, one stale
    /// message resent to a random honest process.
    Replay { rate: f64 },
    /// Honest code with random drops and copies sent to the wrong process.
    Chaos { drop: f64, misdirect: f64 },
    /// Two copies of the honest code per corrupted process, one per input
    /// sequence. Intra-coalition traffic stays inside its copy.
    Split,
}

impl Tactic {
    pub fn name(&self) -> &'static str {
        match self {
            Tactic::Mimic => "mimic",
            Tactic::Silence { .. } => "silence",
            Tactic::Replay { .. } => "replay",
            Tactic::Chaos { .. } => "chaos",
            Tactic::Split => "split",
        }
    }
}

/// A coalition of puppets following one [`Tactic`].
///
/// Honest mail reaches every copy unless `demux` is set: then a message from a
/// process only in `demux[s]` reaches copy `s` alone.
#[derive(Debug, Clone)]
pub struct Gallery<P> {
    copies: BTreeMap<ProcessId, Vec<P>>,
    tactic: Tactic,
    demux: Option<[BTreeSet<ProcessId>; 2]>,
    internal: Vec<BTreeMap<ProcessId, Vec<Delivery>>>,
    seen: Vec<SignedMessage>,
    rng: ChaCha8Rng,
    horizon: StepIndex,
}

const SEEN_CAP: usize = 512;

impl<P: Process> Gallery<P> {
    /// One copy per corrupted process. `horizon` bounds replay wakeups.
    pub fn new(puppets: BTreeMap<ProcessId, P>, tactic: Tactic, seed: u64, horizon: StepIndex) -> Self {
        assert!(tactic != Tactic::Split, "use Gallery::split");
        Gallery {
            copies: puppets.into_iter().map(|(p, x)| (p, vec![x])).collect(),
            tactic,
            demux: None,
            internal: vec![BTreeMap::new()],
            seen: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            horizon,
        }
    }

    /// Two copies per corrupted process.
    pub fn split(pairs: BTreeMap<ProcessId, (P, P)>, demux: Option<[BTreeSet<ProcessId>; 2]>) -> Self {
        Gallery {
            copies: pairs.into_iter().map(|(p, (a, b))| (p, vec![a, b])).collect(),
            tactic: Tactic::Split,
            demux,
            internal: vec![BTreeMap::new(), BTreeMap::new()],
            seen: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(0),
            horizon: 0,
        }
    }

    pub fn tactic(&self) -> &Tactic {
        &self.tactic
    }

    /// Copy `s` of corrupted process `p`.
    pub fn copy(&self, p: ProcessId, s: usize) -> Option<&P> {
        self.copies.get(&p)?.get(s)
    }

    fn reaches(&self, copy: usize, from: ProcessId) -> bool {
        match &self.demux {
            None => true,
            Some([a, b]) => match (a.contains(&from), b.contains(&from)) {
                (true, false) => copy == 0,
                (false, true) => copy == 1,
                _ => true,
            },
        }
    }

    fn random_honest(&mut self, n: usize) -> Option<ProcessId> {
        let honest: Vec<ProcessId> =
            (0..n).map(ProcessId::from).filter(|p| !self.copies.contains_key(p)).collect();
        (!honest.is_empty()).then(|| honest[self.rng.gen_range(0..honest.len())])
    }
}

impl<P: Process> Adversary for Gallery<P> {
    fn corrupted(&self) -> BTreeSet<ProcessId> {
        self.copies.keys().copied().collect()
    }

    fn on_step(&mut self, view: &AdversaryView<'_>, ctx: &mut AdvCtx<'_>) {
        let t = view.step;
        let n = view.params.n;
        for z in self.copies.keys() {
            for d in view.inbox(*z) {
                if self.seen.len() < SEEN_CAP {
                    self.seen.push(d.msg.clone());
                }
            }
        }
        let fresh = vec![BTreeMap::new(); self.internal.len()];
        let internal = std::mem::replace(&mut self.internal, fresh);
        let mut external: Vec<(ProcessId, ProcessId, SignedMessage)> = Vec::new();
        let ids: Vec<ProcessId> = self.copies.keys().copied().collect();
        for z in ids {
            let n_copies = self.copies[&z].len();
            for s in 0..n_copies {
                let mut inbox: Vec<Delivery> =
                    view.inbox(z).iter().filter(|d| self.reaches(s, d.from)).cloned().collect();
                inbox.extend(internal[s].get(&z).cloned().unwrap_or_default());
                inbox.sort_by_key(|d| d.from);
                let puppet = &mut self.copies.get_mut(&z).expect("listed")[s];
                let ((), out) = ctx.puppet(z, |c| puppet.on_step(&inbox, c));
                for o in out {
                    if self.copies.contains_key(&o.to) {
                        self.internal[s].entry(o.to).or_default().push(Delivery { from: z, msg: o.msg });
                    } else {
                        external.push((z, o.to, o.msg));
                    }
                }
            }
        }
        if self.internal.iter().any(|m| !m.is_empty()) {
            ctx.wake_at(t + 1);
        }

        let mut sent = BTreeSet::new();
        let mut emit = |ctx: &mut AdvCtx<'_>, from: ProcessId, to: ProcessId, msg: SignedMessage| {
            if sent.insert((from, to, msg.encode())) {
                ctx.send(from, to, msg);
            }
        };
        match self.tactic.clone() {
            Tactic::Mimic | Tactic::Split => {
                for (from, to, msg) in external {
                    emit(ctx, from, to, msg);
                }
            }
            Tactic::Silence { from: quiet } => {
                if t < quiet {
                    for (from, to, msg) in external {
                        emit(ctx, from, to, msg);
                    }
                }
            }
            Tactic::Chaos { drop, misdirect } => {
                for (from, to, msg) in external {
                    if self.rng.gen_bool(misdirect) {
                        if let Some(other) = self.random_honest(n) {
                            emit(ctx, from, other, msg.clone());
                        }
                    }
                    if !self.rng.gen_bool(drop) {
                        emit(ctx, from, to, msg);
                    }
                }
            }
            Tactic::Replay { rate } => {
                for (from, to, msg) in external {
                    emit(ctx, from, to, msg);
                }
                if !self.seen.is_empty() && self.rng.gen_bool(rate) {
                    let msg = self.seen[self.rng.gen_range(0..self.seen.len())].clone();
                    let from = *self.copies.keys().next().expect("non-empty coalition");
                    if let Some(to) = self.random_honest(n) {
                        emit(ctx, from, to, msg);
                    }
                }
                let next = t + self.rng.gen_range(1..=8);
                if next < self.horizon {
                    ctx.wake_at(next);
                }
            }
        }
    }
}
