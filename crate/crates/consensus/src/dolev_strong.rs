use std::collections::{BTreeMap, BTreeSet};

use simnet::{Ctx, Delivery, Params, ProcessId, SignedMessage, StepIndex};

use crate::{sender_fault, Protocol, Value};

/// The f+1 lowest ids other than the leader.
pub fn relay_set(params: Params, leader: ProcessId) -> Vec<ProcessId> {
    params.processes().filter(|p| *p != leader).take(params.f + 1).collect()
}

/// Authenticated broadcast with f+1 relays, deciding at local step f+2.
#[derive(Debug, Clone)]
pub struct DolevStrong {
    params: Params,
    me: ProcessId,
    leader: ProcessId,
    relays: Vec<ProcessId>,
    initial: Option<Value>,
    /// L with the local step each value was extracted at.
    extracted: Vec<(Value, StepIndex)>,
    decision: Option<Value>,
}

impl DolevStrong {
    /// `initial` is only read when `me` is the leader.
    pub fn new(params: Params, me: ProcessId, leader: ProcessId, initial: Option<Value>) -> Self {
        assert!(params.f + 1 < params.n, "need f+1 relays besides the leader");
        DolevStrong {
            params,
            me,
            leader,
            relays: relay_set(params, leader),
            initial,
            extracted: Vec::new(),
            decision: None,
        }
    }

    pub fn leader(&self) -> ProcessId {
        self.leader
    }

    pub fn relays(&self) -> &[ProcessId] {
        &self.relays
    }

    pub fn extracted(&self) -> &[(Value, StepIndex)] {
        &self.extracted
    }

    pub fn decision_step(&self) -> StepIndex {
        self.params.f as StepIndex + 2
    }

    /// Fixes the decision from L. Safe to call more than once.
    pub fn finalize(&mut self) {
        if self.decision.is_none() {
            self.decision = Some(match self.extracted.as_slice() {
                [(v, _)] => v.clone(),
                _ => sender_fault(),
            });
        }
    }

    fn is_proper(&self, msg: &SignedMessage, len: usize, ctx: &Ctx<'_>) -> bool {
        if msg.stack.len() != len || msg.stack[0].signer != self.leader {
            return false;
        }
        let mut seen = BTreeSet::new();
        for e in &msg.stack {
            if !e.tag.is_empty() || &e.nonce != ctx.nonce() || !seen.insert(e.signer) {
                return false;
            }
        }
        !seen.contains(&self.me) && ctx.verify(msg)
    }
}

impl Protocol for DolevStrong {
    fn on_step(&mut self, local: StepIndex, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if self.decision.is_some() {
            return;
        }
        if local == 0 {
            if self.me == self.leader {
                let v = self.initial.clone().unwrap_or_else(sender_fault);
                let mut m = v.unsigned();
                if ctx.sign(&mut m, b"") {
                    self.extracted.push((v.unsigned(), 0));
                    ctx.send_all(&m);
                }
            }
            return;
        }
        let last = local >= self.decision_step();
        let mut ordered: BTreeMap<Vec<u8>, &SignedMessage> = BTreeMap::new();
        for d in inbox {
            ordered.entry(d.msg.encode()).or_insert(&d.msg);
        }
        for m in ordered.into_values() {
            if !self.is_proper(m, local as usize, ctx) {
                continue;
            }
            let v = m.unsigned();
            if self.extracted.iter().any(|(x, _)| *x == v) || self.extracted.len() >= 2 {
                continue;
            }
            self.extracted.push((v, local));
            if last {
                continue;
            }
            let mut fwd = m.clone();
            if !ctx.sign(&mut fwd, b"") {
                continue;
            }
            if self.relays.contains(&self.me) {
                for p in self.params.processes().filter(|p| *p != self.me) {
                    ctx.send(p, fwd.clone());
                }
            } else {
                for p in self.relays.clone() {
                    ctx.send(p, fwd.clone());
                }
            }
        }
        if last {
            self.finalize();
        }
    }

    fn output(&self) -> Option<&Value> {
        self.decision.as_ref()
    }

    fn duration(&self) -> StepIndex {
        self.decision_step()
    }
}

/// The claim from the construction's proof, checked over final L sets:
/// if one honest process extracted v then every honest process extracted v
/// or two distinct values. Returns the offending (holder, other) pairs.
pub fn audit_extractions<'a>(
    honest: impl IntoIterator<Item = (ProcessId, &'a DolevStrong)>,
) -> Vec<(ProcessId, ProcessId)> {
    let all: Vec<_> = honest.into_iter().collect();
    let mut bad = Vec::new();
    for (p, a) in &all {
        for (v, _) in &a.extracted {
            for (q, b) in &all {
                let ok = b.extracted.len() >= 2 || b.extracted.iter().any(|(w, _)| w == v);
                if !ok {
                    bad.push((*p, *q));
                }
            }
        }
    }
    bad
}
