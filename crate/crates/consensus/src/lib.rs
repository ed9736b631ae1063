//! Byzantine broadcast and agreement over the simnet oracle.
//!
//! Every protocol here is a per-process state machine driven by a *local*
//! step counter, so the same code runs standalone or embedded at an offset
//! inside a larger protocol. Values are unsigned [`SignedMessage`]s: plain
//! payload bytes plus optional attached evidence. The sender-fault value is
//! the encoding of `0`.

use std::collections::BTreeMap;

use simnet::{Adversary, Ctx, Delivery, MetricsLedger, Network, NetworkConfig, Params, Process, ProcessId, SignedMessage, SimError, StepIndex, Transcript};

mod bb_from_ba;
mod dolev_strong;
mod majority;
mod turpin_coan;

pub use bb_from_ba::BbFromBa;
pub use dolev_strong::{audit_extractions, relay_set, DolevStrong};
pub use majority::MajorityBa;
pub use turpin_coan::TurpinCoan;

pub type Value = SignedMessage;

pub fn value(v: u64) -> Value {
    SignedMessage::from_u64(v)
}

/// The default decision when a leader misbehaves detectably.
pub fn sender_fault() -> Value {
    value(0)
}

pub fn is_bit(v: &Value, bit: bool) -> bool {
    v.as_u64() == Some(bit as u64)
}

/// A per-process protocol instance with a fixed decision step.
///
/// Hosts call `on_step` at every local step from 0 through `duration()`,
/// with or without mail.
pub trait Protocol: Clone {
    fn on_step(&mut self, local: StepIndex, inbox: &[Delivery], ctx: &mut Ctx<'_>);
    fn output(&self) -> Option<&Value>;
    /// Local step after which `output` is fixed.
    fn duration(&self) -> StepIndex;
}

/// Multi-valued agreement started from an input value.
pub trait Agreement: Protocol {
    fn start(params: Params, me: ProcessId, input: Value) -> Self;
}

/// Agreement on a single bit.
pub trait BinaryAgreement: Protocol {
    fn start(params: Params, me: ProcessId, input: bool) -> Self;
}

/// Runs a [`Protocol`] as a top-level simnet process starting at step 0.
#[derive(Debug, Clone)]
pub struct Standalone<P> {
    pub inner: P,
    pub decided_at: Option<StepIndex>,
}

impl<P: Protocol> Standalone<P> {
    pub fn new(inner: P) -> Self {
        Standalone { inner, decided_at: None }
    }
}

impl<P: Protocol> Process for Standalone<P> {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        let t = ctx.step();
        if t < self.inner.duration() {
            ctx.wake_at(t + 1);
        }
        if t <= self.inner.duration() {
            self.inner.on_step(t, inbox, ctx);
        }
        if self.decided_at.is_none() && self.inner.output().is_some() {
            self.decided_at = Some(t);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome<P> {
    pub decisions: BTreeMap<ProcessId, Value>,
    pub decided_at: BTreeMap<ProcessId, StepIndex>,
    pub processes: BTreeMap<ProcessId, P>,
    pub metrics: MetricsLedger,
    pub transcript: Transcript,
}

impl<P> RunOutcome<P> {
    /// True when every honest process decided the same value.
    pub fn consistent(&self) -> bool {
        let mut it = self.decisions.values();
        match it.next() {
            Some(first) => it.all(|v| v == first),
            None => true,
        }
    }

    pub fn common_decision(&self) -> Option<&Value> {
        if self.consistent() { self.decisions.values().next() } else { None }
    }

    pub fn last_decision_step(&self) -> Option<StepIndex> {
        self.decided_at.values().max().copied()
    }
}

/// Runs one instance of `P` to completion with `adversary` in a single-round network.
pub fn run_protocol<P: Protocol, A: Adversary>(
    params: Params,
    adversary: A,
    record_transcript: bool,
    mut make: impl FnMut(ProcessId) -> P,
) -> Result<RunOutcome<P>, SimError> {
    let probe = make(ProcessId(0));
    let steps = probe.duration() + 1;
    let mut cfg = NetworkConfig::new(params.n, params.f, steps, 1);
    cfg.record_transcript = record_transcript;
    let mut net = Network::new(cfg, adversary, |p| Standalone::new(make(p)))?;
    net.run()?;
    let mut out = RunOutcome {
        decisions: BTreeMap::new(),
        decided_at: BTreeMap::new(),
        processes: BTreeMap::new(),
        metrics: net.metrics().clone(),
        transcript: net.transcript().clone(),
    };
    for (p, s) in net.honest_processes() {
        if let Some(v) = s.inner.output() {
            out.decisions.insert(p, v.clone());
        }
        if let Some(t) = s.decided_at {
            out.decided_at.insert(p, t);
        }
        out.processes.insert(p, s.inner.clone());
    }
    Ok(out)
}
