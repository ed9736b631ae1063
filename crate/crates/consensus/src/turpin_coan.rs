use std::collections::{BTreeMap, BTreeSet};

use muxer::{route, Route};
use simnet::codec::{Reader, Writer};
use simnet::{Ctx, Delivery, Params, ProcessId, SignedMessage, StepIndex};

use crate::{is_bit, sender_fault, Agreement, BinaryAgreement, Protocol, Value};

const KIND_VALUE: u8 = 1;
const KIND_PERPLEXED: u8 = 2;
/// Child nonce the wrapped binary agreement runs under.
const INNER: u64 = 0;

/// Multi-valued agreement from binary agreement with two extra rounds.
#[derive(Debug, Clone)]
pub struct TurpinCoan<B> {
    params: Params,
    me: ProcessId,
    input: Value,
    values: BTreeMap<ProcessId, Value>,
    perplexed: bool,
    perplexed_claims: BTreeSet<ProcessId>,
    alert: Option<bool>,
    agreed_alert: Option<bool>,
    inner: Option<B>,
    decision: Option<Value>,
    tie_warning: bool,
}

impl<B: BinaryAgreement> TurpinCoan<B> {
    pub fn is_perplexed(&self) -> bool {
        self.perplexed
    }

    pub fn alert(&self) -> Option<bool> {
        self.alert
    }

    /// The bit the wrapped agreement decided on the alert flag.
    pub fn agreed_alert(&self) -> Option<bool> {
        self.agreed_alert
    }

    /// Set when the most-frequent-value branch hit a tie.
    pub fn hit_tie(&self) -> bool {
        self.tie_warning
    }

    fn inner_duration(&self) -> StepIndex {
        // every binary agreement in this crate has a fixed length; probe it
        B::start(self.params, self.me, false).duration()
    }

    fn decide(&mut self, agreed_alert: bool) {
        self.agreed_alert = Some(agreed_alert);
        if agreed_alert {
            self.decision = Some(sender_fault());
            return;
        }
        let mut counts: BTreeMap<Vec<u8>, (usize, Value)> = BTreeMap::new();
        for (p, v) in &self.values {
            if !self.perplexed_claims.contains(p) {
                counts.entry(v.encode()).or_insert((0, v.clone())).0 += 1;
            }
        }
        let best = counts.values().map(|(c, _)| *c).max().unwrap_or(0);
        let mut winners = counts.values().filter(|(c, _)| *c == best);
        let chosen = winners.next().map(|(_, v)| v.clone()).unwrap_or_else(sender_fault);
        if winners.next().is_some() {
            self.tie_warning = true;
            log::warn!("turpin-coan tie among content values at {}; preconditions violated", self.me);
        }
        self.decision = Some(chosen);
    }
}

fn encode(kind: u8, v: Option<&Value>) -> SignedMessage {
    let mut w = Writer::new();
    w.u8(kind);
    if let Some(v) = v {
        w.bytes(&v.encode());
    }
    SignedMessage::new(w.finish())
}

fn decode_value(msg: &SignedMessage) -> Option<Value> {
    if !msg.stack.is_empty() {
        return None;
    }
    let mut r = Reader::new(&msg.payload);
    if r.u8().ok()? != KIND_VALUE {
        return None;
    }
    let v = SignedMessage::decode(r.bytes().ok()?).ok()?;
    r.finish().ok()?;
    Some(v)
}

fn is_perplexed_claim(msg: &SignedMessage) -> bool {
    msg.stack.is_empty() && msg.payload == [KIND_PERPLEXED]
}

impl<B: BinaryAgreement> Agreement for TurpinCoan<B> {
    fn start(params: Params, me: ProcessId, input: Value) -> Self {
        assert!(3 * params.f < params.n, "turpin-coan needs 3f < N");
        TurpinCoan {
            params,
            me,
            input,
            values: BTreeMap::new(),
            perplexed: false,
            perplexed_claims: BTreeSet::new(),
            alert: None,
            agreed_alert: None,
            inner: None,
            decision: None,
            tie_warning: false,
        }
    }
}

impl<B: BinaryAgreement> Protocol for TurpinCoan<B> {
    fn on_step(&mut self, local: StepIndex, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if self.decision.is_some() {
            return;
        }
        match local {
            0 => ctx.send_all(&encode(KIND_VALUE, Some(&self.input))),
            1 => {
                for p in self.params.processes() {
                    self.values.insert(p, sender_fault());
                }
                let mut heard = BTreeSet::new();
                for d in inbox {
                    if let Some(v) = decode_value(&d.msg) {
                        if heard.insert(d.from) {
                            self.values.insert(d.from, v);
                        }
                    }
                }
                self.values.insert(self.me, self.input.clone());
                let differing = self.values.values().filter(|v| **v != self.input).count();
                self.perplexed = 2 * differing >= self.params.n - self.params.f;
                if self.perplexed {
                    ctx.send_all(&encode(KIND_PERPLEXED, None));
                }
            }
            _ => {
                if local == 2 {
                    for d in inbox {
                        if is_perplexed_claim(&d.msg) {
                            self.perplexed_claims.insert(d.from);
                        }
                    }
                    if self.perplexed {
                        self.perplexed_claims.insert(self.me);
                    }
                    let alert = self.perplexed_claims.len() + 2 * self.params.f >= self.params.n;
                    self.alert = Some(alert);
                    self.inner = Some(B::start(self.params, self.me, alert));
                }
                let mail: Vec<Delivery> =
                    inbox.iter().filter(|d| route(&d.msg, ctx.nonce()) == Route::Instance(INNER)).cloned().collect();
                let inner_local = local - 2;
                let Some(inner) = self.inner.as_mut() else { return };
                ctx.scoped(INNER, |ctx| inner.on_step(inner_local, &mail, ctx));
                if let Some(out) = inner.output() {
                    let agreed = is_bit(out, true);
                    self.decide(agreed);
                }
            }
        }
    }

    fn output(&self) -> Option<&Value> {
        self.decision.as_ref()
    }

    fn duration(&self) -> StepIndex {
        2 + self.inner_duration()
    }
}
