use muxer::{route, Route};
use simnet::{Ctx, Delivery, Params, ProcessId, StepIndex};

use crate::{sender_fault, Agreement, Protocol, Value};

const INNER: u64 = 0;
const ANNOUNCE: u64 = 1;

/// Broadcast from agreement: the leader announces once, then everyone agrees
/// on what they adopted.
#[derive(Debug, Clone)]
pub struct BbFromBa<A> {
    params: Params,
    me: ProcessId,
    leader: ProcessId,
    initial: Option<Value>,
    adopted: Option<Value>,
    inner: Option<A>,
}

impl<A: Agreement> BbFromBa<A> {
    pub fn new(params: Params, me: ProcessId, leader: ProcessId, initial: Option<Value>) -> Self {
        BbFromBa { params, me, leader, initial, adopted: None, inner: None }
    }

    pub fn adopted(&self) -> Option<&Value> {
        self.adopted.as_ref()
    }

    pub fn inner(&self) -> Option<&A> {
        self.inner.as_ref()
    }
}

impl<A: Agreement> Protocol for BbFromBa<A> {
    fn on_step(&mut self, local: StepIndex, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if local == 0 {
            if self.me == self.leader {
                let mut m = self.initial.clone().unwrap_or_else(sender_fault).unsigned();
                if ctx.scoped(ANNOUNCE, |ctx| ctx.sign(&mut m, b"")) {
                    ctx.send_all(&m);
                }
            }
            return;
        }
        if local == 1 {
            let want = ctx.nonce().child(ANNOUNCE);
            let mut seen: Vec<Value> = Vec::new();
            for d in inbox {
                let m = &d.msg;
                let ok = m.stack.len() == 1
                    && m.stack[0].signer == self.leader
                    && m.stack[0].tag.is_empty()
                    && m.stack[0].nonce == want
                    && ctx.verify(m);
                if ok && !seen.contains(&m.unsigned()) {
                    seen.push(m.unsigned());
                }
            }
            let adopted = if seen.len() == 1 { seen.pop().unwrap() } else { sender_fault() };
            self.inner = Some(A::start(self.params, self.me, adopted.clone()));
            self.adopted = Some(adopted);
        }
        // unsigned traffic carries no nonce and can only belong to the inner protocol
        let mail: Vec<Delivery> = inbox
            .iter()
            .filter(|d| matches!(route(&d.msg, ctx.nonce()), Route::Instance(INNER) | Route::Local))
            .cloned()
            .collect();
        if let Some(inner) = self.inner.as_mut() {
            ctx.scoped(INNER, |ctx| inner.on_step(local - 1, &mail, ctx));
        }
    }

    fn output(&self) -> Option<&Value> {
        self.inner.as_ref().and_then(|a| a.output())
    }

    fn duration(&self) -> StepIndex {
        1 + A::start(self.params, self.me, sender_fault()).duration()
    }
}
