use std::collections::BTreeSet;
use std::sync::Arc;

use consensus::{DolevStrong, Protocol};
use marker::{Mark, MarkerNode};
use muxer::{InstanceId, Mux};
use simnet::codec::{Reader, Writer};
use simnet::{Ctx, Delivery, Nonce, Params, ProcessId, RoundIndex, SignedMessage, StepIndex};

use crate::chain::{genesis, parse_chain, x_tag, y_tag, ParsedChain, Tail};
use crate::CycleTopology;

const KIND_RESPONSE: u8 = 1;
const KIND_QUERY: u8 = 2;

/// Steps in one proof-of-response period: request, reply, check, then a
/// query broadcast and a response broadcast of f+2 steps each.
pub fn period_len(f: usize) -> StepIndex {
    2 * f as StepIndex + 7
}

/// N periods, then the delivery step and the receiving step.
pub fn round_len(n: usize, f: usize) -> StepIndex {
    n as StepIndex * period_len(f) + 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PorId {
    round: RoundIndex,
    period: u64,
    phase: u64,
    a: ProcessId,
    b: ProcessId,
}

impl PorId {
    fn pack(&self, n: usize) -> InstanceId {
        let n = n as u64;
        (((self.round * n + self.period) * 2 + self.phase) * n + self.a.0 as u64) * n + self.b.0 as u64
    }

    fn unpack(id: InstanceId, n: usize) -> PorId {
        let n = n as u64;
        let b = ProcessId((id % n) as u32);
        let id = id / n;
        let a = ProcessId((id % n) as u32);
        let id = id / n;
        let phase = id % 2;
        let id = id / 2;
        PorId { round: id / n, period: id % n, phase, a, b }
    }

    /// Local step of the round at which this broadcast starts.
    fn start(&self, f: usize) -> StepIndex {
        self.period * period_len(f) + if self.phase == 0 { 2 } else { f as StepIndex + 4 }
    }
}

fn wrap(kind: u8, extra: Option<ProcessId>, inner: SignedMessage) -> SignedMessage {
    let mut w = Writer::new();
    w.u8(kind);
    if let Some(p) = extra {
        w.u32(p.0);
    }
    SignedMessage::with_attachments(w.finish(), vec![inner])
}

fn unwrap(msg: &SignedMessage, kind: u8) -> Option<(Option<ProcessId>, &SignedMessage)> {
    if !msg.stack.is_empty() || msg.attachments.len() != 1 {
        return None;
    }
    let mut r = Reader::new(&msg.payload);
    if r.u8().ok()? != kind {
        return None;
    }
    let extra = if r.remaining() > 0 { Some(ProcessId(r.u32().ok()?)) } else { None };
    r.finish().ok()?;
    Some((extra, &msg.attachments[0]))
}

/// What came back for an extension request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Extension(SignedMessage),
    Refusal(SignedMessage),
    Invalid,
}

#[derive(Debug, Clone)]
struct Payment {
    target: ProcessId,
    /// Partial chain ending in a path signature.
    body: SignedMessage,
    last: ProcessId,
    /// (responder, request) still to be answered.
    request: Option<(ProcessId, SignedMessage)>,
    sent_in: Option<u64>,
    complete: Option<SignedMessage>,
    refused: Option<SignedMessage>,
    delivered: bool,
}

/// Answer to a third party forwarding a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClaimAnswer {
    Paid,
    Refuted(SignedMessage),
}

/// One process's cycle-coin state for one coin (one origin, one nonce).
#[derive(Debug, Clone)]
pub struct CycleCoinNode {
    topo: Arc<CycleTopology>,
    params: Params,
    me: ProcessId,
    origin: ProcessId,
    deleted: BTreeSet<ProcessId>,
    chain: Option<SignedMessage>,
    started: bool,
    /// Partials this process signed, with the weight of what it signed.
    signed: Vec<(u64, SignedMessage)>,
    /// Valid chains that ended here.
    received: Vec<(u64, SignedMessage)>,
    accepted: Vec<SignedMessage>,
    accepted_now: Option<SignedMessage>,
    /// Chains this process completed as payer.
    paid: Vec<SignedMessage>,
    pay: Option<Payment>,
    replies: Vec<SignedMessage>,
    queries: Vec<(PorId, SignedMessage)>,
    por: Mux<DolevStrong>,
    responsive: bool,
    burned: bool,
}

impl CycleCoinNode {
    pub fn new(topo: Arc<CycleTopology>, params: Params, me: ProcessId, origin: ProcessId) -> Self {
        assert_eq!(topo.n(), params.n, "topology size must match N");
        assert!(params.f + 1 < params.n, "the embedded broadcast needs f+1 relays");
        CycleCoinNode {
            topo,
            params,
            me,
            origin,
            deleted: BTreeSet::new(),
            chain: None,
            started: false,
            signed: Vec::new(),
            received: Vec::new(),
            accepted: Vec::new(),
            accepted_now: None,
            paid: Vec::new(),
            pay: None,
            replies: Vec::new(),
            queries: Vec::new(),
            por: Mux::new(),
            responsive: true,
            burned: false,
        }
    }

    /// A node that never answers extension requests (harness for deletion tests).
    pub fn unresponsive(mut self) -> Self {
        self.responsive = false;
        self
    }

    pub fn topology(&self) -> &CycleTopology {
        &self.topo
    }

    pub fn origin(&self) -> ProcessId {
        self.origin
    }

    pub fn deleted(&self) -> &BTreeSet<ProcessId> {
        &self.deleted
    }

    pub fn chain(&self) -> Option<&SignedMessage> {
        self.chain.as_ref()
    }

    pub fn accepted(&self) -> &[SignedMessage] {
        &self.accepted
    }

    pub fn paid(&self) -> &[SignedMessage] {
        &self.paid
    }

    pub fn signed_partials(&self) -> &[(u64, SignedMessage)] {
        &self.signed
    }

    pub fn max_signed_weight(&self) -> Option<u64> {
        self.signed.iter().map(|(w, _)| *w).max()
    }

    pub fn best_received_weight(&self) -> Option<u64> {
        self.received.iter().map(|(w, _)| *w).max()
    }

    /// The chain refused by a responder in the current payment, if any.
    pub fn refusal(&self) -> Option<&SignedMessage> {
        self.pay.as_ref().and_then(|p| p.refused.as_ref())
    }

    fn parse(&self, msg: &SignedMessage, ctx: &Ctx<'_>) -> Option<ParsedChain> {
        parse_chain(msg, &self.topo, &self.deleted, self.origin, ctx.nonce()).ok()
    }

    fn weight(&self, p: &ParsedChain) -> u64 {
        p.weight(&self.topo)
    }

    /// Rule 3a: a partial addressed to `me`, built on a chain of this round's length ending at its extender.
    pub fn valid_request(&self, msg: &SignedMessage, requester: ProcessId, round: RoundIndex, ctx: &Ctx<'_>) -> Option<u64> {
        let p = self.parse(msg, ctx)?;
        let Tail::Open { ext, next, .. } = p.tail else { return None };
        let ok = next == self.me && ext == requester && p.length() as u64 == round && ctx.verify(msg);
        ok.then(|| self.weight(&p))
    }

    /// Rules 3b to 3d for a request already known to be valid.
    fn respond(&mut self, request: &SignedMessage, weight: u64, ctx: &mut Ctx<'_>) -> Option<SignedMessage> {
        if let Some((_, g)) = self.signed.iter().filter(|(w, _)| *w >= weight).max_by_key(|(w, _)| *w) {
            return Some(g.clone());
        }
        if let Some((_, g)) = self.received.iter().filter(|(w, _)| *w >= weight).max_by_key(|(w, _)| *w) {
            return Some(g.clone());
        }
        let mut r = request.clone();
        if !ctx.sign(&mut r, b"") {
            return None;
        }
        self.signed.push((weight, r.clone()));
        Some(r)
    }

    /// Classifies `reply` to `request` sent to `b`.
    pub fn classify_reply(
        &self,
        request: &SignedMessage,
        request_weight: u64,
        b: ProcessId,
        reply: &SignedMessage,
        ctx: &Ctx<'_>,
    ) -> Reply {
        let k = request.stack.len();
        if reply.stack.len() == k + 1
            && reply.prefix(k) == *request
            && reply.stack[k].signer == b
            && reply.stack[k].tag.is_empty()
            && &reply.stack[k].nonce == ctx.nonce()
            && ctx.verify(reply)
        {
            return Reply::Extension(reply.clone());
        }
        if self.valid_refusal(reply, b, request_weight, ctx) {
            return Reply::Refusal(reply.clone());
        }
        Reply::Invalid
    }

    /// A chain ending at `b`, or a partial signed by `b`, at least as heavy as `weight`.
    pub fn valid_refusal(&self, g: &SignedMessage, b: ProcessId, weight: u64, ctx: &Ctx<'_>) -> bool {
        let Some(p) = self.parse(g, ctx) else { return false };
        let owned = match &p.tail {
            Tail::Complete => p.end() == b,
            Tail::Countersigned { path, .. } => path.last() == Some(&b),
            Tail::Open { ext, .. } => *ext == b,
        };
        owned && self.weight(&p) >= weight && ctx.verify(g)
    }

    fn sign_tag(&mut self, msg: &mut SignedMessage, tag: Vec<u8>, ctx: &mut Ctx<'_>) -> bool {
        ctx.sign(msg, &tag)
    }

    /// Turns the current body into the next request or the finished chain.
    fn advance(&mut self, ctx: &mut Ctx<'_>) {
        let Some(mut pay) = self.pay.take() else { return };
        let next = self.topo.succ_alive(pay.last, &self.deleted);
        let mut m = pay.body.clone();
        if next == pay.target {
            if self.sign_tag(&mut m, y_tag(pay.target), ctx) {
                pay.complete = Some(m);
            }
            pay.request = None;
        } else if next == self.me {
            // wrapped round without reaching the target: give up
            pay.request = None;
        } else if self.sign_tag(&mut m, x_tag(next), ctx) {
            if let Some(p) = self.parse(&m, ctx) {
                let w = self.weight(&p);
                self.signed.push((w, m.clone()));
            }
            pay.request = Some((next, m));
            pay.sent_in = None;
        }
        self.pay = Some(pay);
    }

    fn start_payment(&mut self, target: ProcessId, ctx: &mut Ctx<'_>) {
        let Some(c) = self.chain.clone() else { return };
        let mut body = c;
        if !ctx.sign(&mut body, b"") {
            return;
        }
        self.pay = Some(Payment {
            target,
            body,
            last: self.me,
            request: None,
            sent_in: None,
            complete: None,
            refused: None,
            delivered: false,
        });
        self.advance(ctx);
    }

    /// Applies a classified reply for the pending request.
    fn take_reply(&mut self, reply: Reply, ctx: &mut Ctx<'_>) -> bool {
        let Some(pay) = self.pay.as_mut() else { return false };
        let Some((b, _)) = pay.request.clone() else { return false };
        match reply {
            Reply::Extension(r) => {
                pay.body = r;
                pay.last = b;
                pay.request = None;
                self.advance(ctx);
                true
            }
            Reply::Refusal(g) => {
                pay.refused = Some(g);
                pay.request = None;
                true
            }
            Reply::Invalid => false,
        }
    }

    fn try_accept(&mut self, c: &SignedMessage, round: RoundIndex, ctx: &Ctx<'_>) {
        let Some(p) = self.parse(c, ctx) else { return };
        if !p.is_complete() || p.end() != self.me || p.length() as u64 != round + 1 || !ctx.verify(c) {
            return;
        }
        let w = self.weight(&p);
        if self.received.iter().any(|(_, g)| g == c) {
            return;
        }
        let stale = self.signed.iter().any(|(sw, _)| *sw == w) || self.received.iter().any(|(rw, _)| *rw == w);
        self.received.push((w, c.clone()));
        if !stale && self.accepted_now.is_none() {
            self.accepted_now = Some(c.clone());
        }
    }

    fn handle_local(&mut self, d: &Delivery, round: RoundIndex, ctx: &mut Ctx<'_>) {
        let Some(p) = self.parse(&d.msg, ctx) else { return };
        // replies travel bare so they keep their instance nonce; any chain may be one
        self.replies.push(d.msg.clone());
        match p.tail {
            Tail::Open { .. } => {
                if !self.responsive {
                    return;
                }
                if let Some(w) = self.valid_request(&d.msg, d.from, round, ctx) {
                    if let Some(r) = self.respond(&d.msg, w, ctx) {
                        ctx.send(d.from, r);
                    }
                }
            }
            Tail::Complete => self.try_accept(&d.msg, round, ctx),
            Tail::Countersigned { .. } => {}
        }
    }

    fn service_por(&mut self, inbox: &[Delivery], round: RoundIndex, local: StepIndex, ctx: &mut Ctx<'_>) -> Vec<Delivery> {
        let (n, f, me, params) = (self.params.n, self.params.f, self.me, self.params);
        let round_start = ctx.step() - local;
        self.por.service(
            inbox,
            ctx,
            false,
            |id| {
                let pid = PorId::unpack(id, n);
                let leader = if pid.phase == 0 { pid.a } else { pid.b };
                let start = pid.start(f);
                let live = pid.round == round && pid.period < n as u64 && local > start && local <= start + f as u64 + 2;
                live.then(|| DolevStrong::new(params, me, leader, None))
            },
            |id, ds, mail, ctx| {
                let start = PorId::unpack(id, n).start(f);
                if local < start || local > start + f as u64 + 2 {
                    return;
                }
                ds.on_step(local - start, mail, ctx);
                ctx.wake_at(round_start + start + f as u64 + 2);
            },
        )
    }

    fn start_broadcast(&mut self, pid: PorId, value: SignedMessage, ctx: &mut Ctx<'_>) {
        let id = pid.pack(self.params.n);
        let mut ds = DolevStrong::new(self.params, self.me, self.me, Some(value));
        ctx.scoped(id, |ctx| ds.on_step(0, &[], ctx));
        self.por.insert(id, ds);
        ctx.wake_at(ctx.step() + self.params.f as u64 + 2);
    }

    /// Decided value of a broadcast ending now, removing the instance.
    fn finish_broadcast(&mut self, pid: PorId) -> Option<SignedMessage> {
        let mut ds = self.por.get(pid.pack(self.params.n)).cloned()?;
        ds.finalize();
        ds.output().cloned()
    }

    fn period_actions(&mut self, round: RoundIndex, local: StepIndex, ctx: &mut Ctx<'_>) {
        let (n, f) = (self.params.n, self.params.f);
        let len = period_len(f);
        let k = local / len;
        let off = local % len;
        let round_start = ctx.step() - local;
        if k >= n as u64 {
            return;
        }
        if off == 0 {
            if let Some(pay) = self.pay.as_mut() {
                if let Some((b, req)) = pay.request.clone() {
                    if pay.sent_in.is_none() {
                        pay.sent_in = Some(k);
                        ctx.send(b, req);
                        ctx.wake_at(ctx.step() + 2);
                    }
                }
            }
        }
        if off == 2 {
            let pending = self.pay.as_ref().and_then(|p| {
                p.request.clone().filter(|_| p.sent_in == Some(k))
            });
            if let Some((b, req)) = pending {
                let w = self.parse(&req, ctx).map(|p| self.weight(&p)).unwrap_or(0);
                let replies = std::mem::take(&mut self.replies);
                let mut done = false;
                for r in &replies {
                    let c = self.classify_reply(&req, w, b, r, ctx);
                    if self.take_reply(c, ctx) {
                        done = true;
                        break;
                    }
                }
                if done {
                    self.schedule_next(round_start, k, ctx);
                } else {
                    let pid = PorId { round, period: k, phase: 0, a: self.me, b };
                    self.start_broadcast(pid, wrap(KIND_QUERY, Some(b), req), ctx);
                }
            }
        }
        if off == f as u64 + 4 {
            let ids: Vec<InstanceId> = self
                .por
                .iter()
                .map(|(id, _)| id)
                .filter(|id| {
                    let p = PorId::unpack(*id, n);
                    p.round == round && p.period == k && p.phase == 0
                })
                .collect();
            for id in ids {
                let pid = PorId::unpack(id, n);
                let Some(v) = self.finish_broadcast(pid) else { continue };
                let Some((Some(b), req)) = unwrap(&v, KIND_QUERY) else { continue };
                let req = req.clone();
                if b != pid.b || self.valid_request_for(&req, pid.a, b, round, ctx).is_none() {
                    continue;
                }
                let rid = PorId { phase: 1, ..pid };
                self.queries.push((rid, req.clone()));
                ctx.wake_at(round_start + rid.start(f) + f as u64 + 2);
                if b == self.me && self.responsive {
                    let w = self.valid_request_for(&req, pid.a, b, round, ctx).expect("checked");
                    if let Some(r) = self.respond(&req, w, ctx) {
                        self.start_broadcast(rid, wrap(KIND_RESPONSE, None, r), ctx);
                    }
                }
            }
        }
        if off == 2 * f as u64 + 6 {
            let due: Vec<(PorId, SignedMessage)> =
                self.queries.iter().filter(|(p, _)| p.round == round && p.period == k).cloned().collect();
            self.queries.retain(|(p, _)| !(p.round == round && p.period == k));
            for (rid, req) in due {
                let w = self.parse(&req, ctx).map(|p| self.weight(&p)).unwrap_or(0);
                let reply = self
                    .finish_broadcast(rid)
                    .and_then(|v| unwrap(&v, KIND_RESPONSE).map(|(_, r)| r.clone()))
                    .map(|r| self.classify_reply(&req, w, rid.b, &r, ctx))
                    .unwrap_or(Reply::Invalid);
                let mine = rid.a == self.me
                    && self.pay.as_ref().is_some_and(|p| p.request.as_ref().is_some_and(|(b, r)| *b == rid.b && *r == req));
                if reply == Reply::Invalid {
                    self.deleted.insert(rid.b);
                    if mine {
                        // route around the deleted process
                        if let Some(p) = self.pay.as_mut() {
                            p.request = None;
                        }
                        self.advance(ctx);
                        self.schedule_next(round_start, k, ctx);
                    }
                } else if mine {
                    self.take_reply(reply, ctx);
                    self.schedule_next(round_start, k, ctx);
                }
            }
            let stale: Vec<InstanceId> = self
                .por
                .iter()
                .map(|(id, _)| id)
                .filter(|id| {
                    let p = PorId::unpack(*id, n);
                    p.round < round || (p.round == round && p.period <= k)
                })
                .collect();
            let mut keep = Mux::new();
            for (id, ds) in self.por.iter() {
                if !stale.contains(&id) {
                    keep.insert(id, ds.clone());
                }
            }
            self.por = keep;
        }
    }

    fn valid_request_for(&self, req: &SignedMessage, a: ProcessId, b: ProcessId, round: RoundIndex, ctx: &Ctx<'_>) -> Option<u64> {
        let p = self.parse(req, ctx)?;
        let Tail::Open { ext, next, .. } = p.tail else { return None };
        let ok = next == b && ext == a && p.length() as u64 == round && ctx.verify(req);
        ok.then(|| self.weight(&p))
    }

    fn schedule_next(&mut self, round_start: StepIndex, k: u64, ctx: &mut Ctx<'_>) {
        let len = period_len(self.params.f);
        if self.pay.as_ref().is_some_and(|p| p.request.is_some()) {
            ctx.wake_at(round_start + (k + 1) * len);
        }
    }

    /// Answers a third party who forwards a chain claimed to pay this process.
    pub fn answer_claim(&self, c: &SignedMessage, nonce: &Nonce) -> ClaimAnswer {
        if self.accepted.contains(c) || self.accepted_now.as_ref() == Some(c) {
            return ClaimAnswer::Paid;
        }
        let Ok(p) = parse_chain(c, &self.topo, &self.deleted, self.origin, nonce) else { return ClaimAnswer::Paid };
        let w = self.weight(&p);
        let rival = self
            .signed
            .iter()
            .chain(self.received.iter())
            .find(|(gw, g)| *gw == w && g != c)
            .map(|(_, g)| g.clone());
        match rival {
            Some(g) => ClaimAnswer::Refuted(g),
            None => ClaimAnswer::Paid,
        }
    }
}

impl MarkerNode for CycleCoinNode {
    fn round_len(&self) -> StepIndex {
        round_len(self.params.n, self.params.f)
    }

    fn on_step(&mut self, round: RoundIndex, local: StepIndex, input: ProcessId, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if !self.started {
            self.started = true;
            if self.me == self.origin {
                // a holder first woken late has kept the coin idle so far
                let me = self.me;
                let mut c = genesis(me, &mut |_, m, t| ctx.sign(m, t));
                for _ in 0..round {
                    c = c.and_then(|mut c| ctx.sign(&mut c, &y_tag(me)).then_some(c));
                }
                self.chain = c;
            }
        }
        if local == 0 {
            self.accepted_now = None;
            self.pay = None;
            self.replies.clear();
            self.burned = false;
            if self.chain.is_some() && input != self.me && input.index() < self.params.n {
                if self.deleted.contains(&input) {
                    // a proven-faulty target: the coin is given up without a chain
                    self.burned = true;
                } else {
                    self.start_payment(input, ctx);
                }
            }
        }
        let local_mail = self.service_por(inbox, round, local, ctx);
        for d in &local_mail {
            self.handle_local(d, round, ctx);
        }
        self.period_actions(round, local, ctx);
        let final_step = self.params.n as StepIndex * period_len(self.params.f);
        if local == 0 && self.pay.is_some() {
            ctx.wake_at(ctx.step() + final_step);
        }
        if local == final_step {
            if let Some(pay) = self.pay.as_mut() {
                if let Some(c) = pay.complete.clone() {
                    ctx.send(pay.target, c.clone());
                    pay.delivered = true;
                    self.paid.push(c);
                }
            }
        }
        // replies are only read at the check step of a period
        if local % period_len(self.params.f) != 2 {
            self.replies.clear();
        }
    }

    fn end_round(&mut self, _round: RoundIndex, ctx: &mut Ctx<'_>) -> Mark {
        let delivered = self.pay.as_ref().is_some_and(|p| p.delivered) || std::mem::take(&mut self.burned);
        self.pay = None;
        let accepted = self.accepted_now.take();
        if delivered {
            self.chain = None;
            return Mark::Unmarked;
        }
        if let Some(mut c) = self.chain.take() {
            // keep the marker: pad with an empty segment so the length tracks the round
            if ctx.sign(&mut c, &y_tag(self.me)) {
                self.chain = Some(c);
                return Mark::Kept;
            }
            return Mark::Unmarked;
        }
        if let Some(c) = accepted {
            let from = self.parse(&c, ctx).map(|p| p.extender());
            self.accepted.push(c.clone());
            self.chain = Some(c);
            return Mark::Received { from };
        }
        Mark::Unmarked
    }

    fn is_marked(&self) -> bool {
        // the origin holds the genesis chain before signing it
        self.chain.is_some() || (!self.started && self.me == self.origin)
    }
}
