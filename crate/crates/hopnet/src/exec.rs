use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cyclecoin::{round_len, verify_chain, ClaimAnswer, CycleCoinNode};
use marker::{Mark, MarkerNode};
use muxer::{InstanceId, Mux};
use simnet::codec::{Reader, Writer};
use simnet::{
    Ctx, Delivery, Network, NetworkConfig, Nonce, Params, Process, ProcessId, Puppets, RoundIndex, SignatureOracle,
    SignedMessage,
};

use crate::{CycleSet, HopError, HopPath, Leg};

const KIND_REQUEST: u8 = 1;
const KIND_PROMISE: u8 = 2;
const KIND_INTENT: u8 = 3;
const KIND_PROOF_REQUEST: u8 = 4;
const KIND_PROOF: u8 = 5;

/// Who pays whom, on which cycle. Leg j is paid by slot j in micro round j+1;
/// slot 0 is the payer a and slot Z+1 the payee b.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub legs: Vec<Leg>,
}

impl Route {
    pub fn from_path(path: &HopPath) -> Route {
        Route { legs: path.legs() }
    }

    /// Number of intermediaries.
    pub fn z(&self) -> usize {
        self.legs.len() - 1
    }

    pub fn a(&self) -> ProcessId {
        self.legs[0].from
    }

    pub fn b(&self) -> ProcessId {
        self.legs[self.z()].to
    }

    pub fn slot(&self, j: usize) -> ProcessId {
        if j <= self.z() {
            self.legs[j].from
        } else {
            self.b()
        }
    }

    pub fn pay_round(j: usize) -> RoundIndex {
        j as RoundIndex + 1
    }

    /// Promise round, Z+1 payment rounds, proof round.
    pub fn rounds(&self) -> u64 {
        self.z() as u64 + 3
    }

    /// All-honest message count: a request and a promise per intermediary,
    /// the intent to b, each leg's cycle-coin cost, and a proof request and
    /// reply per intermediary.
    pub fn reference_messages(&self) -> u64 {
        let z = self.z() as u64;
        let legs: u64 = self.legs.iter().map(|l| 2 * l.steps.saturating_sub(1) + u64::from(l.steps >= 1)).sum();
        4 * z + 1 + legs
    }

    /// Contiguous legs on exact cycle distances, distinct payers, b not among them.
    pub fn validate(&self, cycles: &CycleSet) -> Result<(), HopError> {
        let bad = |m: &str| Err(HopError::Route(m.to_string()));
        if self.legs.is_empty() {
            return bad("no legs");
        }
        let mut seen = BTreeSet::new();
        for (j, l) in self.legs.iter().enumerate() {
            if l.cycle >= cycles.len() || l.from.index() >= cycles.n() || l.to.index() >= cycles.n() {
                return bad("leg outside the cycle set");
            }
            if l.from == l.to || cycles.get(l.cycle).dist(l.from, l.to) != l.steps {
                return bad("leg length does not match its cycle");
            }
            if j > 0 && self.legs[j - 1].to != l.from {
                return bad("legs are not contiguous");
            }
            if !seen.insert(l.from) {
                return bad("two hops from the same process");
            }
        }
        if seen.contains(&self.b()) {
            return bad("payee also appears as a payer");
        }
        Ok(())
    }
}

/// The canonical promise text an intermediary signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromiseText {
    pub promiser: ProcessId,
    pub predecessor: ProcessId,
    pub successor: ProcessId,
    pub macro_round: u64,
    /// The micro round in which the promiser pays its successor.
    pub micro_round: u64,
    pub cycle_in: u32,
    pub cycle_out: u32,
}

impl PromiseText {
    fn encode(&self, kind: u8) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(kind);
        w.u32(self.promiser.0);
        w.u32(self.predecessor.0);
        w.u32(self.successor.0);
        w.u64(self.macro_round);
        w.u64(self.micro_round);
        w.u32(self.cycle_in);
        w.u32(self.cycle_out);
        w.finish()
    }

    fn decode(bytes: &[u8], kind: u8) -> Option<PromiseText> {
        let mut r = Reader::new(bytes);
        if r.u8().ok()? != kind {
            return None;
        }
        let t = PromiseText {
            promiser: ProcessId(r.u32().ok()?),
            predecessor: ProcessId(r.u32().ok()?),
            successor: ProcessId(r.u32().ok()?),
            macro_round: r.u64().ok()?,
            micro_round: r.u64().ok()?,
            cycle_in: r.u32().ok()?,
            cycle_out: r.u32().ok()?,
        };
        r.finish().ok()?;
        Some(t)
    }

    /// A promise signed once, by the promiser.
    pub fn from_signed(msg: &SignedMessage) -> Option<PromiseText> {
        let t = Self::decode(&msg.payload, KIND_PROMISE)?;
        (msg.stack.len() == 1 && msg.stack[0].signer == t.promiser && msg.stack[0].nonce.is_root()).then_some(t)
    }
}

fn promise_texts(route: &Route, macro_round: u64) -> Vec<PromiseText> {
    (1..=route.z())
        .map(|j| PromiseText {
            promiser: route.slot(j),
            predecessor: route.slot(j - 1),
            successor: route.slot(j + 1),
            macro_round,
            micro_round: Route::pay_round(j),
            cycle_in: route.legs[j - 1].cycle as u32,
            cycle_out: route.legs[j].cycle as u32,
        })
        .collect()
}

fn control(kind: u8, fields: &[u64]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(kind);
    for f in fields {
        w.u64(*f);
    }
    w.finish()
}

fn read_control(bytes: &[u8], kind: u8, n: usize) -> Option<Vec<u64>> {
    let mut r = Reader::new(bytes);
    if r.u8().ok()? != kind {
        return None;
    }
    let v = (0..n).map(|_| r.u64().ok()).collect::<Option<Vec<_>>>()?;
    r.finish().ok()?;
    Some(v)
}

/// Coin instance of the unit that `origin` holds on cycle `k`.
pub fn coin_instance(n: usize, k: usize, origin: ProcessId) -> InstanceId {
    (k * n + origin.index()) as InstanceId
}

fn instance_of(c: &SignedMessage) -> Option<InstanceId> {
    c.stack.first().and_then(|e| e.nonce.0.first().copied())
}

/// True when `c` is a verified, complete chain on `cycle` in which `payer`
/// paid `payee` during micro round `round`.
pub fn check_payment_proof(
    cycles: &CycleSet,
    oracle: &SignatureOracle,
    c: &SignedMessage,
    payer: ProcessId,
    payee: ProcessId,
    cycle: usize,
    round: RoundIndex,
) -> bool {
    let n = cycles.n();
    let Some(v) = instance_of(c) else { return false };
    if v as usize / n != cycle || cycle >= cycles.len() {
        return false;
    }
    let origin = ProcessId::from(v as usize % n);
    let nonce = Nonce::root().child(v);
    let Ok(p) = verify_chain(c, cycles.get(cycle), &BTreeSet::new(), origin, &nonce, oracle) else { return false };
    p.is_complete() && p.end() == payee && p.extender() == payer && p.length() as u64 == round + 1
}

/// How a participant deviates. Only the payer is assumed honest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Behavior {
    #[default]
    Honest,
    /// Promises, gets paid, never pays on, and denies having been paid.
    KeepCoin,
    /// Like `KeepCoin`, but claims to have paid by showing the chain it received.
    FalseProof,
    /// The payee: receives the payment and claims it did not.
    DenyReceipt,
    /// Never answers the promise request.
    SkipPromise,
}

/// A coin that became this process's during a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub round: RoundIndex,
    pub cycle: usize,
    pub from: Option<ProcessId>,
    pub instance: InstanceId,
}

/// One process of the hop network: a host for lazily created cycle-coin
/// instances plus the promise, intent and proof bookkeeping.
#[derive(Debug, Clone)]
pub struct HopProcess {
    me: ProcessId,
    cycles: Arc<CycleSet>,
    coin: Params,
    macro_round: u64,
    rounds: u64,
    behavior: Behavior,
    route: Option<Route>,
    coins: Mux<CycleCoinNode>,
    duty: Option<(ProcessId, PromiseText)>,
    promises: BTreeMap<usize, SignedMessage>,
    intent_sent: bool,
    /// (payer, cycle, round) the payee waits for.
    expect: Option<(ProcessId, usize, RoundIndex)>,
    receipts: Vec<Receipt>,
    paying: Option<(RoundIndex, InstanceId, ProcessId)>,
    proofs: BTreeMap<usize, SignedMessage>,
    decision: Option<bool>,
}

impl HopProcess {
    pub fn new(me: ProcessId, cycles: Arc<CycleSet>, coin_f: usize, macro_round: u64, rounds: u64) -> Self {
        let coin = Params { n: cycles.n(), f: coin_f };
        HopProcess {
            me,
            cycles,
            coin,
            macro_round,
            rounds,
            behavior: Behavior::Honest,
            route: None,
            coins: Mux::new(),
            duty: None,
            promises: BTreeMap::new(),
            intent_sent: false,
            expect: None,
            receipts: Vec::new(),
            paying: None,
            proofs: BTreeMap::new(),
            decision: None,
        }
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = Some(route);
        self
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    pub fn coins(&self) -> &Mux<CycleCoinNode> {
        &self.coins
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    /// Payer side: promises collected, by slot.
    pub fn promises(&self) -> &BTreeMap<usize, SignedMessage> {
        &self.promises
    }

    pub fn intent_sent(&self) -> bool {
        self.intent_sent
    }

    /// Payer side: verified payment proofs, by slot.
    pub fn proofs(&self) -> &BTreeMap<usize, SignedMessage> {
        &self.proofs
    }

    /// Payee side: what the protocol decided.
    pub fn decision(&self) -> Option<bool> {
        self.decision
    }

    /// Payee side: what the process says it decided.
    pub fn claims_paid(&self) -> Option<bool> {
        match self.behavior {
            Behavior::DenyReceipt => self.decision.map(|_| false),
            _ => self.decision,
        }
    }

    /// The chain this process shows as proof that it paid its successor.
    pub fn proof_of_payment(&self) -> Option<SignedMessage> {
        match self.behavior {
            Behavior::Honest => {
                let (_, v, _) = self.paying?;
                self.coins.get(v)?.paid().last().cloned()
            }
            Behavior::FalseProof => {
                let r = self.receipts.last()?;
                self.coins.get(r.instance)?.accepted().last().cloned()
            }
            _ => None,
        }
    }

    /// Answer when a third party forwards `c` as proof this process was paid.
    /// `None` is silence.
    pub fn answer_payment_claim(&self, c: &SignedMessage) -> Option<ClaimAnswer> {
        let v = instance_of(c)?;
        let node = self.coins.get(v);
        match self.behavior {
            Behavior::Honest => {
                Some(node.map(|m| m.answer_claim(c, &Nonce::root().child(v))).unwrap_or(ClaimAnswer::Paid))
            }
            Behavior::SkipPromise => None,
            // the best a liar can do is show some other chain it holds
            _ => {
                let other = node.and_then(|m| {
                    m.signed_partials().iter().map(|(_, g)| g).chain(m.accepted()).find(|g| *g != c).cloned()
                });
                Some(ClaimAnswer::Refuted(other.unwrap_or_else(|| c.clone())))
            }
        }
    }

    fn round_len(&self) -> u64 {
        round_len(self.coin.n, self.coin.f)
    }

    fn engaged(&self) -> bool {
        self.route.is_some() || self.duty.is_some() || self.expect.is_some() || !self.coins.is_empty()
    }

    /// Picks a coin on `cycle` to pay with, creating the own unit if untouched.
    fn coin_on(&mut self, cycle: usize) -> Option<InstanceId> {
        let n = self.coin.n;
        let held = self.coins.iter().find(|(v, m)| *v as usize / n == cycle && m.is_marked()).map(|(v, _)| v);
        if held.is_some() {
            return held;
        }
        let own = coin_instance(n, cycle, self.me);
        if self.coins.contains(own) {
            return None;
        }
        self.coins.insert(own, CycleCoinNode::new(self.cycles.get(cycle).clone(), self.coin, self.me, self.me));
        Some(own)
    }

    fn received(&self, round: RoundIndex, cycle: usize, from: ProcessId) -> bool {
        self.receipts.iter().any(|r| r.round == round && r.cycle == cycle && r.from == Some(from))
    }

    fn start_round(&mut self, round: RoundIndex, ctx: &mut Ctx<'_>) {
        if let Some(route) = self.route.clone() {
            if round == 0 {
                ctx.wake_at(ctx.step() + 2);
                for t in promise_texts(&route, self.macro_round) {
                    let mut m = SignedMessage::new(t.encode(KIND_REQUEST));
                    if ctx.sign(&mut m, b"") {
                        ctx.send(t.promiser, m);
                    }
                }
            }
            if !self.intent_sent {
                return;
            }
            if round == 1 {
                let leg = route.legs[0];
                if let Some(v) = self.coin_on(leg.cycle) {
                    self.paying = Some((round, v, leg.to));
                }
            }
            if round == route.rounds() - 1 {
                for j in 1..=route.z() {
                    let mut m = SignedMessage::new(control(KIND_PROOF_REQUEST, &[self.macro_round, j as u64]));
                    if ctx.sign(&mut m, b"") {
                        ctx.send(route.slot(j), m);
                    }
                }
            }
        }
        self.pay_on(round);
    }

    fn pay_on(&mut self, round: RoundIndex) {
        if let Some((_, t)) = self.duty {
            let honest = self.behavior == Behavior::Honest;
            if round == t.micro_round && honest && self.received(round - 1, t.cycle_in as usize, t.predecessor) {
                if let Some(v) = self.coin_on(t.cycle_out as usize) {
                    self.paying = Some((round, v, t.successor));
                }
            }
        }
    }

    fn on_control(&mut self, d: &Delivery, round: RoundIndex, ctx: &mut Ctx<'_>) {
        let m = &d.msg;
        let signed_by_sender = m.stack.len() == 1 && m.stack[0].signer == d.from && ctx.verify(m);
        match m.payload.first().copied() {
            Some(KIND_REQUEST) if signed_by_sender && round == 0 => {
                let Some(t) = PromiseText::decode(&m.payload, KIND_REQUEST) else { return };
                let ok = t.promiser == self.me
                    && t.macro_round == self.macro_round
                    && t.micro_round >= 1
                    && (t.cycle_in as usize) < self.cycles.len()
                    && (t.cycle_out as usize) < self.cycles.len()
                    && self.duty.is_none();
                if !ok || self.behavior == Behavior::SkipPromise {
                    return;
                }
                let mut p = SignedMessage::new(t.encode(KIND_PROMISE));
                if ctx.sign(&mut p, b"") {
                    self.duty = Some((d.from, t));
                    ctx.send(d.from, p);
                }
            }
            Some(KIND_PROMISE) if signed_by_sender => {
                let Some(route) = &self.route else { return };
                let Some(t) = PromiseText::from_signed(m) else { return };
                let texts = promise_texts(route, self.macro_round);
                if let Some(j) = texts.iter().position(|x| *x == t) {
                    self.promises.insert(j + 1, m.clone());
                }
            }
            Some(KIND_INTENT) if signed_by_sender => self.on_intent(d, ctx),
            Some(KIND_PROOF_REQUEST) if signed_by_sender => {
                let Some(f) = read_control(&m.payload, KIND_PROOF_REQUEST, 2) else { return };
                let Some((a, _)) = self.duty else { return };
                if d.from != a || f[0] != self.macro_round {
                    return;
                }
                if let Some(c) = self.proof_of_payment() {
                    ctx.send(a, SignedMessage::with_attachments(control(KIND_PROOF, &[f[1]]), vec![c]));
                }
            }
            Some(KIND_PROOF) if m.stack.is_empty() && m.attachments.len() == 1 => {
                let Some(route) = &self.route else { return };
                let Some(f) = read_control(&m.payload, KIND_PROOF, 1) else { return };
                let j = f[0] as usize;
                if j == 0 || j > route.z() || route.slot(j) != d.from {
                    return;
                }
                let c = &m.attachments[0];
                let leg = route.legs[j];
                if check_payment_proof(&self.cycles, ctx.oracle(), c, leg.from, leg.to, leg.cycle, Route::pay_round(j)) {
                    self.proofs.insert(j, c.clone());
                }
            }
            _ => {}
        }
    }

    fn on_intent(&mut self, d: &Delivery, ctx: &mut Ctx<'_>) {
        let m = &d.msg;
        let Some(f) = read_control(&m.payload, KIND_INTENT, 4) else { return };
        let (b, macro_round, z, cycle0) = (ProcessId(f[0] as u32), f[1], f[2] as usize, f[3] as usize);
        if b != self.me || macro_round != self.macro_round || m.attachments.len() != z || cycle0 >= self.cycles.len() {
            return;
        }
        let mut pred = d.from;
        let mut cycle = cycle0;
        for (i, p) in m.attachments.iter().enumerate() {
            let Some(t) = PromiseText::from_signed(p) else { return };
            let succ_ok = if i + 1 < z { t.successor != self.me } else { t.successor == self.me };
            let ok = t.predecessor == pred
                && t.cycle_in as usize == cycle
                && t.micro_round == Route::pay_round(i + 1)
                && t.macro_round == self.macro_round
                && succ_ok
                && ctx.verify(p);
            if !ok {
                return;
            }
            pred = t.promiser;
            cycle = t.cycle_out as usize;
        }
        self.expect = Some((pred, cycle, Route::pay_round(z)));
    }

    fn send_intent(&mut self, ctx: &mut Ctx<'_>) {
        let Some(route) = self.route.clone() else { return };
        if self.intent_sent || self.promises.len() != route.z() {
            return;
        }
        let fields = [route.b().0 as u64, self.macro_round, route.z() as u64, route.legs[0].cycle as u64];
        let mut m = SignedMessage::with_attachments(control(KIND_INTENT, &fields), self.promises.values().cloned().collect());
        if ctx.sign(&mut m, b"") {
            self.intent_sent = true;
            ctx.send(route.b(), m);
        }
    }

    fn end_round(&mut self, round: RoundIndex, ctx: &mut Ctx<'_>) {
        let n = self.coin.n;
        let mut got = Vec::new();
        for (v, node) in self.coins.iter_mut() {
            if let Mark::Received { from } = ctx.scoped(v, |ctx| node.end_round(round, ctx)) {
                got.push(Receipt { round, cycle: v as usize / n, from, instance: v });
            }
        }
        self.receipts.extend(got);
        if let Some((payer, cycle, r)) = self.expect {
            if r == round {
                self.decision = Some(self.received(round, cycle, payer));
            }
        }
    }
}

impl Process for HopProcess {
    fn on_step(&mut self, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        let len = self.round_len();
        let t = ctx.step();
        let (round, local) = (t / len, t % len);
        if round >= self.rounds {
            return;
        }
        if local == 0 {
            self.start_round(round, ctx);
        }
        let paying = self.paying.filter(|(r, _, _)| *r == round);
        let (me, n, coin, cycles) = (self.me, self.coin.n, self.coin, self.cycles.clone());
        let k_total = cycles.len();
        let control_mail = self.coins.service(
            inbox,
            ctx,
            true,
            |v| {
                let k = v as usize / n;
                (k < k_total).then(|| CycleCoinNode::new(cycles.get(k).clone(), coin, me, ProcessId::from(v as usize % n)))
            },
            |v, node, mail, ctx| {
                let input = match paying {
                    Some((_, pv, target)) if pv == v => target,
                    _ => me,
                };
                node.on_step(round, local, input, mail, ctx);
            },
        );
        for d in &control_mail {
            self.on_control(d, round, ctx);
        }
        if round == 0 && local == 2 {
            self.send_intent(ctx);
        }
        if local == len - 1 {
            self.end_round(round, ctx);
        }
        if self.engaged() {
            let start = round * len;
            if local < len - 1 {
                ctx.wake_at(start + len - 1);
            }
            if round + 1 < self.rounds {
                ctx.wake_at(start + len);
            }
        }
    }
}

/// How a macro round ended, from the payer's and payee's reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopStatus {
    Paid,
    /// The payee says it was not paid.
    Disputed,
    /// Some promise never came back, so the payment never started.
    Aborted,
}

/// Knobs for one macro round.
#[derive(Debug, Clone)]
pub struct HopConfig {
    /// Fault bound for the embedded cycle coins (and the network).
    pub coin_f: usize,
    pub macro_round: u64,
    /// Micro rounds beyond the route's own need, for a fixed macro length.
    pub extra_rounds: u64,
    pub seed: u64,
    pub transcript: bool,
}

impl Default for HopConfig {
    fn default() -> Self {
        HopConfig { coin_f: 1, macro_round: 0, extra_rounds: 0, seed: 0, transcript: true }
    }
}

/// A finished macro round.
pub struct HopRun {
    pub route: Route,
    pub cycles: Arc<CycleSet>,
    pub net: Network<HopProcess, Puppets<HopProcess>>,
}

impl HopRun {
    /// The process state, honest or puppet.
    pub fn participant(&self, p: ProcessId) -> &HopProcess {
        self.net.process(p).or_else(|| self.net.adversary().get(p)).expect("every process is honest or a puppet")
    }

    pub fn status(&self) -> HopStatus {
        if !self.participant(self.route.a()).intent_sent() {
            return HopStatus::Aborted;
        }
        match self.participant(self.route.b()).claims_paid() {
            Some(true) => HopStatus::Paid,
            _ => HopStatus::Disputed,
        }
    }

    /// Honest sends over the whole macro round.
    pub fn messages(&self) -> u64 {
        self.net.metrics().total_messages()
    }
}

/// Runs one macro round paying along `route`; `cheats` become puppets of the adversary.
pub fn execute_hop_payment(
    cycles: Arc<CycleSet>,
    route: Route,
    cheats: &BTreeMap<ProcessId, Behavior>,
    cfg: &HopConfig,
) -> Result<HopRun, HopError> {
    route.validate(&cycles)?;
    let n = cycles.n();
    if cheats.len() > cfg.coin_f {
        return Err(HopError::Route(format!("{} cheaters exceed f={}", cheats.len(), cfg.coin_f)));
    }
    if cfg.coin_f + 1 >= n {
        return Err(HopError::Route(format!("coin broadcast needs f+1 < N, got f={} N={n}", cfg.coin_f)));
    }
    let rounds = route.rounds() + cfg.extra_rounds;
    let make = |p: ProcessId| {
        let h = HopProcess::new(p, cycles.clone(), cfg.coin_f, cfg.macro_round, rounds);
        if p == route.a() {
            h.with_route(route.clone())
        } else {
            h
        }
    };
    let puppets = Puppets::new(cheats.iter().map(|(p, b)| (*p, make(*p).with_behavior(*b))));
    let mut config = NetworkConfig::new(n, cfg.coin_f, round_len(n, cfg.coin_f), rounds).with_seed(cfg.seed);
    if !cfg.transcript {
        config = config.without_transcript();
    }
    let mut net = Network::new(config, puppets, make)?;
    net.run()?;
    Ok(HopRun { route, cycles, net })
}
