use std::collections::{BTreeMap, BTreeSet};

use simnet::codec::{Reader, Writer};
use simnet::{Ctx, Delivery, Params, ProcessId, RoundIndex, SignedMessage, StepIndex};

use crate::{Mark, MarkerNode};

const KIND_CORE: u8 = 1;
const KIND_INTENT: u8 = 2;

/// The lowest 3f+1 ids.
pub fn broadcasters(params: Params) -> Vec<ProcessId> {
    params.processes().take(3 * params.f + 1).collect()
}

/// How a holder handles a self-directed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfPay {
    /// Keep the marker and send nothing.
    #[default]
    Silent,
    /// Run the ordinary round with itself as the target.
    Transfer,
}

/// Evidence that a process holds the marker from `round` on: 2f+1 receipts
/// naming it as the target of round `round - 1`. Empty for the origin at round 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerProof {
    pub round: RoundIndex,
    pub receipts: Vec<SignedMessage>,
}

/// Decoded body of an intent: `payer` wants to pay `target` at `round`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Core {
    pub round: RoundIndex,
    pub payer: ProcessId,
    pub target: ProcessId,
}

impl Core {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(KIND_CORE);
        w.u64(self.round);
        w.u32(self.payer.0);
        w.u32(self.target.0);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Option<Core> {
        let mut r = Reader::new(bytes);
        if r.u8().ok()? != KIND_CORE {
            return None;
        }
        let c = Core { round: r.u64().ok()?, payer: ProcessId(r.u32().ok()?), target: ProcessId(r.u32().ok()?) };
        r.finish().ok()?;
        Some(c)
    }
}

/// Designated-broadcaster marker: three steps per round.
#[derive(Debug, Clone)]
pub struct QuorumMarker {
    params: Params,
    me: ProcessId,
    origin: ProcessId,
    self_pay: SelfPay,
    broadcasters: Vec<ProcessId>,
    proof: Option<MarkerProof>,
    /// Broadcaster memory: rounds in which it countersigned each payer.
    signed: BTreeMap<ProcessId, BTreeSet<RoundIndex>>,
    pending: Mark,
}

impl QuorumMarker {
    pub fn new(params: Params, me: ProcessId, origin: ProcessId, self_pay: SelfPay) -> Self {
        assert!(3 * params.f < params.n, "quorum marker needs 3f < N");
        let proof = (me == origin).then(|| MarkerProof { round: 0, receipts: Vec::new() });
        QuorumMarker {
            params,
            me,
            origin,
            self_pay,
            broadcasters: broadcasters(params),
            proof,
            signed: BTreeMap::new(),
            pending: Mark::Unmarked,
        }
    }

    pub fn proof(&self) -> Option<&MarkerProof> {
        self.proof.as_ref()
    }

    fn quorum(&self) -> usize {
        2 * self.params.f + 1
    }

    /// Checks a receipt for `round` as seen at nonce level `ctx`.
    fn receipt_core(&self, msg: &SignedMessage, ctx: &Ctx<'_>) -> Option<(Core, ProcessId)> {
        if msg.stack.len() != 2 || !msg.attachments.is_empty() {
            return None;
        }
        let core = Core::decode(&msg.payload)?;
        let (payer, b) = (msg.stack[0].signer, msg.stack[1].signer);
        let ok = payer == core.payer
            && self.broadcasters.contains(&b)
            && msg.stack.iter().all(|e| e.tag.is_empty() && &e.nonce == ctx.nonce())
            && ctx.verify(msg);
        ok.then_some((core, b))
    }

    /// True when `receipts` prove `holder` was paid in round `round - 1`.
    pub fn proof_valid(&self, holder: ProcessId, proof: &MarkerProof, ctx: &Ctx<'_>) -> bool {
        if proof.round == 0 {
            return holder == self.origin && proof.receipts.is_empty();
        }
        let mut by_payer: BTreeMap<ProcessId, BTreeSet<ProcessId>> = BTreeMap::new();
        for r in &proof.receipts {
            let Some((core, b)) = self.receipt_core(r, ctx) else { return false };
            if core.round != proof.round - 1 || core.target != holder {
                return false;
            }
            by_payer.entry(core.payer).or_default().insert(b);
        }
        by_payer.values().any(|s| s.len() >= self.quorum())
    }

    /// Signed intent envelope carrying the current proof. Does not give up the proof.
    pub fn make_intent(&self, round: RoundIndex, target: ProcessId, ctx: &mut Ctx<'_>) -> Option<SignedMessage> {
        let proof = self.proof.as_ref()?;
        let mut core = SignedMessage::new(Core { round, payer: self.me, target }.encode());
        if !ctx.sign(&mut core, b"") {
            return None;
        }
        let mut w = Writer::new();
        w.u8(KIND_INTENT);
        w.u64(proof.round);
        let mut attachments = vec![core];
        attachments.extend(proof.receipts.iter().cloned());
        let mut env = SignedMessage::with_attachments(w.finish(), attachments);
        ctx.sign(&mut env, b"").then_some(env)
    }

    /// Parses and validates an intent envelope received from `from` at `round`.
    fn check_intent(&self, from: ProcessId, env: &SignedMessage, round: RoundIndex, ctx: &Ctx<'_>) -> Option<SignedMessage> {
        if env.stack.len() != 1 || env.stack[0].signer != from || env.attachments.is_empty() || !ctx.verify(env) {
            return None;
        }
        if &env.stack[0].nonce != ctx.nonce() {
            return None;
        }
        let mut r = Reader::new(&env.payload);
        if r.u8().ok()? != KIND_INTENT {
            return None;
        }
        let proof_round = r.u64().ok()?;
        r.finish().ok()?;
        let core_msg = &env.attachments[0];
        let core = Core::decode(&core_msg.payload)?;
        let core_ok = core_msg.stack.len() == 1
            && core_msg.stack[0].signer == from
            && core_msg.stack[0].tag.is_empty()
            && &core_msg.stack[0].nonce == ctx.nonce()
            && core_msg.attachments.is_empty()
            && core.payer == from
            && core.round == round
            && core.target.index() < self.params.n
            && proof_round <= round;
        if !core_ok || !ctx.verify(core_msg) {
            return None;
        }
        let proof = MarkerProof { round: proof_round, receipts: env.attachments[1..].to_vec() };
        if !self.proof_valid(from, &proof, ctx) {
            return None;
        }
        // the proof is stale if this broadcaster already saw the holder pay since then
        let stale = self.signed.get(&from).is_some_and(|rs| rs.range(proof_round..round).next().is_some());
        (!stale).then(|| core_msg.clone())
    }
}

impl MarkerNode for QuorumMarker {
    fn round_len(&self) -> StepIndex {
        3
    }

    fn on_step(&mut self, round: RoundIndex, local: StepIndex, input: ProcessId, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        match local {
            0 => {
                self.pending = Mark::Unmarked;
                if self.proof.is_none() {
                    return;
                }
                if input == self.me && self.self_pay == SelfPay::Silent {
                    self.pending = Mark::Kept;
                    return;
                }
                if let Some(env) = self.make_intent(round, input, ctx) {
                    for b in self.broadcasters.clone() {
                        ctx.send(b, env.clone());
                    }
                }
                self.proof = None;
            }
            1 => {
                if !self.broadcasters.contains(&self.me) {
                    return;
                }
                let mut ordered: Vec<&Delivery> = inbox.iter().collect();
                ordered.sort_by_key(|d| (d.from, d.msg.encode()));
                for d in ordered {
                    if let Some(core_msg) = self.check_intent(d.from, &d.msg, round, ctx) {
                        let core = Core::decode(&core_msg.payload).expect("checked");
                        let mut receipt = core_msg;
                        if ctx.sign(&mut receipt, b"") {
                            self.signed.entry(core.payer).or_default().insert(round);
                            ctx.send(core.target, receipt);
                        }
                        break;
                    }
                }
            }
            2 => {
                let mut by_payer: BTreeMap<ProcessId, BTreeMap<ProcessId, SignedMessage>> = BTreeMap::new();
                for d in inbox {
                    if let Some((core, b)) = self.receipt_core(&d.msg, ctx) {
                        if core.round == round && core.target == self.me && d.from == b {
                            by_payer.entry(core.payer).or_default().entry(b).or_insert_with(|| d.msg.clone());
                        }
                    }
                }
                let q = self.quorum();
                if let Some((payer, rs)) = by_payer.into_iter().find(|(_, rs)| rs.len() >= q) {
                    self.proof = Some(MarkerProof { round: round + 1, receipts: rs.into_values().take(q).collect() });
                    self.pending = if payer == self.me { Mark::Kept } else { Mark::Received { from: Some(payer) } };
                }
            }
            _ => {}
        }
    }

    fn end_round(&mut self, _round: RoundIndex, _ctx: &mut Ctx<'_>) -> Mark {
        std::mem::replace(&mut self.pending, Mark::Unmarked)
    }

    fn is_marked(&self) -> bool {
        self.proof.is_some()
    }
}
