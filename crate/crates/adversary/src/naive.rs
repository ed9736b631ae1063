use marker::{Mark, MarkerNode};
use simnet::codec::{Reader, Writer};
use simnet::{Ctx, Delivery, ProcessId, RoundIndex, SignedMessage, StepIndex};

/// Strawman marker: the holder signs one note to the target, and any signed
/// note addressed to a process marks it. Nobody else takes part, so the
/// sets of processes involved in paying two different targets only meet at
/// the payer, and a split payer spends twice.
#[derive(Debug, Clone)]
pub struct NaiveMarker {
    me: ProcessId,
    marked: bool,
    paid: bool,
    received: Option<ProcessId>,
}

impl NaiveMarker {
    pub fn new(me: ProcessId, origin: ProcessId) -> Self {
        NaiveMarker { me, marked: me == origin, paid: false, received: None }
    }
}

fn note(round: RoundIndex, target: ProcessId) -> SignedMessage {
    let mut w = Writer::new();
    w.u64(round);
    w.u32(target.0);
    SignedMessage::new(w.finish())
}

fn read_note(msg: &SignedMessage) -> Option<(RoundIndex, ProcessId)> {
    let mut r = Reader::new(&msg.payload);
    let round = r.u64().ok()?;
    let target = ProcessId(r.u32().ok()?);
    r.finish().ok()?;
    Some((round, target))
}

impl MarkerNode for NaiveMarker {
    fn round_len(&self) -> StepIndex {
        2
    }

    fn on_step(&mut self, round: RoundIndex, local: StepIndex, input: ProcessId, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if local == 0 {
            self.paid = false;
            self.received = None;
            if self.marked && input != self.me {
                let mut m = note(round, input);
                if ctx.sign(&mut m, b"") {
                    ctx.send(input, m);
                    self.paid = true;
                }
            }
            return;
        }
        for d in inbox {
            let signed_by_sender = d.msg.stack.len() == 1 && d.msg.stack[0].signer == d.from;
            if signed_by_sender && read_note(&d.msg) == Some((round, self.me)) && ctx.verify(&d.msg) {
                self.received.get_or_insert(d.from);
            }
        }
    }

    fn end_round(&mut self, _round: RoundIndex, _ctx: &mut Ctx<'_>) -> Mark {
        if self.paid {
            self.marked = false;
        }
        if let Some(from) = self.received.take() {
            self.marked = true;
            return Mark::Received { from: Some(from) };
        }
        if self.marked {
            Mark::Kept
        } else {
            Mark::Unmarked
        }
    }

    fn is_marked(&self) -> bool {
        self.marked
    }
}
