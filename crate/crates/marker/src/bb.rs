use consensus::{value, DolevStrong, Protocol};
use muxer::{route, Route};
use simnet::{Ctx, Delivery, Params, ProcessId, RoundIndex, StepIndex};

use crate::{Mark, MarkerNode};

/// One broadcast per round: the holder broadcasts its target, everyone
/// adopts the decision as the next holder. The value is target + 1, so the
/// sender-fault value 0 means nobody holds the marker any more.
#[derive(Debug, Clone)]
pub struct BbMarker {
    params: Params,
    me: ProcessId,
    holder: Option<ProcessId>,
    ds: Option<DolevStrong>,
}

impl BbMarker {
    pub fn new(params: Params, me: ProcessId, origin: ProcessId) -> Self {
        BbMarker { params, me, holder: Some(origin), ds: None }
    }

    /// The commonly known holder for the current round.
    pub fn holder(&self) -> Option<ProcessId> {
        self.holder
    }
}

impl MarkerNode for BbMarker {
    fn round_len(&self) -> StepIndex {
        self.params.f as StepIndex + 3
    }

    fn on_step(&mut self, round: RoundIndex, local: StepIndex, input: ProcessId, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if local == 0 {
            self.ds = self.holder.map(|leader| {
                let initial = (leader == self.me).then(|| value(input.0 as u64 + 1));
                DolevStrong::new(self.params, self.me, leader, initial)
            });
        }
        let Some(ds) = self.ds.as_mut() else { return };
        let mail: Vec<Delivery> =
            inbox.iter().filter(|d| route(&d.msg, ctx.nonce()) == Route::Instance(round)).cloned().collect();
        ctx.scoped(round, |ctx| ds.on_step(local, &mail, ctx));
    }

    fn end_round(&mut self, _round: RoundIndex, _ctx: &mut Ctx<'_>) -> Mark {
        let Some(mut ds) = self.ds.take() else { return Mark::Unmarked };
        ds.finalize();
        let leader = ds.leader();
        let next = ds
            .output()
            .and_then(|v| v.as_u64())
            .filter(|v| (1..=self.params.n as u64).contains(v))
            .map(|v| ProcessId((v - 1) as u32));
        self.holder = next;
        match next {
            Some(t) if t == self.me && leader == self.me => Mark::Kept,
            Some(t) if t == self.me => Mark::Received { from: Some(leader) },
            _ => Mark::Unmarked,
        }
    }

    fn is_marked(&self) -> bool {
        self.holder == Some(self.me)
    }
}
