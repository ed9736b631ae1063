use std::collections::BTreeSet;

use cyclecoin::{verify_payment_claim, Verdict};
use simnet::{Nonce, ProcessId};

use crate::exec::{check_payment_proof, HopRun, Route};

/// What happened when slot j-1 was asked whether it paid slot j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkEvent {
    /// The payer admitted it did not pay.
    Admitted,
    /// The payer's proof does not check out.
    BadProof,
    /// The payee's answer to the forwarded proof, as judged by the payer of the macro round.
    Judged(Verdict),
    /// The payee did not answer the forwarded proof.
    Silent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkStep {
    pub slot: usize,
    pub payer: ProcessId,
    pub payee: ProcessId,
    pub event: WalkEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walkback {
    pub accused: Option<ProcessId>,
    pub trace: Vec<WalkStep>,
}

/// Walks back from the payee: at each slot j the payer of the leg into j
/// either shows a chain paying j, which is forwarded to j for an answer,
/// or admits it did not pay and the walk moves one slot back.
pub fn dispute_walkback(run: &HopRun) -> Walkback {
    let route: &Route = &run.route;
    let oracle = run.net.oracle();
    let n = run.cycles.n();
    let mut trace = Vec::new();
    for j in (1..=route.z() + 1).rev() {
        let (payer, payee) = (route.slot(j - 1), route.slot(j));
        let leg = route.legs[j - 1];
        let round = Route::pay_round(j - 1);
        let step = |event| WalkStep { slot: j, payer, payee, event };
        let Some(c) = run.participant(payer).proof_of_payment() else {
            trace.push(step(WalkEvent::Admitted));
            continue;
        };
        if !check_payment_proof(&run.cycles, oracle, &c, payer, payee, leg.cycle, round) {
            trace.push(step(WalkEvent::BadProof));
            return Walkback { accused: Some(payer), trace };
        }
        let Some(answer) = run.participant(payee).answer_payment_claim(&c) else {
            trace.push(step(WalkEvent::Silent));
            return Walkback { accused: Some(payee), trace };
        };
        let v = c.stack[0].nonce.0[0];
        let origin = ProcessId::from(v as usize % n);
        let nonce = Nonce::root().child(v);
        let topo = run.cycles.get(leg.cycle);
        let verdict = verify_payment_claim(topo, origin, &nonce, &BTreeSet::new(), oracle, &c, payee, &answer);
        let accused = match verdict {
            Verdict::Paid | Verdict::BogusDenial => payee,
            Verdict::Refuted(_) | Verdict::InvalidClaim => payer,
        };
        trace.push(step(WalkEvent::Judged(verdict)));
        return Walkback { accused: Some(accused), trace };
    }
    Walkback { accused: None, trace }
}
