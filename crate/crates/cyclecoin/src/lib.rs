//! Cycle coin: a marker whose custody history is a chain of signatures
//! walking around a directed cycle of all processes.
//!
//! A chain's weight is the length of that walk. A process accepts the marker
//! only when it is sure no heavier chain can exist, which it can be because
//! any heavier walk passing it would have needed its own signature.

use std::collections::BTreeSet;

use simnet::{Nonce, ProcessId, SignatureOracle, SignedMessage};

mod chain;
mod node;
mod topology;

pub use chain::{
    build_chain, decode_chain, encode_chain, extend_segment, genesis, parse_chain, x_tag, y_tag, Bracket, ChainError,
    ParsedChain, Segment, SignFn, Tail,
};
pub use node::{period_len, round_len, ClaimAnswer, CycleCoinNode, Reply};
pub use topology::CycleTopology;

/// Structural parse plus signature check against the oracle.
pub fn verify_chain(
    msg: &SignedMessage,
    topo: &CycleTopology,
    deleted: &BTreeSet<ProcessId>,
    origin: ProcessId,
    nonce: &Nonce,
    oracle: &SignatureOracle,
) -> Result<ParsedChain, ChainError> {
    let p = parse_chain(msg, topo, deleted, origin, nonce)?;
    if !oracle.verify_message(msg) {
        return Err(ChainError::Signer(msg.stack.len()));
    }
    Ok(p)
}

/// Outcome of a third-party payment audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Paid,
    /// The recipient showed a different structure of the same weight.
    Refuted(SignedMessage),
    /// The recipient's answer proves nothing; treated as a false denial.
    BogusDenial,
    /// The forwarded chain itself does not check out.
    InvalidClaim,
}

/// Checks the recipient's answer to a forwarded claim `c` (ending at `target`).
pub fn verify_payment_claim(
    topo: &CycleTopology,
    origin: ProcessId,
    nonce: &Nonce,
    deleted: &BTreeSet<ProcessId>,
    oracle: &SignatureOracle,
    c: &SignedMessage,
    target: ProcessId,
    answer: &ClaimAnswer,
) -> Verdict {
    let Ok(pc) = verify_chain(c, topo, deleted, origin, nonce, oracle) else { return Verdict::InvalidClaim };
    let g = match answer {
        ClaimAnswer::Paid => return Verdict::Paid,
        ClaimAnswer::Refuted(g) => g,
    };
    let Ok(pg) = verify_chain(g, topo, deleted, origin, nonce, oracle) else { return Verdict::BogusDenial };
    let owned = match &pg.tail {
        Tail::Complete => pg.end() == target,
        Tail::Countersigned { path, .. } => path.last() == Some(&target),
        Tail::Open { ext, .. } => *ext == target,
    };
    if owned && g != c && pg.weight(topo) == pc.weight(topo) {
        Verdict::Refuted(g.clone())
    } else {
        Verdict::BogusDenial
    }
}
