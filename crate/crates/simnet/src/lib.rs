//! Deterministic lockstep network simulator.
//!
//! Processes run in ascending id order each step and see exactly the
//! messages sent to them at the previous step. Signatures come from an
//! idealised oracle: a signature verifies iff it was issued, and only the
//! process itself (or the adversary, for corrupted processes) may issue it.
//! Counters only ever include sends by honest processes.

pub mod codec;
mod error;
mod message;
mod metrics;
mod network;
mod oracle;
mod transcript;

pub use error::SimError;
pub use message::{
    frame_signed_bytes, parse_signed_bytes, Nonce, ProcessId, RoundIndex, SigEntry, SignedMessage, StepIndex,
    NONCE_SEPARATOR,
};
pub use metrics::{Counts, MetricsLedger};
pub use network::{
    AdvCtx, Adversary, AdversaryView, Ctx, Delivery, FnAdversary, Network, NetworkConfig, NoAdversary, Outgoing, Params,
    Process, Puppets, Silent, Workbench,
};
pub use oracle::{Authority, SignatureOracle};
pub use transcript::{SendEvent, Transcript};

/// Honest-signer signatures in the transcript that the honest signer did not issue itself.
pub fn audit_unforgeability(
    transcript: &Transcript,
    oracle: &SignatureOracle,
) -> Vec<(u64, ProcessId)> {
    let mut bad = Vec::new();
    for e in &transcript.events {
        let Ok(bytes) = hex::decode(&e.payload_hex) else { continue };
        let Ok(msg) = SignedMessage::decode(&bytes) else { continue };
        for (s, c) in msg.all_signatures() {
            if oracle.corrupted().contains(&s) {
                continue;
            }
            if let Some(who) = oracle.issuer(s, &c) {
                if who != Authority::Process(s) {
                    bad.push((e.step, s));
                }
            }
        }
    }
    bad
}

/// Every delivery at step t must match a send at t-1; with a single send log this
/// reduces to steps being non-decreasing and inside the run.
pub fn audit_lockstep(transcript: &Transcript, total_steps: StepIndex) -> bool {
    transcript.events.windows(2).all(|w| w[0].step <= w[1].step)
        && transcript.events.iter().all(|e| e.step < total_steps)
}
