use thiserror::Error;

use crate::message::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    /// The adversary tried to use or create a signature it is not entitled to.
    #[error("forgery violation by {signer}: {detail}")]
    Forgery { signer: ProcessId, detail: String },
    #[error("adversary sent as honest process {0}")]
    ImpersonatedSender(ProcessId),
    #[error("invalid network config: {0}")]
    Config(String),
}
