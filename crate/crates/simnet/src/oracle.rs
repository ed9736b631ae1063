use std::collections::{BTreeSet, HashMap};

use crate::error::SimError;
use crate::message::{Nonce, ProcessId, SigEntry, SignedMessage};

/// Who is asking the oracle for a signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Authority {
    /// An honest process, which may only sign as itself.
    Process(ProcessId),
    /// The adversary, which may sign as any corrupted process.
    Adversary,
}

/// Idealised signature scheme: a signature exists iff it was issued.
#[derive(Debug, Clone, Default)]
pub struct SignatureOracle {
    registry: HashMap<(ProcessId, Vec<u8>), Authority>,
    corrupted: BTreeSet<ProcessId>,
}

impl SignatureOracle {
    pub fn new(corrupted: BTreeSet<ProcessId>) -> Self {
        SignatureOracle { registry: HashMap::new(), corrupted }
    }

    pub fn corrupted(&self) -> &BTreeSet<ProcessId> {
        &self.corrupted
    }

    pub fn sign(&mut self, who: Authority, signer: ProcessId, content: &[u8]) -> Result<(), SimError> {
        let allowed = match who {
            Authority::Process(p) => p == signer && !self.corrupted.contains(&p),
            Authority::Adversary => self.corrupted.contains(&signer),
        };
        if !allowed {
            return Err(SimError::Forgery { signer, detail: format!("{who:?} signing for {signer}") });
        }
        self.registry.entry((signer, content.to_vec())).or_insert(who);
        Ok(())
    }

    pub fn verify(&self, signer: ProcessId, content: &[u8]) -> bool {
        self.registry.contains_key(&(signer, content.to_vec()))
    }

    /// Who first issued a signature, if anyone did.
    pub fn issuer(&self, signer: ProcessId, content: &[u8]) -> Option<Authority> {
        self.registry.get(&(signer, content.to_vec())).copied()
    }

    /// Appends a signature layer `(msg · tag)_{signer}` under `nonce`.
    pub fn append(
        &mut self,
        who: Authority,
        msg: &mut SignedMessage,
        signer: ProcessId,
        tag: &[u8],
        nonce: &Nonce,
    ) -> Result<(), SimError> {
        let content = msg.next_signed_bytes(tag, nonce);
        self.sign(who, signer, &content)?;
        msg.stack.push(SigEntry { signer, tag: tag.to_vec(), nonce: nonce.clone() });
        Ok(())
    }

    /// True iff every signature in the message, attachments included, was issued.
    pub fn verify_message(&self, msg: &SignedMessage) -> bool {
        msg.all_signatures().iter().all(|(s, c)| self.verify(*s, c))
    }

    pub fn issued(&self) -> usize {
        self.registry.len()
    }
}
