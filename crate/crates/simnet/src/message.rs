use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{DecodeError, Reader, Writer};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl From<usize> for ProcessId {
    fn from(v: usize) -> Self {
        ProcessId(u32::try_from(v).expect("process index overflow"))
    }
}

pub type StepIndex = u64;
pub type RoundIndex = u64;

/// Hierarchical instance tag. Component `d` names the instance at mux depth `d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Nonce(pub Vec<u64>);

impl Nonce {
    pub fn root() -> Self {
        Nonce(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, id: u64) -> Nonce {
        let mut v = self.0.clone();
        v.push(id);
        Nonce(v)
    }

    pub fn starts_with(&self, prefix: &Nonce) -> bool {
        self.0.starts_with(&prefix.0)
    }

    fn encode_into(&self, w: &mut Writer) {
        w.u8(u8::try_from(self.0.len()).expect("nonce too deep"));
        for c in &self.0 {
            w.u64(*c);
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let len = r.u8()? as usize;
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(r.u64()?);
        }
        Ok(Nonce(v))
    }
}

/// Reserved byte between signed content and the instance nonce.
pub const NONCE_SEPARATOR: u8 = 0x00;

/// One layer of the signature stack: `(beneath · tag)` signed by `signer` under `nonce`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigEntry {
    pub signer: ProcessId,
    pub tag: Vec<u8>,
    pub nonce: Nonce,
}

/// Payload plus embedded evidence, wrapped by zero or more signatures.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SignedMessage {
    pub payload: Vec<u8>,
    pub attachments: Vec<SignedMessage>,
    pub stack: Vec<SigEntry>,
}

type Digest32 = [u8; 32];

fn hash(parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let out = h.finalize();
    let mut d = [0u8; 32];
    d.copy_from_slice(&out);
    d
}

/// Bytes the oracle registers for one signature.
pub fn frame_signed_bytes(content: &[u8], nonce: &Nonce) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(content);
    if !nonce.is_root() {
        w.u8(NONCE_SEPARATOR);
        for c in &nonce.0 {
            w.u64(*c);
        }
    }
    w.finish()
}

/// Splits signed bytes back into content and nonce.
pub fn parse_signed_bytes(bytes: &[u8]) -> Result<(Vec<u8>, Nonce), DecodeError> {
    let mut r = Reader::new(bytes);
    let content = r.bytes()?.to_vec();
    if r.remaining() == 0 {
        return Ok((content, Nonce::root()));
    }
    if r.u8()? != NONCE_SEPARATOR {
        return Err(DecodeError::Invalid("missing nonce separator"));
    }
    if !r.remaining().is_multiple_of(8) {
        return Err(DecodeError::Invalid("ragged nonce"));
    }
    let mut comps = Vec::new();
    while r.remaining() > 0 {
        comps.push(r.u64()?);
    }
    Ok((content, Nonce(comps)))
}

impl SignedMessage {
    pub fn new(payload: Vec<u8>) -> Self {
        SignedMessage { payload, attachments: Vec::new(), stack: Vec::new() }
    }

    pub fn with_attachments(payload: Vec<u8>, attachments: Vec<SignedMessage>) -> Self {
        SignedMessage { payload, attachments, stack: Vec::new() }
    }

    pub fn from_u64(v: u64) -> Self {
        Self::new(v.to_be_bytes().to_vec())
    }

    pub fn as_u64(&self) -> Option<u64> {
        if !self.attachments.is_empty() || !self.stack.is_empty() {
            return None;
        }
        Some(u64::from_be_bytes(self.payload.as_slice().try_into().ok()?))
    }

    fn base_digest(&self) -> Digest32 {
        let mut w = Writer::new();
        w.bytes(&self.payload);
        w.u32(self.attachments.len() as u32);
        for a in &self.attachments {
            w.raw(&a.digest());
        }
        hash(&[b"base", &w.finish()])
    }

    fn layer_content(beneath: &Digest32, tag: &[u8]) -> Digest32 {
        hash(&[b"layer", beneath, &(tag.len() as u32).to_be_bytes(), tag])
    }

    fn after_signature(signer: ProcessId, signed: &[u8]) -> Digest32 {
        hash(&[b"sig", &signer.0.to_be_bytes(), &(signed.len() as u32).to_be_bytes(), signed])
    }

    /// Digest identifying the whole structure, including every signature.
    pub fn digest(&self) -> Digest32 {
        let mut d = self.base_digest();
        for e in &self.stack {
            let signed = frame_signed_bytes(&Self::layer_content(&d, &e.tag), &e.nonce);
            d = Self::after_signature(e.signer, &signed);
        }
        d
    }

    /// The signed bytes of every stack entry, bottom first.
    pub fn stack_signed_bytes(&self) -> Vec<Vec<u8>> {
        let mut d = self.base_digest();
        let mut out = Vec::with_capacity(self.stack.len());
        for e in &self.stack {
            let signed = frame_signed_bytes(&Self::layer_content(&d, &e.tag), &e.nonce);
            d = Self::after_signature(e.signer, &signed);
            out.push(signed);
        }
        out
    }

    /// Bytes a new top layer with this tag and nonce would sign.
    pub fn next_signed_bytes(&self, tag: &[u8], nonce: &Nonce) -> Vec<u8> {
        frame_signed_bytes(&Self::layer_content(&self.digest(), tag), nonce)
    }

    /// Every `(signer, signed_bytes)` in the message, attachments first.
    pub fn all_signatures(&self) -> Vec<(ProcessId, Vec<u8>)> {
        let mut out = Vec::new();
        self.collect_signatures(&mut out);
        out
    }

    fn collect_signatures(&self, out: &mut Vec<(ProcessId, Vec<u8>)>) {
        for a in &self.attachments {
            a.collect_signatures(out);
        }
        for (e, bytes) in self.stack.iter().zip(self.stack_signed_bytes()) {
            out.push((e.signer, bytes));
        }
    }

    pub fn signature_count(&self) -> u64 {
        self.stack.len() as u64 + self.attachments.iter().map(|a| a.signature_count()).sum::<u64>()
    }

    pub fn signers(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.stack.iter().map(|e| e.signer)
    }

    pub fn top(&self) -> Option<&SigEntry> {
        self.stack.last()
    }

    /// The message with only its first `k` stack entries.
    pub fn prefix(&self, k: usize) -> SignedMessage {
        SignedMessage {
            payload: self.payload.clone(),
            attachments: self.attachments.clone(),
            stack: self.stack[..k.min(self.stack.len())].to_vec(),
        }
    }

    /// Payload and attachments with the stack stripped.
    pub fn unsigned(&self) -> SignedMessage {
        self.prefix(0)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_into(&mut w);
        w.finish()
    }

    fn encode_into(&self, w: &mut Writer) {
        w.bytes(&self.payload);
        w.u32(self.attachments.len() as u32);
        for a in &self.attachments {
            a.encode_into(w);
        }
        w.u32(self.stack.len() as u32);
        for e in &self.stack {
            w.u32(e.signer.0);
            w.bytes(&e.tag);
            e.nonce.encode_into(w);
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let m = Self::decode_from(&mut r, 0)?;
        r.finish()?;
        Ok(m)
    }

    fn decode_from(r: &mut Reader<'_>, depth: usize) -> Result<Self, DecodeError> {
        if depth > 64 {
            return Err(DecodeError::Invalid("attachment nesting too deep"));
        }
        let payload = r.bytes()?.to_vec();
        let n_att = r.u32()? as usize;
        if n_att > r.remaining() {
            return Err(DecodeError::Truncated);
        }
        let mut attachments = Vec::with_capacity(n_att);
        for _ in 0..n_att {
            attachments.push(Self::decode_from(r, depth + 1)?);
        }
        let n_stack = r.u32()? as usize;
        if n_stack > r.remaining() {
            return Err(DecodeError::Truncated);
        }
        let mut stack = Vec::with_capacity(n_stack);
        for _ in 0..n_stack {
            let signer = ProcessId(r.u32()?);
            let tag = r.bytes()?.to_vec();
            let nonce = Nonce::decode_from(r)?;
            stack.push(SigEntry { signer, tag, nonce });
        }
        Ok(SignedMessage { payload, attachments, stack })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SignedMessage {
        let inner = SignedMessage {
            payload: b"inner".to_vec(),
            attachments: vec![],
            stack: vec![SigEntry { signer: ProcessId(2), tag: vec![], nonce: Nonce(vec![1]) }],
        };
        SignedMessage {
            payload: b"outer".to_vec(),
            attachments: vec![inner],
            stack: vec![
                SigEntry { signer: ProcessId(0), tag: vec![], nonce: Nonce(vec![3, 4]) },
                SigEntry { signer: ProcessId(1), tag: b"x".to_vec(), nonce: Nonce::root() },
            ],
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let m = sample();
        assert_eq!(SignedMessage::decode(&m.encode()).unwrap(), m);
    }

    #[test]
    fn signature_count_includes_attachments() {
        assert_eq!(sample().signature_count(), 3);
        assert_eq!(sample().all_signatures().len(), 3);
    }

    #[test]
    fn signed_bytes_parse_back_to_nonce() {
        let m = sample();
        let bytes = m.stack_signed_bytes();
        assert_eq!(parse_signed_bytes(&bytes[0]).unwrap().1, Nonce(vec![3, 4]));
        assert_eq!(parse_signed_bytes(&bytes[1]).unwrap().1, Nonce::root());
    }

    #[test]
    fn tag_changes_signed_content() {
        let m = SignedMessage::new(b"v".to_vec());
        assert_ne!(m.next_signed_bytes(b"x", &Nonce::root()), m.next_signed_bytes(b"y", &Nonce::root()));
    }

    #[test]
    fn nonce_changes_signed_content() {
        let m = SignedMessage::new(b"v".to_vec());
        assert_ne!(m.next_signed_bytes(b"", &Nonce(vec![0])), m.next_signed_bytes(b"", &Nonce(vec![1])));
    }
}
