use std::collections::BTreeSet;
use std::fmt;

use simnet::codec::{Reader, Writer};
use simnet::{Nonce, ProcessId, SignedMessage};

use crate::CycleTopology;

const TAG_X: u8 = b'x';
const TAG_Y: u8 = b'y';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("chain carries a payload or attachments")]
    NotBare,
    #[error("missing or wrong genesis signature")]
    Genesis,
    #[error("signature under a foreign nonce at entry {0}")]
    Nonce(usize),
    #[error("unexpected signer at entry {0}")]
    Signer(usize),
    #[error("bad tag at entry {0}")]
    Tag(usize),
    #[error("path does not follow the cycle at entry {0}")]
    Path(usize),
    #[error("segment ends without an x or y tag")]
    Truncated,
    #[error("undecodable bytes")]
    Bytes,
}

pub fn x_tag(next: ProcessId) -> Vec<u8> {
    tag(TAG_X, next)
}

pub fn y_tag(end: ProcessId) -> Vec<u8> {
    tag(TAG_Y, end)
}

fn tag(kind: u8, p: ProcessId) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(kind);
    w.u32(p.0);
    w.finish()
}

fn read_tag(t: &[u8]) -> Option<(u8, ProcessId)> {
    let mut r = Reader::new(t);
    let kind = r.u8().ok()?;
    let p = ProcessId(r.u32().ok()?);
    r.finish().ok()?;
    matches!(kind, TAG_X | TAG_Y).then_some((kind, p))
}

/// One hop of the walk: `ext` pays `end` through `path` (ext first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub ext: ProcessId,
    pub path: Vec<ProcessId>,
    pub end: ProcessId,
}

/// How a parsed structure stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tail {
    /// Ends with a y tag.
    Complete,
    /// Ends with an x tag naming the next path process: a partial chain.
    Open { ext: ProcessId, path: Vec<ProcessId>, next: ProcessId },
    /// A partial chain countersigned by its next path process.
    Countersigned { ext: ProcessId, path: Vec<ProcessId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedChain {
    pub origin: ProcessId,
    pub segments: Vec<Segment>,
    pub tail: Tail,
}

impl ParsedChain {
    /// Number of complete segments.
    pub fn length(&self) -> usize {
        self.segments.len()
    }

    pub fn is_complete(&self) -> bool {
        self.tail == Tail::Complete
    }

    /// Where the completed part of the walk stands.
    pub fn base_end(&self) -> ProcessId {
        self.segments.last().map(|s| s.end).unwrap_or(self.origin)
    }

    /// Last complete segment's end; for partials the process the y-completion would end at.
    pub fn end(&self) -> ProcessId {
        match &self.tail {
            Tail::Complete => self.base_end(),
            Tail::Open { next, .. } => *next,
            Tail::Countersigned { path, .. } => *path.last().expect("countersigned path is never empty"),
        }
    }

    /// Extender of the last segment (the payer), or of the open one.
    pub fn extender(&self) -> ProcessId {
        match &self.tail {
            Tail::Complete => self.segments.last().map(|s| s.ext).unwrap_or(self.origin),
            Tail::Open { ext, .. } | Tail::Countersigned { ext, .. } => *ext,
        }
    }

    pub fn hop_tuple(&self) -> Vec<ProcessId> {
        self.segments.iter().map(|s| s.end).collect()
    }

    /// Walk length from the origin, measured on the original cycle. A partial
    /// weighs what its y-completion would.
    pub fn weight(&self, topo: &CycleTopology) -> u64 {
        let mut w = 0;
        let mut at = self.origin;
        for s in &self.segments {
            w += topo.dist(at, s.end);
            at = s.end;
        }
        match &self.tail {
            Tail::Complete => w,
            Tail::Open { next, .. } => w + topo.dist(at, *next),
            Tail::Countersigned { path, .. } => w + topo.dist(at, *path.last().expect("non-empty")),
        }
    }
}

/// Structural parse. Signatures are not checked here; see [`crate::verify_chain`].
pub fn parse_chain(
    msg: &SignedMessage,
    topo: &CycleTopology,
    deleted: &BTreeSet<ProcessId>,
    origin: ProcessId,
    nonce: &Nonce,
) -> Result<ParsedChain, ChainError> {
    if !msg.payload.is_empty() || !msg.attachments.is_empty() {
        return Err(ChainError::NotBare);
    }
    let st = &msg.stack;
    if st.is_empty() || st[0].signer != origin || !st[0].tag.is_empty() {
        return Err(ChainError::Genesis);
    }
    if let Some(i) = st.iter().position(|e| &e.nonce != nonce) {
        return Err(ChainError::Nonce(i));
    }
    let n = topo.n();
    if let Some(i) = st.iter().position(|e| e.signer.index() >= n) {
        return Err(ChainError::Signer(i));
    }
    let mut segments = Vec::new();
    let mut at = origin;
    let mut i = 1;
    while i < st.len() {
        let ext = at;
        if st[i].signer != ext {
            return Err(ChainError::Signer(i));
        }
        if let Some((TAG_Y, end)) = read_tag(&st[i].tag) {
            if end != ext {
                return Err(ChainError::Path(i));
            }
            segments.push(Segment { ext, path: Vec::new(), end });
            i += 1;
            continue;
        }
        if !st[i].tag.is_empty() {
            return Err(ChainError::Tag(i));
        }
        let mut path = vec![ext];
        i += 1;
        loop {
            let Some(e) = st.get(i) else { return Err(ChainError::Truncated) };
            if e.signer != ext {
                return Err(ChainError::Signer(i));
            }
            let (kind, p) = read_tag(&e.tag).ok_or(ChainError::Tag(i))?;
            let last = *path.last().expect("non-empty");
            if !topo.next_alive_is(last, p, ext, deleted) {
                return Err(ChainError::Path(i));
            }
            i += 1;
            if kind == TAG_Y {
                segments.push(Segment { ext, path, end: p });
                at = p;
                break;
            }
            let Some(e) = st.get(i) else {
                return Ok(ParsedChain { origin, segments, tail: Tail::Open { ext, path, next: p } });
            };
            if e.signer != p || !e.tag.is_empty() {
                return Err(ChainError::Signer(i));
            }
            path.push(p);
            i += 1;
            if i == st.len() {
                return Ok(ParsedChain { origin, segments, tail: Tail::Countersigned { ext, path } });
            }
        }
    }
    Ok(ParsedChain { origin, segments, tail: Tail::Complete })
}

/// Renders the bracket notation, e.g. `[P0,(P0,xP0,P1,yP0)]`.
pub struct Bracket<'a>(pub &'a SignedMessage);

impl fmt::Display for Bracket<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let st = &self.0.stack;
        let Some(first) = st.first() else { return write!(f, "[]") };
        write!(f, "[{}", first.signer)?;
        let mut open = false;
        for e in &st[1..] {
            let t = read_tag(&e.tag);
            let item = match t {
                Some((k, _)) => format!("{}{}", k as char, e.signer),
                None => e.signer.to_string(),
            };
            if !open {
                write!(f, ",({item}")?;
                open = true;
            } else {
                write!(f, ",{item}")?;
            }
            if matches!(t, Some((TAG_Y, _))) {
                write!(f, ")")?;
                open = false;
            }
        }
        if open {
            write!(f, ")")?;
        }
        write!(f, "]")
    }
}

/// Adds one signature entry; the caller's signer decides whether that is legal.
pub type SignFn<'a> = dyn FnMut(ProcessId, &mut SignedMessage, &[u8]) -> bool + 'a;

/// The length-0 chain: the origin's signature over the empty string.
pub fn genesis(origin: ProcessId, sign: &mut SignFn<'_>) -> Option<SignedMessage> {
    let mut m = SignedMessage::new(Vec::new());
    sign(origin, &mut m, b"").then_some(m)
}

/// Builds the chain for a hop tuple, asking `sign` for every signature. Used
/// by tests and the codec; protocol code builds chains one request at a time.
pub fn build_chain(
    topo: &CycleTopology,
    origin: ProcessId,
    tuple: &[ProcessId],
    sign: &mut SignFn<'_>,
) -> Option<SignedMessage> {
    let mut c = genesis(origin, sign)?;
    let mut at = origin;
    for &end in tuple {
        extend_segment(topo, &mut c, at, end, sign)?;
        at = end;
    }
    Some(c)
}

/// Appends one complete segment from `ext` to `end` on an intact cycle.
pub fn extend_segment(
    topo: &CycleTopology,
    c: &mut SignedMessage,
    ext: ProcessId,
    end: ProcessId,
    sign: &mut SignFn<'_>,
) -> Option<()> {
    if ext == end {
        return sign(ext, c, &y_tag(ext)).then_some(());
    }
    let path = topo.path(ext, end);
    for (k, q) in path.iter().enumerate() {
        if !sign(*q, c, b"") {
            return None;
        }
        let next = path.get(k + 1).copied();
        let t = match next {
            Some(nx) => x_tag(nx),
            None => y_tag(end),
        };
        if !sign(ext, c, &t) {
            return None;
        }
    }
    Some(())
}

/// Serialized chain bytes.
pub fn encode_chain(c: &SignedMessage) -> Vec<u8> {
    c.encode()
}

pub fn decode_chain(
    bytes: &[u8],
    topo: &CycleTopology,
    origin: ProcessId,
    nonce: &Nonce,
) -> Result<(SignedMessage, ParsedChain), ChainError> {
    let m = SignedMessage::decode(bytes).map_err(|_| ChainError::Bytes)?;
    let p = parse_chain(&m, topo, &BTreeSet::new(), origin, nonce)?;
    Ok((m, p))
}
