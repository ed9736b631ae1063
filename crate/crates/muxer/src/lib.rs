//! Runs several protocol instances side by side inside one process.
//!
//! Each instance signs under its own nonce (the parent nonce plus one
//! component). Incoming messages are routed by the nonce carried on their
//! signature stack; anything mixing nonces is dropped.

use std::collections::BTreeMap;

use simnet::{Ctx, Delivery, Nonce, SignedMessage};

pub type InstanceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Belongs to the child instance with this id.
    Instance(InstanceId),
    /// Signed at the parent's own level (or unsigned).
    Local,
    /// Foreign or spliced.
    Discard,
}

/// Routes a message relative to the nonce of the receiving level.
///
/// Only the top-level stack is inspected; attachments are evidence and keep
/// whatever nonce their own instance gave them.
pub fn route(msg: &SignedMessage, parent: &Nonce) -> Route {
    if msg.stack.is_empty() {
        return Route::Local;
    }
    let d = parent.depth();
    if msg.stack.iter().any(|e| !e.nonce.starts_with(parent)) {
        return Route::Discard;
    }
    if msg.stack.iter().all(|e| e.nonce.depth() == d) {
        return Route::Local;
    }
    let first = msg.stack[0].nonce.0.get(d).copied();
    match first {
        Some(id) if msg.stack.iter().all(|e| e.nonce.0.get(d) == Some(&id)) => Route::Instance(id),
        _ => Route::Discard,
    }
}

/// Signs `msg` on behalf of instance `id`.
pub fn wrap_outgoing(ctx: &mut Ctx<'_>, id: InstanceId, msg: &mut SignedMessage, tag: &[u8]) -> bool {
    ctx.scoped(id, |ctx| ctx.sign(msg, tag))
}

/// Run-scoped allocator of dense instance ids.
#[derive(Debug, Clone, Default)]
pub struct NonceAllocator {
    next: InstanceId,
}

impl NonceAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self) -> InstanceId {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn allocated(&self) -> InstanceId {
        self.next
    }
}

#[derive(Debug, Clone)]
pub struct Mux<I> {
    instances: BTreeMap<InstanceId, I>,
}

impl<I> Default for Mux<I> {
    fn default() -> Self {
        Mux { instances: BTreeMap::new() }
    }
}

impl<I> Mux<I> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: InstanceId, inst: I) {
        self.instances.insert(id, inst);
    }

    pub fn get(&self, id: InstanceId) -> Option<&I> {
        self.instances.get(&id)
    }

    pub fn get_mut(&mut self, id: InstanceId) -> Option<&mut I> {
        self.instances.get_mut(&id)
    }

    pub fn contains(&self, id: InstanceId) -> bool {
        self.instances.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstanceId, &I)> {
        self.instances.iter().map(|(k, v)| (*k, v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (InstanceId, &mut I)> {
        self.instances.iter_mut().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Splits an inbox by route. Returns per-instance mail and the local remainder.
    pub fn split(inbox: &[Delivery], parent: &Nonce) -> (BTreeMap<InstanceId, Vec<Delivery>>, Vec<Delivery>) {
        let mut routed: BTreeMap<InstanceId, Vec<Delivery>> = BTreeMap::new();
        let mut local = Vec::new();
        for d in inbox {
            match route(&d.msg, parent) {
                Route::Instance(id) => routed.entry(id).or_default().push(d.clone()),
                Route::Local => local.push(d.clone()),
                Route::Discard => {}
            }
        }
        (routed, local)
    }

    /// Routes `inbox` and services instances in ascending id order.
    ///
    /// Unknown ids are handed to `spawn`, which may decline. With
    /// `every_instance` set, instances without mail are serviced too.
    /// Returns the deliveries that belong to the parent level.
    pub fn service(
        &mut self,
        inbox: &[Delivery],
        ctx: &mut Ctx<'_>,
        every_instance: bool,
        mut spawn: impl FnMut(InstanceId) -> Option<I>,
        mut run: impl FnMut(InstanceId, &mut I, &[Delivery], &mut Ctx<'_>),
    ) -> Vec<Delivery> {
        let (mut routed, local) = Self::split(inbox, ctx.nonce());
        for id in routed.keys() {
            if !self.instances.contains_key(id) {
                if let Some(inst) = spawn(*id) {
                    self.instances.insert(*id, inst);
                }
            }
        }
        for (id, inst) in self.instances.iter_mut() {
            let mail = routed.remove(id);
            if mail.is_none() && !every_instance {
                continue;
            }
            let mail = mail.unwrap_or_default();
            ctx.scoped(*id, |ctx| run(*id, inst, &mail, ctx));
        }
        local
    }
}
