use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::message::{ProcessId, RoundIndex};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub messages: u64,
    pub signatures: u64,
}

/// Honest-sender counters. Adversary sends never touch these.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MetricsLedger {
    pub messages_per_round: Vec<u64>,
    pub signatures_per_round: Vec<u64>,
    pub steps_used: u64,
    /// z_n: honest messages attributed to each input, filled in by harnesses.
    pub per_input: BTreeMap<String, u64>,
    /// X(n): processes that sent or received an honest message.
    pub touched: BTreeSet<ProcessId>,
    pub received: BTreeMap<ProcessId, u64>,
    /// Keyed by the first nonce component of the sending instance.
    pub per_instance: BTreeMap<Option<u64>, Counts>,
}

impl MetricsLedger {
    pub fn with_rounds(rounds: usize) -> Self {
        MetricsLedger {
            messages_per_round: vec![0; rounds],
            signatures_per_round: vec![0; rounds],
            ..Default::default()
        }
    }

    pub(crate) fn record_send(
        &mut self,
        round: RoundIndex,
        from: ProcessId,
        to: ProcessId,
        signatures: u64,
        instance: Option<u64>,
    ) {
        let r = round as usize;
        if self.messages_per_round.len() <= r {
            self.messages_per_round.resize(r + 1, 0);
            self.signatures_per_round.resize(r + 1, 0);
        }
        self.messages_per_round[r] += 1;
        self.signatures_per_round[r] += signatures;
        self.touched.insert(from);
        self.touched.insert(to);
        *self.received.entry(to).or_default() += 1;
        let c = self.per_instance.entry(instance).or_default();
        c.messages += 1;
        c.signatures += signatures;
    }

    pub fn total_messages(&self) -> u64 {
        self.messages_per_round.iter().sum()
    }

    pub fn total_signatures(&self) -> u64 {
        self.signatures_per_round.iter().sum()
    }

    pub fn received_by(&self, p: ProcessId) -> u64 {
        self.received.get(&p).copied().unwrap_or(0)
    }

    pub fn record_input(&mut self, input: impl Into<String>, messages: u64) {
        *self.per_input.entry(input.into()).or_default() += messages;
    }

    /// Per-round counters as CSV with header `round,messages,signatures`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "messages", "signatures"]).unwrap();
        for (r, (m, s)) in self.messages_per_round.iter().zip(&self.signatures_per_round).enumerate() {
            w.serialize((r, m, s)).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
