use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::message::{ProcessId, RoundIndex, StepIndex};

/// One send event, honest or adversarial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendEvent {
    pub step: StepIndex,
    pub round: RoundIndex,
    pub sender: ProcessId,
    pub recipient: ProcessId,
    pub payload_hex: String,
    pub n_signatures: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<SendEvent>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("send event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Transcript { events })
    }

    /// Recounts honest (messages, signatures) per round straight from the events.
    pub fn recount(&self, corrupted: &BTreeSet<ProcessId>, rounds: usize) -> (Vec<u64>, Vec<u64>) {
        let mut msgs = vec![0u64; rounds];
        let mut sigs = vec![0u64; rounds];
        for e in self.events.iter().filter(|e| !corrupted.contains(&e.sender)) {
            let r = e.round as usize;
            if r >= msgs.len() {
                msgs.resize(r + 1, 0);
                sigs.resize(r + 1, 0);
            }
            msgs[r] += 1;
            sigs[r] += e.n_signatures;
        }
        (msgs, sigs)
    }
}
