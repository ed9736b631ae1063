use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::PaylabError;

/// Protocols the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    DolevStrong,
    TurpinCoan,
    BbFromBa,
    Quorum,
    BbMarker,
    Cyclecoin,
    Bank,
    Hop,
    Greedy,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 9] = [
        ProtocolKind::DolevStrong,
        ProtocolKind::TurpinCoan,
        ProtocolKind::BbFromBa,
        ProtocolKind::Quorum,
        ProtocolKind::BbMarker,
        ProtocolKind::Cyclecoin,
        ProtocolKind::Bank,
        ProtocolKind::Hop,
        ProtocolKind::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::DolevStrong => "dolev-strong",
            ProtocolKind::TurpinCoan => "turpin-coan",
            ProtocolKind::BbFromBa => "bb-from-ba",
            ProtocolKind::Quorum => "quorum",
            ProtocolKind::BbMarker => "bb-marker",
            ProtocolKind::Cyclecoin => "cyclecoin",
            ProtocolKind::Bank => "bank",
            ProtocolKind::Hop => "hop",
            ProtocolKind::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown protocol {s:?}; expected one of {}", Self::names()))
    }
}

impl ProtocolKind {
    fn names() -> String {
        ProtocolKind::ALL.map(ProtocolKind::name).join(", ")
    }
}

/// One experiment. Defaults, then the config file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub f: usize,
    /// K: rounds for marker games and banks, Q for greedy pairing.
    pub rounds: u64,
    pub seed: u64,
    /// Total supply V for banks.
    pub supply: u64,
    /// Cycles in a generated hop topology.
    pub cycles: usize,
    /// Hop topology file (one cycle per line); generated when absent.
    pub topology: Option<PathBuf>,
    /// `none`, or `<tactic>:<process>[,<process>...]` with tactic one of
    /// silent, replay, chaos, mimic. `silent@<step>:<p>` goes quiet from a step.
    pub adversary: String,
    pub out: PathBuf,
    pub workers: usize,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: ProtocolKind::Quorum,
            n: 4,
            f: 1,
            rounds: 3,
            seed: 0,
            supply: 2,
            cycles: 2,
            topology: None,
            adversary: "none".into(),
            out: PathBuf::from("paylab-out"),
            workers: 1,
            sweep: SweepGrid::default(),
        }
    }
}

/// What `sweep` iterates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    /// `cells` runs `protocol` over n × f × seeds; `tightness`, `greedy`,
    /// `hop` and `ds-counts` run the named study.
    pub kind: String,
    pub n: Vec<usize>,
    pub f: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Source counts for the greedy study.
    pub q: Vec<usize>,
    /// Pairs per seed for the hop study; instances per cell for greedy.
    pub samples: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { kind: "cells".into(), n: vec![4, 5, 6], f: vec![1], seeds: vec![0], q: vec![2, 3, 4, 5, 6], samples: 100 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, PaylabError> {
        let text = std::fs::read_to_string(path).map_err(|e| PaylabError::io(path, e))?;
        toml::from_str(&text).map_err(|e| PaylabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parameter bounds per protocol.
    pub fn validate(&self) -> Result<(), PaylabError> {
        let (n, f) = (self.n, self.f);
        let bad = |m: String| Err(PaylabError::Config(m));
        match self.protocol {
            ProtocolKind::DolevStrong | ProtocolKind::Cyclecoin | ProtocolKind::Bank | ProtocolKind::Hop
                if f + 1 >= n =>
            {
                bad(format!("{} needs f+1 < N, got N={n} f={f}", self.protocol.name()))
            }
            ProtocolKind::TurpinCoan | ProtocolKind::BbFromBa | ProtocolKind::Quorum | ProtocolKind::BbMarker
                if 3 * f >= n =>
            {
                bad(format!("{} needs 3f < N, got N={n} f={f}", self.protocol.name()))
            }
            ProtocolKind::Bank if self.supply == 0 => bad("bank needs a positive supply".into()),
            ProtocolKind::Greedy if n < 2 => bad("greedy needs N ≥ 2".into()),
            _ if n < 2 => bad(format!("N={n} is too small")),
            _ => {
                if let Some(t) = &self.topology {
                    if !t.exists() {
                        return bad(format!("topology file {} does not exist", t.display()));
                    }
                }
                Ok(())
            }
        }
    }
}
