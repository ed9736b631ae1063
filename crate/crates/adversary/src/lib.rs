//! Attack gallery: scripted and seeded adversaries against broadcast, the
//! marker solutions, payment banks and hop disputes.
//!
//! Every corrupted process here runs through simnet's adversary interface,
//! so the forgery rules of the oracle apply to all of them.

use std::collections::BTreeSet;
use std::sync::Arc;

use cyclecoin::{CycleCoinNode, CycleTopology};
use marker::{chain_inputs, run_marker_game, MarkerNode, MarkerProcess, QuorumMarker, SelfPay, Violation};
use serde::Serialize;
use simnet::{NetworkConfig, Params, ProcessId, SimError, StepIndex};

mod bank;
mod coin;
mod dispute;
mod ds;
mod gallery;
mod naive;
mod split;

pub use bank::{bank_case_random, BankCase, BankResult};
pub use coin::{coin_case_random, coin_cases_exhaustive, run_coin_cases, silence_points, CoinCase, GalleryReport};
pub use dispute::{cheats_at, compositions, dispute_sweep, route_with_shape, CheatCase, DisputeReport};
pub use ds::{ds_check, ds_exhaustive, ds_random, DsAttack, DsReport, Injection};
pub use gallery::{Gallery, Tactic};
pub use naive::NaiveMarker;
pub use split::{involvement, split_attack, SplitReport};

/// Marker solutions the gallery can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarkerKind {
    CycleCoin,
    Quorum,
    /// The strawman, expected to fall to the split.
    Naive,
}

impl MarkerKind {
    pub fn name(self) -> &'static str {
        match self {
            MarkerKind::CycleCoin => "cyclecoin",
            MarkerKind::Quorum => "quorum",
            MarkerKind::Naive => "naive",
        }
    }
}

impl std::str::FromStr for MarkerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cyclecoin" | "cycle-coin" => Ok(MarkerKind::CycleCoin),
            "quorum" => Ok(MarkerKind::Quorum),
            "naive" => Ok(MarkerKind::Naive),
            _ => Err(format!("unknown marker protocol {s:?}")),
        }
    }
}

/// Whether the attack is supposed to be stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Expect {
    Resisted,
    /// A planted failure against a weakened protocol.
    Breaks,
}

/// A named attack on a marker game. The coin starts at P0.
#[derive(Debug, Clone)]
pub struct AttackSpec {
    pub name: String,
    pub protocol: MarkerKind,
    pub n: usize,
    pub f: usize,
    pub corrupted: BTreeSet<ProcessId>,
    pub tactic: Tactic,
    /// Holder of round i pays `targets[i]`. For the split these are n₁ and n₂.
    pub targets: Vec<ProcessId>,
    pub expect: Expect,
    pub seed: u64,
}

/// Two honest copies of the holder and the processes in `extra`, one paying n₁
/// and one paying n₂.
pub fn double_spend_split(
    protocol: MarkerKind,
    n: usize,
    f: usize,
    extra: &BTreeSet<ProcessId>,
    n1: ProcessId,
    n2: ProcessId,
) -> AttackSpec {
    let mut corrupted = extra.clone();
    corrupted.insert(ProcessId(0));
    AttackSpec {
        name: "double_spend_split".into(),
        protocol,
        n,
        f,
        corrupted,
        tactic: Tactic::Split,
        targets: vec![n1, n2],
        expect: if protocol == MarkerKind::Naive { Expect::Breaks } else { Expect::Resisted },
        seed: 0,
    }
}

/// `p` runs honestly and goes quiet from step `from`.
pub fn silent_responder(protocol: MarkerKind, n: usize, f: usize, p: ProcessId, from: StepIndex, targets: Vec<ProcessId>) -> AttackSpec {
    AttackSpec {
        name: "silent_responder".into(),
        protocol,
        n,
        f,
        corrupted: BTreeSet::from([p]),
        tactic: Tactic::Silence { from },
        targets,
        expect: Expect::Resisted,
        seed: 0,
    }
}

/// `p` resends messages it has seen to random honest processes.
pub fn stale_chain_replayer(protocol: MarkerKind, n: usize, f: usize, p: ProcessId, seed: u64, targets: Vec<ProcessId>) -> AttackSpec {
    AttackSpec {
        name: "stale_chain_replayer".into(),
        protocol,
        n,
        f,
        corrupted: BTreeSet::from([p]),
        tactic: Tactic::Replay { rate: 0.5 },
        targets,
        expect: Expect::Resisted,
        seed,
    }
}

/// One row of the attack results table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackRecord {
    pub attack: String,
    pub protocol: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub f: usize,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub record: AttackRecord,
    pub violations: Vec<Violation>,
    /// Set only for the split.
    pub split: Option<SplitReport>,
    pub expect: Expect,
}

impl AttackOutcome {
    /// Resisted attacks must leave no violation; planted ones must leave one.
    pub fn as_expected(&self) -> bool {
        match self.expect {
            Expect::Resisted => self.violations.is_empty(),
            Expect::Breaks => !self.violations.is_empty(),
        }
    }
}

fn run_spec_with<M: MarkerNode>(spec: &AttackSpec, make: impl Fn(ProcessId) -> M) -> Result<AttackOutcome, SimError> {
    let (violations, split) = if spec.tactic == Tactic::Split {
        let [n1, n2] = spec.targets[..] else {
            return Err(SimError::Config("the split needs exactly two targets".into()));
        };
        let r = split::split_attack(spec.n, spec.f, &spec.corrupted, n1, n2, &make)?;
        (r.violations.clone(), Some(r))
    } else {
        let len = make(ProcessId(0)).round_len();
        let cfg = NetworkConfig::new(spec.n, spec.f, len, spec.targets.len() as u64).with_seed(spec.seed);
        let inputs = chain_inputs(spec.n, &spec.targets);
        let puppets =
            spec.corrupted.iter().map(|p| (*p, MarkerProcess::new(make(*p), inputs[p.index()].clone()))).collect();
        let adv = Gallery::new(puppets, spec.tactic.clone(), spec.seed, cfg.total_steps());
        (run_marker_game(cfg, adv, &inputs, &make)?.violations(), None)
    };
    let record = AttackRecord {
        attack: spec.name.clone(),
        protocol: spec.protocol.name().into(),
        n: spec.n,
        f: spec.f,
        violations: violations.len(),
    };
    Ok(AttackOutcome { record, violations, split, expect: spec.expect })
}

/// Runs a spec on a ring topology. A split with more than f corrupted
/// processes is skipped and reports nothing.
pub fn run_attack(spec: &AttackSpec) -> Result<AttackOutcome, SimError> {
    let params = Params { n: spec.n, f: spec.f };
    let origin = ProcessId(0);
    match spec.protocol {
        MarkerKind::CycleCoin => {
            let topo = Arc::new(CycleTopology::ring(spec.n));
            run_spec_with(spec, |me| CycleCoinNode::new(topo.clone(), params, me, origin))
        }
        MarkerKind::Quorum => run_spec_with(spec, |me| QuorumMarker::new(params, me, origin, SelfPay::Silent)),
        MarkerKind::Naive => run_spec_with(spec, |me| NaiveMarker::new(me, origin)),
    }
}

/// The results table: attack,protocol,N,f,violations.
pub fn records_to_csv(records: &[AttackRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
