use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cyclecoin::{round_len, CycleCoinNode, CycleTopology};
use payments::{check_ps_conditions, instance_origins, plan_inputs, run_bank, BankProcess, PsViolation};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::{NetworkConfig, NoAdversary, Params, ProcessId, SimError};

use crate::gallery::{Gallery, Tactic};

/// A cycle-coin payment system run, honest or under one tactic.
#[derive(Debug, Clone)]
pub struct BankCase {
    pub order: Vec<ProcessId>,
    pub f: usize,
    pub initial: Vec<u64>,
    pub inputs: Vec<Vec<ProcessId>>,
    pub corrupted: BTreeSet<ProcessId>,
    pub tactic: Tactic,
    /// Split only: input rows of the second copy.
    pub alt: BTreeMap<ProcessId, Vec<ProcessId>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankResult {
    pub violations: Vec<PsViolation>,
    pub supply: u64,
    /// Sum of honest final balances.
    pub honest_final: u64,
}

impl BankCase {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn rounds(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn run(&self) -> Result<BankResult, SimError> {
        let n = self.n();
        let params = Params { n, f: self.f };
        let topo = Arc::new(CycleTopology::new(self.order.clone()));
        let make = |_v: u64, origin: ProcessId, me: ProcessId| CycleCoinNode::new(topo.clone(), params, me, origin);
        let origins = instance_origins(&self.initial);
        let host = |p: ProcessId, row: Vec<ProcessId>| {
            let nodes: Vec<_> = origins.iter().enumerate().map(|(v, o)| make(v as u64, *o, p)).collect();
            BankProcess::new(p, nodes, row)
        };
        let cfg = NetworkConfig::new(n, self.f, round_len(n, self.f), self.rounds() as u64)
            .with_seed(self.seed)
            .without_transcript();
        let out = if self.corrupted.is_empty() {
            run_bank(cfg, NoAdversary, &self.initial, &self.inputs, make)?
        } else if self.tactic == Tactic::Split {
            let pairs = self
                .corrupted
                .iter()
                .map(|p| {
                    let row = self.inputs[p.index()].clone();
                    let alt = self.alt.get(p).cloned().unwrap_or_else(|| row.clone());
                    (*p, (host(*p, row), host(*p, alt)))
                })
                .collect();
            run_bank(cfg, Gallery::split(pairs, None), &self.initial, &self.inputs, make)?
        } else {
            let puppets = self.corrupted.iter().map(|p| (*p, host(*p, self.inputs[p.index()].clone()))).collect();
            let horizon = cfg.total_steps();
            let adv = Gallery::new(puppets, self.tactic.clone(), self.seed, horizon);
            run_bank(cfg, adv, &self.initial, &self.inputs, make)?
        };
        let h = &out.history;
        Ok(BankResult {
            violations: check_ps_conditions(h),
            supply: h.supply(),
            honest_final: h.final_balances.values().sum(),
        })
    }
}

/// Seeded random payment system with N in 3..=`max_n`, V ≤ `max_v`,
/// K ≤ `max_k`. With `honest` set no process is corrupted.
pub fn bank_case_random(seed: u64, max_n: usize, max_v: u64, max_k: usize, honest: bool) -> BankCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_n);
    let f = 1;
    let k = rng.gen_range(1..=max_k);
    let v = rng.gen_range(1..=max_v);
    let mut order: Vec<ProcessId> = (0..n).map(ProcessId::from).collect();
    order.shuffle(&mut rng);
    let mut initial = vec![0u64; n];
    for _ in 0..v {
        initial[rng.gen_range(0..n)] += 1;
    }
    let corrupted: BTreeSet<ProcessId> =
        if honest { BTreeSet::new() } else { BTreeSet::from([ProcessId::from(rng.gen_range(0..n))]) };
    let honest_set: BTreeSet<ProcessId> = (0..n).map(ProcessId::from).filter(|p| !corrupted.contains(p)).collect();
    let mut choice = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut inputs = plan_inputs(n, &initial, k, &honest_set, false, |_, _, _| {
        choice.gen_bool(0.6).then(|| ProcessId::from(choice.gen_range(0..n)))
    });
    let random_row = |rng: &mut ChaCha8Rng| (0..k).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    for p in &corrupted {
        inputs[p.index()] = random_row(&mut rng);
    }
    let tactic = match rng.gen_range(0..5) {
        0 => Tactic::Mimic,
        1 => Tactic::Silence { from: rng.gen_range(0..round_len(n, f) * k as u64) },
        2 => Tactic::Replay { rate: rng.gen_range(0.1..0.9) },
        3 => Tactic::Chaos { drop: rng.gen_range(0.0..0.6), misdirect: rng.gen_range(0.0..0.4) },
        _ => Tactic::Split,
    };
    let alt = if tactic == Tactic::Split {
        corrupted.iter().map(|p| (*p, random_row(&mut rng))).collect()
    } else {
        BTreeMap::new()
    };
    BankCase { order, f, initial, inputs, corrupted, tactic, alt, seed }
}
