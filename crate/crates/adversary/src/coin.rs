use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cyclecoin::{round_len, CycleCoinNode, CycleTopology};
use marker::{chain_inputs, run_marker_game, MarkerProcess, Violation};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::{NetworkConfig, Params, ProcessId, SimError, StepIndex};

use crate::gallery::{Gallery, Tactic};

/// One cycle-coin game under attack. The coin starts at P0.
#[derive(Debug, Clone)]
pub struct CoinCase {
    pub order: Vec<ProcessId>,
    pub f: usize,
    pub corrupted: BTreeSet<ProcessId>,
    pub tactic: Tactic,
    /// Holder of round i pays `targets[i]`.
    pub targets: Vec<ProcessId>,
    /// Split only: input rows of the second copy, per corrupted process.
    pub alt: BTreeMap<ProcessId, Vec<ProcessId>>,
    pub seed: u64,
}

impl CoinCase {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn run(&self) -> Result<Vec<Violation>, SimError> {
        let n = self.n();
        let params = Params { n, f: self.f };
        let topo = Arc::new(CycleTopology::new(self.order.clone()));
        let make = |me| CycleCoinNode::new(topo.clone(), params, me, ProcessId(0));
        let inputs = chain_inputs(n, &self.targets);
        let cfg = NetworkConfig::new(n, self.f, round_len(n, self.f), self.targets.len() as u64)
            .with_seed(self.seed)
            .without_transcript();
        let host = |p: ProcessId, row: Vec<ProcessId>| MarkerProcess::new(make(p), row);
        let out = if self.tactic == Tactic::Split {
            let pairs = self
                .corrupted
                .iter()
                .map(|p| {
                    let row = inputs[p.index()].clone();
                    let alt = self.alt.get(p).cloned().unwrap_or_else(|| row.clone());
                    (*p, (host(*p, row), host(*p, alt)))
                })
                .collect();
            run_marker_game(cfg, Gallery::split(pairs, None), &inputs, make)?
        } else {
            let puppets = self.corrupted.iter().map(|p| (*p, host(*p, inputs[p.index()].clone()))).collect();
            let horizon = cfg.total_steps();
            run_marker_game(cfg, Gallery::new(puppets, self.tactic.clone(), self.seed, horizon), &inputs, make)?
        };
        Ok(out.violations())
    }
}

/// Aggregate of a gallery sweep.
#[derive(Debug, Clone, Default)]
pub struct GalleryReport {
    pub runs: usize,
    pub per_tactic: BTreeMap<&'static str, usize>,
    pub failures: Vec<(String, Vec<Violation>)>,
}

impl GalleryReport {
    pub fn record(&mut self, label: impl FnOnce() -> String, tactic: &Tactic, violations: Vec<Violation>) {
        self.runs += 1;
        *self.per_tactic.entry(tactic.name()).or_default() += 1;
        if !violations.is_empty() {
            self.failures.push((label(), violations));
        }
    }

    pub fn merge(&mut self, other: GalleryReport) {
        self.runs += other.runs;
        for (k, v) in other.per_tactic {
            *self.per_tactic.entry(k).or_default() += v;
        }
        self.failures.extend(other.failures);
    }
}

/// Silence points worth trying within a round of length `len`.
pub fn silence_points(len: StepIndex, rounds: u64) -> Vec<StepIndex> {
    let mut v = vec![0, 1, 2, 3, len / 2, len - 2, len - 1, len + 1, len + len / 2];
    v.retain(|s| *s < len * rounds);
    v.sort_unstable();
    v.dedup();
    v
}

fn subsets(n: usize, max: usize) -> Vec<BTreeSet<ProcessId>> {
    (1u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(ProcessId::from).collect())
        .collect()
}

fn sequences(n: usize, k: usize) -> Vec<Vec<ProcessId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |t| {
                    let mut s = s.clone();
                    s.push(ProcessId::from(t));
                    s
                })
            })
            .collect();
    }
    out
}

/// Every N=4 case over two rounds: each corrupted set within f, each target
/// sequence, and each tactic. Split pairs every alternative input row for
/// one corrupted member with the real one.
pub fn coin_cases_exhaustive(f: usize) -> Vec<CoinCase> {
    let n = 4;
    let k = 2;
    let len = round_len(n, f);
    let order: Vec<ProcessId> = (0..n).map(ProcessId::from).collect();
    let mut cases = Vec::new();
    for z in subsets(n, f) {
        for targets in sequences(n, k) {
            let base = CoinCase {
                order: order.clone(),
                f,
                corrupted: z.clone(),
                tactic: Tactic::Mimic,
                targets: targets.clone(),
                alt: BTreeMap::new(),
                seed: 0,
            };
            let mut tactics = vec![Tactic::Mimic];
            tactics.extend(silence_points(len, k as u64).into_iter().map(|from| Tactic::Silence { from }));
            for seed in 0..2 {
                cases.push(CoinCase { tactic: Tactic::Replay { rate: 0.5 }, seed, ..base.clone() });
                cases.push(CoinCase { tactic: Tactic::Chaos { drop: 0.3, misdirect: 0.2 }, seed, ..base.clone() });
            }
            for t in tactics {
                cases.push(CoinCase { tactic: t, ..base.clone() });
            }
            for member in &z {
                for alt in sequences(n, k) {
                    let row = chain_inputs(n, &alt)[member.index()].clone();
                    if row == chain_inputs(n, &targets)[member.index()] {
                        continue;
                    }
                    let alt = BTreeMap::from([(*member, row)]);
                    cases.push(CoinCase { tactic: Tactic::Split, alt, ..base.clone() });
                }
            }
        }
    }
    cases
}

/// One seeded random case with N in 4..=`max_n`.
pub fn coin_case_random(seed: u64, max_n: usize) -> CoinCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=max_n);
    let f = rng.gen_range(1..=(n - 2).min(3));
    let k = rng.gen_range(1..=3);
    let mut order: Vec<ProcessId> = (0..n).map(ProcessId::from).collect();
    order.shuffle(&mut rng);
    let size = rng.gen_range(1..=f);
    let mut corrupted = BTreeSet::new();
    // the holder is corrupted half the time
    if rng.gen_bool(0.5) {
        corrupted.insert(ProcessId(0));
    }
    while corrupted.len() < size {
        corrupted.insert(ProcessId::from(rng.gen_range(0..n)));
    }
    let targets: Vec<ProcessId> = (0..k).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    let len = round_len(n, f);
    let tactic = match rng.gen_range(0..5) {
        0 => Tactic::Mimic,
        1 => Tactic::Silence { from: rng.gen_range(0..len * k as u64) },
        2 => Tactic::Replay { rate: rng.gen_range(0.1..0.9) },
        3 => Tactic::Chaos { drop: rng.gen_range(0.0..0.6), misdirect: rng.gen_range(0.0..0.4) },
        _ => Tactic::Split,
    };
    let mut alt = BTreeMap::new();
    if tactic == Tactic::Split {
        for p in &corrupted {
            let other: Vec<ProcessId> = (0..k).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
            alt.insert(*p, (0..k).map(|i| if rng.gen_bool(0.7) { other[i] } else { *p }).collect());
        }
    }
    CoinCase { order, f, corrupted, tactic, targets, alt, seed }
}

pub fn run_coin_cases(cases: &[CoinCase]) -> Result<GalleryReport, SimError> {
    let mut report = GalleryReport::default();
    for c in cases {
        let v = c.run()?;
        report.record(|| format!("{c:?}"), &c.tactic, v);
    }
    Ok(report)
}
