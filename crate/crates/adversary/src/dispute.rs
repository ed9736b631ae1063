use std::collections::BTreeMap;
use std::sync::Arc;

use hopnet::{dispute_walkback, execute_hop_payment, Behavior, CycleSet, HopConfig, HopError, HopStatus, Leg, Route};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simnet::ProcessId;

/// One cheat placement on one route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheatCase {
    pub a: ProcessId,
    pub b: ProcessId,
    pub d: usize,
    pub slot: usize,
    pub cheater: ProcessId,
    pub behavior: Behavior,
    pub status: HopStatus,
    pub accused: Option<ProcessId>,
}

impl CheatCase {
    /// A cheater is accused whenever b went unpaid, and nobody honest ever is.
    pub fn correct(&self) -> bool {
        let blames_honest = self.accused.is_some_and(|p| p != self.cheater);
        let unpaid = self.status == HopStatus::Disputed;
        !blames_honest && (!unpaid || self.accused == Some(self.cheater))
    }
}

#[derive(Debug, Clone, Default)]
pub struct DisputeReport {
    pub routes: usize,
    pub cases: Vec<CheatCase>,
}

impl DisputeReport {
    pub fn wrong(&self) -> Vec<&CheatCase> {
        self.cases.iter().filter(|c| !c.correct()).collect()
    }

    pub fn disputed(&self) -> usize {
        self.cases.iter().filter(|c| c.status == HopStatus::Disputed).count()
    }
}

/// Behaviors a participant at `slot` can take, b being the last slot.
pub fn cheats_at(slot: usize, last: usize) -> &'static [Behavior] {
    if slot == last {
        &[Behavior::DenyReceipt, Behavior::SkipPromise]
    } else {
        &[Behavior::KeepCoin, Behavior::FalseProof, Behavior::SkipPromise]
    }
}

/// Leg step counts summing to `d`, every leg at least one step.
pub fn compositions(d: u64) -> Vec<Vec<u64>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    (1..=d)
        .flat_map(|first| {
            compositions(d - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// A valid route with the given leg lengths, switching to a random other
/// cycle at every hop. None if 64 attempts all fail.
pub fn route_with_shape(cycles: &CycleSet, shape: &[u64], rng: &mut impl Rng) -> Option<Route> {
    let n = cycles.n();
    for _ in 0..64 {
        let mut at = ProcessId::from(rng.gen_range(0..n));
        let mut legs: Vec<Leg> = Vec::new();
        for steps in shape {
            let cycle = match legs.last() {
                Some(prev) if cycles.len() > 1 => (prev.cycle + rng.gen_range(1..cycles.len())) % cycles.len(),
                _ => rng.gen_range(0..cycles.len()),
            };
            let topo = cycles.get(cycle);
            let mut to = at;
            for _ in 0..*steps {
                to = topo.succ(to);
            }
            legs.push(Leg { cycle, from: at, to, steps: *steps });
            at = to;
        }
        let route = Route { legs };
        if route.validate(cycles).is_ok() {
            return Some(route);
        }
    }
    None
}

/// Every leg-length shape of total length 1..=`max_d`, one random route per
/// shape, with every single cheater placed at every slot after a.
pub fn dispute_sweep(cycles: Arc<CycleSet>, max_d: u64, cfg: &HopConfig, seed: u64) -> Result<DisputeReport, HopError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DisputeReport::default();
    for d in 1..=max_d {
        for shape in compositions(d) {
            let Some(route) = route_with_shape(&cycles, &shape, &mut rng) else {
                return Err(HopError::Route(format!("no valid route with legs {shape:?}")));
            };
            report.routes += 1;
            let last = route.z() + 1;
            for slot in 1..=last {
                let cheater = route.slot(slot);
                for behavior in cheats_at(slot, last) {
                    let cheats = BTreeMap::from([(cheater, *behavior)]);
                    let run = execute_hop_payment(cycles.clone(), route.clone(), &cheats, cfg)?;
                    let status = run.status();
                    let accused = if status == HopStatus::Disputed { dispute_walkback(&run).accused } else { None };
                    report.cases.push(CheatCase {
                        a: route.a(),
                        b: route.b(),
                        d: d as usize,
                        slot,
                        cheater,
                        behavior: *behavior,
                        status,
                        accused,
                    });
                }
            }
        }
    }
    Ok(report)
}
