//! Honest-run measurements shared by the sweeps and the acceptance suite.

use std::sync::Arc;

use cancel::{pair_bruteforce, pair_greedy, PairingInstance};
use consensus::{run_protocol, value, Agreement, BbFromBa, BinaryAgreement, DolevStrong, MajorityBa, TurpinCoan};
use cyclecoin::{round_len, CycleCoinNode, CycleTopology};
use hopnet::{hop_experiment, HopError, HopSample};
use marker::{chain_inputs, run_marker_game, QuorumMarker, SelfPay};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use simnet::{NetworkConfig, NoAdversary, Params, ProcessId, SimError, StepIndex};

use crate::fit::{fit_line, power_exponent, LineFit};

pub type Tc = TurpinCoan<MajorityBa>;

/// All-honest Dolev-Strong totals with leader P0.
pub fn ds_counts(n: usize, f: usize) -> Result<(u64, u64), SimError> {
    let params = Params { n, f };
    let leader = ProcessId(0);
    let out = run_protocol(params, NoAdversary, false, |me| {
        DolevStrong::new(params, me, leader, (me == leader).then(|| value(1)))
    })?;
    Ok((out.metrics.total_messages(), out.metrics.total_signatures()))
}

/// Cost of a wrapper over the protocol it wraps, from two all-honest runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Overhead {
    pub n: usize,
    pub f: usize,
    pub extra_steps: i64,
    pub extra_messages: i64,
}

/// Turpin-Coan over majority agreement against the bare binary agreement
/// it ends up running (alert = false under unanimous inputs).
pub fn tc_overhead(n: usize, f: usize) -> Result<Overhead, SimError> {
    let params = Params { n, f };
    let tc = run_protocol(params, NoAdversary, false, |me| Tc::start(params, me, value(7)))?;
    let ba = run_protocol(params, NoAdversary, false, |me| <MajorityBa as BinaryAgreement>::start(params, me, false))?;
    Ok(overhead(n, f, (tc.last_decision_step(), tc.metrics.total_messages()), (ba.last_decision_step(), ba.metrics.total_messages())))
}

/// Broadcast from agreement against the agreement alone.
pub fn bb_overhead(n: usize, f: usize) -> Result<Overhead, SimError> {
    let params = Params { n, f };
    let leader = ProcessId(0);
    let bb = run_protocol(params, NoAdversary, false, |me| {
        BbFromBa::<Tc>::new(params, me, leader, (me == leader).then(|| value(5)))
    })?;
    let ba = run_protocol(params, NoAdversary, false, |me| Tc::start(params, me, value(5)))?;
    Ok(overhead(n, f, (bb.last_decision_step(), bb.metrics.total_messages()), (ba.last_decision_step(), ba.metrics.total_messages())))
}

fn overhead(n: usize, f: usize, outer: (Option<StepIndex>, u64), inner: (Option<StepIndex>, u64)) -> Overhead {
    let step = |s: Option<StepIndex>| s.map_or(-1, |s| s as i64);
    Overhead {
        n,
        f,
        extra_steps: step(outer.0) - step(inner.0),
        extra_messages: outer.1 as i64 - inner.1 as i64,
    }
}

/// Honest messages of one round in which P0 pays `target` with the quorum marker.
pub fn quorum_z(n: usize, f: usize, target: ProcessId, self_pay: SelfPay) -> Result<u64, SimError> {
    let params = Params { n, f };
    let cfg = NetworkConfig::new(n, f, 3, 1).without_transcript();
    let out = run_marker_game(cfg, NoAdversary, &chain_inputs(n, &[target]), |me| {
        QuorumMarker::new(params, me, ProcessId(0), self_pay)
    })?;
    Ok(out.metrics.total_messages())
}

/// Honest messages of one cycle-coin round where the coin starts at `a` and goes to `b`.
pub fn coin_z(topo: &Arc<CycleTopology>, f: usize, a: ProcessId, b: ProcessId) -> Result<u64, SimError> {
    let n = topo.n();
    let params = Params { n, f };
    let mut inputs: Vec<Vec<ProcessId>> = (0..n).map(|p| vec![ProcessId::from(p)]).collect();
    inputs[a.index()] = vec![b];
    let cfg = NetworkConfig::new(n, f, round_len(n, f), 1).without_transcript();
    let out = run_marker_game(cfg, NoAdversary, &inputs, |me| CycleCoinNode::new(topo.clone(), params, me, a))?;
    Ok(out.metrics.total_messages())
}

/// The all-honest cost of a cycle-coin payment over distance `d`.
pub fn coin_reference(d: u64) -> u64 {
    2 * d.saturating_sub(1) + u64::from(d >= 1)
}

/// Messages received by the last process when P0, P1, ... each pass the coin
/// one step along the ring, ending at P(N-2).
pub fn coin_sequential_last_received(n: usize, f: usize) -> Result<u64, SimError> {
    let params = Params { n, f };
    let topo = Arc::new(CycleTopology::ring(n));
    let targets: Vec<ProcessId> = (1..n - 1).map(ProcessId::from).collect();
    let cfg = NetworkConfig::new(n, f, round_len(n, f), targets.len() as u64).without_transcript();
    let out = run_marker_game(cfg, NoAdversary, &chain_inputs(n, &targets), |me| {
        CycleCoinNode::new(topo.clone(), params, me, ProcessId(0))
    })?;
    Ok(out.metrics.received_by(ProcessId::from(n - 1)))
}

/// Σ over all targets of z for one marker solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TightnessRow {
    pub solution: &'static str,
    pub n: usize,
    pub f: usize,
    pub nf: u64,
    pub sum_z: u64,
}

pub fn coin_tightness(n: usize, f: usize) -> Result<TightnessRow, SimError> {
    let topo = Arc::new(CycleTopology::ring(n));
    let mut sum_z = 0;
    for t in 0..n {
        sum_z += coin_z(&topo, f, ProcessId(0), ProcessId::from(t))?;
    }
    Ok(TightnessRow { solution: "cyclecoin", n, f, nf: (n * f) as u64, sum_z })
}

pub fn quorum_tightness(n: usize, f: usize, self_pay: SelfPay) -> Result<TightnessRow, SimError> {
    let mut sum_z = 0;
    for t in 0..n {
        sum_z += quorum_z(n, f, ProcessId::from(t), self_pay)?;
    }
    Ok(TightnessRow { solution: "quorum", n, f, nf: (n * f) as u64, sum_z })
}

/// Exponents of Σz over a set of rows: against N directly, and twice the
/// exponent against N·f (the growth in N that N·f ~ N² would give).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightnessFit {
    pub raw_exponent: f64,
    pub nf_exponent: f64,
    pub min_ratio: f64,
}

pub fn tightness_fit(rows: &[TightnessRow]) -> Option<TightnessFit> {
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let nf: Vec<f64> = rows.iter().map(|r| r.nf as f64).collect();
    let z: Vec<f64> = rows.iter().map(|r| r.sum_z as f64).collect();
    Some(TightnessFit {
        raw_exponent: power_exponent(&ns, &z)?,
        nf_exponent: 2.0 * power_exponent(&nf, &z)?,
        min_ratio: rows.iter().map(|r| r.sum_z as f64 / r.nf as f64).fold(f64::INFINITY, f64::min),
    })
}

/// Per-N worst cases of the hop experiment over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopScalingRow {
    pub n: usize,
    pub samples: usize,
    pub max_messages: u64,
    pub max_d: u64,
    pub max_undirected: u64,
    pub all_paid: bool,
    /// Samples where D > 2·(undirected distance) + hops.
    pub bound_breaches: usize,
}

pub fn hop_scaling_row(n: usize, k: usize, seeds: &[u64], pairs: usize) -> Result<(HopScalingRow, Vec<HopSample>), HopError> {
    let mut samples = Vec::new();
    for s in seeds {
        samples.extend(hop_experiment(n, k, *s, pairs, 1)?);
    }
    let row = HopScalingRow {
        n,
        samples: samples.len(),
        max_messages: samples.iter().map(|s| s.messages).max().unwrap_or(0),
        max_d: samples.iter().map(|s| s.d).max().unwrap_or(0),
        max_undirected: samples.iter().map(|s| s.undirected).max().unwrap_or(0),
        all_paid: samples.iter().all(|s| s.paid),
        bound_breaches: samples.iter().filter(|s| s.d > 2 * s.undirected + s.hops as u64).count(),
    };
    Ok((row, samples))
}

/// Fit of max messages against ln N.
pub fn hop_log_fit(rows: &[HopScalingRow]) -> Option<(LineFit, f64)> {
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_messages as f64).collect();
    let fit = fit_line(&xs, &ys)?;
    Some((fit, fit.max_relative_residual(&xs, &ys)))
}

/// Greedy against the enumeration oracle on one random instance with Q
/// sources on the ring of `n`. Returns a description of any disagreement.
pub fn greedy_check(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Option<String> {
    let mut a: Vec<ProcessId> = (0..q).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    let b: Vec<ProcessId> = (0..q).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    a.shuffle(rng);
    let inst = PairingInstance::new(CycleTopology::ring(n), a.clone(), b.clone()).expect("balanced, in range");
    let g = pair_greedy(&inst).total_cost;
    match pair_bruteforce(&inst) {
        Ok(o) if o.total_cost == g => None,
        Ok(o) => Some(format!("N={n} {a:?} {b:?}: greedy {g} optimum {}", o.total_cost)),
        Err(e) => Some(format!("N={n} {a:?} {b:?}: {e}")),
    }
}

/// `count` seeded instances with N in 2..=`max_n` and Q in 1..=`max_q`.
/// Returns (instances, mismatches).
pub fn greedy_random(count: usize, max_q: usize, max_n: usize, seed: u64) -> (usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..count {
        let n = rng.gen_range(2..=max_n);
        let q = rng.gen_range(1..=max_q);
        bad.extend(greedy_check(n, q, &mut rng));
    }
    (count, bad)
}
