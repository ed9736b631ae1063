//! One experiment from a config: simulate, check, and emit artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use adversary::{Gallery, Tactic};
use cancel::{pair_bruteforce, pair_greedy, PairingInstance, BRUTE_FORCE_MAX_Q};
use consensus::{run_protocol, value, Agreement, BbFromBa, DolevStrong, Protocol, RunOutcome, Standalone, Value};
use cyclecoin::{round_len, CycleCoinNode, CycleTopology};
use hopnet::{bfs_distances, execute_hop_payment, gen_random_cycles, CycleSet, HopConfig, HopGraph, HopStatus, Route};
use marker::{chain_inputs, run_marker_game, BbMarker, GameOutcome, MarkerNode, MarkerProcess, QuorumMarker, SelfPay};
use payments::{instance_origins, plan_inputs, run_bank, BankProcess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use simnet::{MetricsLedger, NetworkConfig, Params, Process, ProcessId, StepIndex, Transcript};

use crate::config::{ExperimentConfig, ProtocolKind};
use crate::measure::Tc;
use crate::{read_file, write_file, PaylabError, BUILD_ID};

/// Parsed `adversary` field.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarySpec {
    pub tactic: Option<Tactic>,
    pub corrupted: BTreeSet<ProcessId>,
}

impl AdversarySpec {
    pub fn none() -> Self {
        AdversarySpec { tactic: None, corrupted: BTreeSet::new() }
    }

    pub fn parse(s: &str) -> Result<Self, PaylabError> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::none());
        }
        let bad = |m: &str| PaylabError::Config(format!("adversary {s:?}: {m}"));
        let (head, list) = s.split_once(':').ok_or_else(|| bad("expected <tactic>:<processes>"))?;
        let (name, arg) = match head.split_once('@') {
            Some((n, a)) => (n, Some(a)),
            None => (head, None),
        };
        let tactic = match (name, arg) {
            ("silent", None) => Tactic::Silence { from: 0 },
            ("silent", Some(a)) => Tactic::Silence { from: a.parse().map_err(|_| bad("bad silence step"))? },
            ("replay", None) => Tactic::Replay { rate: 0.5 },
            ("replay", Some(a)) => {
                let rate: f64 = a.parse().map_err(|_| bad("bad replay rate"))?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(bad("replay rate must lie in [0, 1]"));
                }
                Tactic::Replay { rate }
            }
            ("chaos", None) => Tactic::Chaos { drop: 0.3, misdirect: 0.2 },
            ("mimic", None) => Tactic::Mimic,
            _ => return Err(bad("tactic must be silent[@step], replay[@rate], chaos or mimic")),
        };
        let corrupted = list
            .split(',')
            .map(|t| t.trim().parse::<u32>().map(ProcessId))
            .collect::<Result<BTreeSet<_>, _>>()
            .map_err(|_| bad("processes must be comma-separated ids"))?;
        if corrupted.is_empty() {
            return Err(bad("no process named"));
        }
        Ok(AdversarySpec { tactic: Some(tactic), corrupted })
    }

    fn check(&self, n: usize, f: usize) -> Result<(), PaylabError> {
        if self.corrupted.len() > f {
            return Err(PaylabError::Config(format!("{} corrupted processes exceed f={f}", self.corrupted.len())));
        }
        if let Some(p) = self.corrupted.iter().find(|p| p.index() >= n) {
            return Err(PaylabError::Config(format!("corrupted {p} is not below N={n}")));
        }
        Ok(())
    }

    fn gallery<P: Process>(&self, seed: u64, horizon: StepIndex, make: impl Fn(ProcessId) -> P) -> Gallery<P> {
        let puppets = self.corrupted.iter().map(|p| (*p, make(*p))).collect();
        Gallery::new(puppets, self.tactic.clone().unwrap_or(Tactic::Mimic), seed, horizon)
    }
}

/// The summary record written next to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub protocol: String,
    pub n: usize,
    pub f: usize,
    pub rounds: u64,
    pub seed: u64,
    pub adversary: String,
    pub corrupted: Vec<u32>,
    pub build_id: String,
    pub messages: u64,
    pub signatures: u64,
    pub steps: u64,
    pub violations: Vec<String>,
    pub details: BTreeMap<String, String>,
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub transcript: Transcript,
    pub metrics: MetricsLedger,
    pub summary: Summary,
    /// Protocol-specific extra outputs: (file name, contents).
    pub extra: Vec<(String, String)>,
}

impl RunArtifacts {
    pub fn ok(&self) -> bool {
        self.summary.violations.is_empty()
    }
}

struct Partial {
    transcript: Transcript,
    metrics: MetricsLedger,
    corrupted: BTreeSet<ProcessId>,
    violations: Vec<String>,
    details: BTreeMap<String, String>,
    extra: Vec<(String, String)>,
}

impl Partial {
    fn new(transcript: Transcript, metrics: MetricsLedger, corrupted: &BTreeSet<ProcessId>) -> Self {
        Partial {
            transcript,
            metrics,
            corrupted: corrupted.clone(),
            violations: Vec::new(),
            details: BTreeMap::new(),
            extra: Vec::new(),
        }
    }

    fn detail(&mut self, k: &str, v: impl ToString) {
        self.details.insert(k.to_string(), v.to_string());
    }
}

/// Runs the experiment the config describes.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifacts, PaylabError> {
    cfg.validate()?;
    let adv = AdversarySpec::parse(&cfg.adversary)?;
    adv.check(cfg.n, cfg.f)?;
    if adv.tactic.is_some() && matches!(cfg.protocol, ProtocolKind::Hop | ProtocolKind::Greedy) {
        return Err(PaylabError::Config(format!("{} takes no adversary", cfg.protocol.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = match cfg.protocol {
        ProtocolKind::DolevStrong => run_ds(cfg, &adv, &mut rng)?,
        ProtocolKind::TurpinCoan => run_tc(cfg, &adv, &mut rng)?,
        ProtocolKind::BbFromBa => run_bb_from_ba(cfg, &adv, &mut rng)?,
        ProtocolKind::Quorum => {
            let params = Params { n: cfg.n, f: cfg.f };
            run_marker(cfg, &adv, &mut rng, |me| QuorumMarker::new(params, me, ProcessId(0), SelfPay::Transfer))?
        }
        ProtocolKind::BbMarker => {
            let params = Params { n: cfg.n, f: cfg.f };
            run_marker(cfg, &adv, &mut rng, |me| BbMarker::new(params, me, ProcessId(0)))?
        }
        ProtocolKind::Cyclecoin => {
            let params = Params { n: cfg.n, f: cfg.f };
            let topo = Arc::new(coin_cycle(cfg)?);
            run_marker(cfg, &adv, &mut rng, |me| CycleCoinNode::new(topo.clone(), params, me, ProcessId(0)))?
        }
        ProtocolKind::Bank => run_bank_case(cfg, &adv, &mut rng)?,
        ProtocolKind::Hop => run_hop(cfg, &mut rng)?,
        ProtocolKind::Greedy => run_greedy(cfg, &mut rng)?,
    };
    let summary = Summary {
        protocol: cfg.protocol.name().into(),
        n: cfg.n,
        f: cfg.f,
        rounds: cfg.rounds,
        seed: cfg.seed,
        adversary: cfg.adversary.clone(),
        corrupted: p.corrupted.iter().map(|p| p.0).collect(),
        build_id: BUILD_ID.into(),
        messages: p.metrics.total_messages(),
        signatures: p.metrics.total_signatures(),
        steps: p.metrics.steps_used,
        violations: p.violations,
        details: p.details,
    };
    Ok(RunArtifacts { config: cfg.clone(), transcript: p.transcript, metrics: p.metrics, summary, extra: p.extra })
}

pub const CONFIG_FILE: &str = "config.toml";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes config, transcript, metrics, summary and extras into `dir`.
pub fn write_artifacts(a: &RunArtifacts, dir: &Path) -> Result<(), PaylabError> {
    write_file(&dir.join(CONFIG_FILE), &a.config.to_toml())?;
    write_file(&dir.join(TRANSCRIPT_FILE), &a.transcript.to_jsonl())?;
    write_file(&dir.join(METRICS_FILE), &a.metrics.to_csv())?;
    let summary = serde_json::to_string_pretty(&a.summary).expect("summary serializes");
    write_file(&dir.join(SUMMARY_FILE), &(summary + "\n"))?;
    for (name, text) in &a.extra {
        write_file(&dir.join(name), text)?;
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary, PaylabError> {
    let path = dir.join(SUMMARY_FILE);
    serde_json::from_str(&read_file(&path)?).map_err(|e| PaylabError::Data(format!("{}: {e}", path.display())))
}

fn show(v: &Value) -> String {
    v.as_u64().map_or_else(|| format!("0x{}", hex_of(&v.encode())), |x| x.to_string())
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Termination, consistency and (when `expected` is set) validity.
fn agreement_checks<P>(out: &RunOutcome<P>, honest: usize, expected: Option<&Value>, deadline: StepIndex, p: &mut Partial) {
    if out.decisions.len() != honest {
        p.violations.push(format!("termination: {} of {honest} honest processes decided", out.decisions.len()));
    }
    if !out.consistent() {
        let seen: BTreeSet<String> = out.decisions.values().map(show).collect();
        p.violations.push(format!("consistency: honest decisions differ {seen:?}"));
    }
    if let (Some(want), Some(got)) = (expected, out.common_decision()) {
        if want != got {
            p.violations.push(format!("validity: decided {} instead of {}", show(got), show(want)));
        }
    }
    if let Some(t) = out.last_decision_step().filter(|t| *t > deadline) {
        p.violations.push(format!("late decision at step {t}, deadline {deadline}"));
    }
    if let Some(v) = out.common_decision() {
        p.detail("decision", show(v));
    }
    if let Some(t) = out.last_decision_step() {
        p.detail("last_decision_step", t);
    }
}

fn run_consensus<P: Protocol>(
    cfg: &ExperimentConfig,
    adv: &AdversarySpec,
    make: impl Fn(ProcessId) -> P,
) -> Result<(RunOutcome<P>, Partial), PaylabError> {
    let params = Params { n: cfg.n, f: cfg.f };
    let horizon = make(ProcessId(0)).duration() + 1;
    let gallery = adv.gallery(cfg.seed, horizon, |q| Standalone::new(make(q)));
    let out = run_protocol(params, gallery, true, &make)?;
    let part = Partial::new(out.transcript.clone(), out.metrics.clone(), &adv.corrupted);
    Ok((out, part))
}

fn run_ds(cfg: &ExperimentConfig, adv: &AdversarySpec, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let params = Params { n: cfg.n, f: cfg.f };
    let leader = ProcessId(0);
    let v = value(rng.gen_range(1..100));
    let (out, mut p) = run_consensus(cfg, adv, |me| DolevStrong::new(params, me, leader, (me == leader).then(|| v.clone())))?;
    let expected = (!adv.corrupted.contains(&leader)).then_some(&v);
    agreement_checks(&out, cfg.n - adv.corrupted.len(), expected, cfg.f as StepIndex + 2, &mut p);
    p.detail("leader_value", show(&v));
    Ok(p)
}

fn run_tc(cfg: &ExperimentConfig, adv: &AdversarySpec, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let params = Params { n: cfg.n, f: cfg.f };
    let inputs: Vec<Value> = (0..cfg.n).map(|_| value(rng.gen_range(1..=3))).collect();
    let (out, mut p) = run_consensus(cfg, adv, |me| Tc::start(params, me, inputs[me.index()].clone()))?;
    let honest: Vec<&Value> =
        (0..cfg.n).filter(|i| !adv.corrupted.contains(&ProcessId::from(*i))).map(|i| &inputs[i]).collect();
    let unanimous = honest.windows(2).all(|w| w[0] == w[1]).then(|| honest[0]);
    let deadline = Tc::start(params, ProcessId(0), value(1)).duration();
    agreement_checks(&out, cfg.n - adv.corrupted.len(), unanimous, deadline, &mut p);
    p.detail("inputs", inputs.iter().map(show).collect::<Vec<_>>().join(" "));
    Ok(p)
}

fn run_bb_from_ba(cfg: &ExperimentConfig, adv: &AdversarySpec, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let params = Params { n: cfg.n, f: cfg.f };
    let leader = ProcessId(0);
    let v = value(rng.gen_range(1..100));
    let make = |me| BbFromBa::<Tc>::new(params, me, leader, (me == leader).then(|| v.clone()));
    let deadline = make(ProcessId(0)).duration();
    let (out, mut p) = run_consensus(cfg, adv, make)?;
    let expected = (!adv.corrupted.contains(&leader)).then_some(&v);
    agreement_checks(&out, cfg.n - adv.corrupted.len(), expected, deadline, &mut p);
    p.detail("leader_value", show(&v));
    Ok(p)
}

/// The cycle for cycle-coin and greedy runs: the first line of the topology
/// file, or the ring 0..N.
fn coin_cycle(cfg: &ExperimentConfig) -> Result<CycleTopology, PaylabError> {
    match &cfg.topology {
        None => Ok(CycleTopology::ring(cfg.n)),
        Some(path) => {
            let set = CycleSet::from_text(&read_file(path)?)?;
            if set.n() != cfg.n {
                return Err(PaylabError::Config(format!("topology has N={} but the config says {}", set.n(), cfg.n)));
            }
            Ok(set.get(0).as_ref().clone())
        }
    }
}

/// A random chain of holders starting at P0.
fn random_targets(n: usize, rounds: u64, rng: &mut ChaCha8Rng) -> Vec<ProcessId> {
    (0..rounds).map(|_| ProcessId::from(rng.gen_range(0..n))).collect()
}

fn run_marker<M: MarkerNode>(
    cfg: &ExperimentConfig,
    adv: &AdversarySpec,
    rng: &mut ChaCha8Rng,
    make: impl Fn(ProcessId) -> M,
) -> Result<Partial, PaylabError> {
    let targets = random_targets(cfg.n, cfg.rounds, rng);
    let inputs = chain_inputs(cfg.n, &targets);
    let len = make(ProcessId(0)).round_len();
    let net = NetworkConfig::new(cfg.n, cfg.f, len, cfg.rounds).with_seed(cfg.seed);
    let gallery = adv.gallery(cfg.seed, net.total_steps(), |q| MarkerProcess::new(make(q), inputs[q.index()].clone()));
    let out: GameOutcome<M> = run_marker_game(net, gallery, &inputs, &make)?;
    let mut p = Partial::new(out.transcript.clone(), out.metrics.clone(), &adv.corrupted);
    p.violations.extend(out.violations().iter().map(|v| format!("{v:?}")));
    p.detail("round_len", len);
    p.detail("targets", targets.iter().map(|t| t.0.to_string()).collect::<Vec<_>>().join(" "));
    let marked: Vec<String> = out
        .record
        .rounds
        .iter()
        .map(|r| {
            let m: Vec<String> = r.marks.iter().filter(|(_, m)| m.is_marked()).map(|(q, _)| q.0.to_string()).collect();
            if m.is_empty() { "-".into() } else { m.join("+") }
        })
        .collect();
    p.detail("marked_after_round", marked.join(" "));
    Ok(p)
}

fn run_bank_case(cfg: &ExperimentConfig, adv: &AdversarySpec, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let (n, f, k) = (cfg.n, cfg.f, cfg.rounds as usize);
    let params = Params { n, f };
    let topo = Arc::new(coin_cycle(cfg)?);
    let mut initial = vec![0u64; n];
    for _ in 0..cfg.supply {
        initial[rng.gen_range(0..n)] += 1;
    }
    let honest: BTreeSet<ProcessId> = (0..n).map(ProcessId::from).filter(|p| !adv.corrupted.contains(p)).collect();
    let mut inputs = plan_inputs(n, &initial, k, &honest, false, |_, _, _| {
        rng.gen_bool(0.6).then(|| ProcessId::from(rng.gen_range(0..n)))
    });
    for q in &adv.corrupted {
        inputs[q.index()] = (0..k).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    }
    let make = |_v: u64, origin: ProcessId, me: ProcessId| CycleCoinNode::new(topo.clone(), params, me, origin);
    let origins = instance_origins(&initial);
    let net = NetworkConfig::new(n, f, round_len(n, f), cfg.rounds).with_seed(cfg.seed);
    let gallery = adv.gallery(cfg.seed, net.total_steps(), |q| {
        let nodes: Vec<_> = origins.iter().enumerate().map(|(v, o)| make(v as u64, *o, q)).collect();
        BankProcess::new(q, nodes, inputs[q.index()].clone())
    });
    let out = run_bank(net, gallery, &initial, &inputs, make)?;
    let mut p = Partial::new(out.transcript.clone(), out.metrics.clone(), &adv.corrupted);
    p.violations.extend(out.violations().iter().map(|v| format!("{v:?}")));
    let h = &out.history;
    let honest_final: u64 = h.final_balances.values().sum();
    if adv.corrupted.is_empty() && honest_final != h.supply() {
        p.violations.push(format!("supply: {honest_final} at the end of an honest run, started with {}", h.supply()));
    }
    p.detail("supply", h.supply());
    p.detail("initial", initial.iter().map(u64::to_string).collect::<Vec<_>>().join(" "));
    p.detail("honest_final", honest_final);
    p.extra.push(("history.csv".into(), h.to_csv()));
    Ok(p)
}

fn run_hop(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let n = cfg.n;
    let cycles = Arc::new(match &cfg.topology {
        Some(path) => CycleSet::from_text(&read_file(path)?)?,
        None => gen_random_cycles(n, cfg.cycles, cfg.seed)?,
    });
    if cycles.n() != n {
        return Err(PaylabError::Config(format!("topology has N={} but the config says {n}", cycles.n())));
    }
    let a = ProcessId::from(rng.gen_range(0..n));
    let mut b = ProcessId::from(rng.gen_range(0..n - 1));
    if b >= a {
        b = ProcessId(b.0 + 1);
    }
    let path = HopGraph::balanced(cycles.clone()).shortest_path(a, b)?;
    let route = Route::from_path(&path);
    let hop_cfg = HopConfig { coin_f: cfg.f, seed: cfg.seed, transcript: true, ..HopConfig::default() };
    let run = execute_hop_payment(cycles.clone(), route, &BTreeMap::new(), &hop_cfg)?;
    let undirected = bfs_distances(&cycles.undirected(), a)[b.index()];
    let mut p = Partial::new(run.net.transcript().clone(), run.net.metrics().clone(), &BTreeSet::new());
    let status = run.status();
    if status != HopStatus::Paid {
        p.violations.push(format!("{a} to {b} ended {status:?}"));
    }
    if path.len() > 2 * undirected + path.hops() as u64 {
        p.violations.push(format!("D={} exceeds 2·{undirected}+{}", path.len(), path.hops()));
    }
    p.detail("a", a.0);
    p.detail("b", b.0);
    p.detail("d", path.len());
    p.detail("hops", path.hops());
    p.detail("undirected", undirected);
    p.detail("status", format!("{status:?}"));
    p.extra.push(("topology.txt".into(), cycles.to_text()));
    Ok(p)
}

fn run_greedy(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Partial, PaylabError> {
    let q = cfg.rounds as usize;
    if q == 0 || q > BRUTE_FORCE_MAX_Q {
        return Err(PaylabError::Config(format!("greedy needs 1 ≤ Q ≤ {BRUTE_FORCE_MAX_Q}, got {q}")));
    }
    let n = cfg.n;
    let cycle = coin_cycle(cfg)?;
    let sources: Vec<ProcessId> = (0..q).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    let sinks: Vec<ProcessId> = (0..q).map(|_| ProcessId::from(rng.gen_range(0..n))).collect();
    let inst = PairingInstance::new(cycle, sources, sinks)?;
    let greedy = pair_greedy(&inst);
    let best = pair_bruteforce(&inst)?;
    let mut p = Partial::new(Transcript::default(), MetricsLedger::default(), &BTreeSet::new());
    if greedy.total_cost != best.total_cost {
        p.violations.push(format!("greedy cost {} above the optimum {}", greedy.total_cost, best.total_cost));
    }
    p.detail("greedy_cost", greedy.total_cost);
    p.detail("optimal_cost", best.total_cost);
    let pairs: Vec<String> = greedy.pairs(&inst).map(|(a, b)| format!("{}>{}", a.0, b.0)).collect();
    p.detail("greedy_pairs", pairs.join(" "));
    p.extra.push(("instance.csv".into(), inst.to_csv()));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversary_grammar() {
        assert_eq!(AdversarySpec::parse("none").unwrap(), AdversarySpec::none());
        let a = AdversarySpec::parse("silent@4:1,2").unwrap();
        assert_eq!(a.tactic, Some(Tactic::Silence { from: 4 }));
        assert_eq!(a.corrupted, BTreeSet::from([ProcessId(1), ProcessId(2)]));
        assert_eq!(AdversarySpec::parse("replay@0.25:3").unwrap().tactic, Some(Tactic::Replay { rate: 0.25 }));
        for bad in ["silent", "boom:1", "replay@2:1", "chaos:x", "mimic:"] {
            assert!(AdversarySpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn too_many_corrupted() {
        let cfg = ExperimentConfig { adversary: "silent:1,2".into(), ..ExperimentConfig::default() };
        assert!(matches!(execute(&cfg), Err(PaylabError::Config(_))));
    }
}
