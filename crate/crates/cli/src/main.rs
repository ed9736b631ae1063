use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adversary::{double_spend_split, records_to_csv, run_attack, silent_responder, stale_chain_replayer, MarkerKind};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use paylab::topo::{generate, TopologyKind};
use paylab::{execute, run_sweep, verify_dir, write_artifacts, ExperimentConfig, PaylabError, ProtocolKind, BUILD_ID};
use simnet::ProcessId;

#[derive(Parser)]
#[command(name = "paylab", version = BUILD_ID, about = "Simulate, check and measure the broadcast, marker and payment protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One experiment: writes transcript.jsonl, metrics.csv and summary.json.
    Run(Common),
    /// A parameter grid, one CSV row per cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// cells, ds-counts, tightness, greedy or hop (overrides sweep.kind).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Re-run a stored experiment and compare every output.
    Verify {
        /// Directory written by `run`.
        dir: PathBuf,
    },
    /// Print or write a cycle topology, one cycle per line.
    GenTopology {
        #[arg(long, default_value = "random")]
        kind: TopologyKind,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Number of cycles for `random`.
        #[arg(long, default_value_t = 2)]
        cycles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// File to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The split, silence and replay attacks on one marker solution; writes attacks.csv.
    Attack {
        /// cyclecoin, quorum or naive.
        #[arg(long, default_value = "cyclecoin")]
        protocol: MarkerKind,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        f: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "paylab-out")]
        out: PathBuf,
    },
}

/// Flags shared by `run` and `sweep`. Each one overrides the config file.
#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel sweep cells.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    protocol: Option<ProtocolKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    /// K, or Q for greedy.
    #[arg(long)]
    rounds: Option<u64>,
    /// none, or <tactic>:<ids> with tactic silent[@step], replay[@rate], chaos, mimic.
    #[arg(long)]
    adversary: Option<String>,
    /// Total coins for bank runs.
    #[arg(long)]
    supply: Option<u64>,
    /// Cycles in a generated hop topology.
    #[arg(long)]
    cycles: Option<usize>,
    /// Cycle topology file.
    #[arg(long)]
    topology: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, PaylabError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { c.$field = v; } )* };
        }
        take!(seed, out, workers, protocol, n, f, rounds, adversary, supply, cycles);
        if let Some(t) = &self.topology {
            c.topology = Some(t.clone());
        }
        Ok(c)
    }
}

fn cmd_run(common: &Common) -> anyhow::Result<bool> {
    let cfg = common.resolve()?;
    let a = execute(&cfg)?;
    write_artifacts(&a, &cfg.out)?;
    let s = &a.summary;
    println!(
        "{} N={} f={} K={} seed={}: {} messages, {} signatures over {} steps -> {}",
        s.protocol,
        s.n,
        s.f,
        s.rounds,
        s.seed,
        s.messages,
        s.signatures,
        s.steps,
        cfg.out.display()
    );
    for (k, v) in &s.details {
        println!("  {k}: {v}");
    }
    for v in &s.violations {
        eprintln!("violation: {v}");
    }
    Ok(a.ok())
}

fn cmd_sweep(common: &Common, kind: Option<String>) -> anyhow::Result<bool> {
    let mut cfg = common.resolve()?;
    if let Some(k) = kind {
        cfg.sweep.kind = k;
    }
    let out = run_sweep(&cfg)?;
    let path = cfg.out.join(format!("sweep-{}.csv", cfg.sweep.kind));
    std::fs::create_dir_all(&cfg.out).with_context(|| cfg.out.display().to_string())?;
    std::fs::write(&path, &out.csv).with_context(|| path.display().to_string())?;
    print!("{}", out.csv);
    for n in &out.notes {
        println!("# {n}");
    }
    println!("# {} cells, {} failing -> {}", out.cells, out.failures, path.display());
    Ok(out.failures == 0)
}

fn cmd_verify(dir: &Path) -> anyhow::Result<bool> {
    let r = verify_dir(dir)?;
    for m in &r.mismatches {
        eprintln!("mismatch: {m}");
    }
    for v in &r.violations {
        eprintln!("violation: {v}");
    }
    if r.ok() {
        println!("{}: transcript, metrics and summary reproduce; no violations", dir.display());
    }
    Ok(r.ok())
}

fn cmd_attack(protocol: MarkerKind, n: usize, f: usize, seed: u64, out: &Path) -> anyhow::Result<bool> {
    if n < 4 || f == 0 {
        bail!("attacks need N ≥ 4 and f ≥ 1");
    }
    let last = ProcessId::from(n - 1);
    let path_proc = ProcessId::from(n / 2);
    let specs = [
        double_spend_split(protocol, n, f, &BTreeSet::new(), ProcessId(1), last),
        silent_responder(protocol, n, f, path_proc, 1, vec![last, ProcessId(1)]),
        stale_chain_replayer(protocol, n, f, path_proc, seed, vec![last, ProcessId(1), ProcessId(2)]),
    ];
    let mut records = Vec::new();
    let mut all = true;
    for spec in &specs {
        let o = run_attack(spec)?;
        let ok = o.as_expected();
        all &= ok;
        println!(
            "{} on {} N={n} f={f}: {} violations ({:?} expected) {}",
            spec.name,
            protocol.name(),
            o.record.violations,
            o.expect,
            if ok { "as expected" } else { "UNEXPECTED" }
        );
        records.push(o.record);
    }
    std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let path = out.join("attacks.csv");
    std::fs::write(&path, records_to_csv(&records)?).with_context(|| path.display().to_string())?;
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(c) => cmd_run(c),
        Cmd::Sweep { common, kind } => cmd_sweep(common, kind.clone()),
        Cmd::Verify { dir } => cmd_verify(dir),
        Cmd::GenTopology { kind, n, cycles, seed, out } => generate(*kind, *n, *cycles, *seed)
            .map_err(anyhow::Error::from)
            .and_then(|text| {
                match out {
                    Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string())?,
                    None => print!("{text}"),
                }
                Ok(true)
            }),
        Cmd::Attack { protocol, n, f, seed, out } => cmd_attack(*protocol, *n, *f, *seed, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<PaylabError>().is_some_and(PaylabError::is_usage);
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
