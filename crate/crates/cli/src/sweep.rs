//! Parameter grids run in parallel, one isolated simulation per cell.

use marker::SelfPay;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::measure::{coin_tightness, ds_counts, greedy_check, hop_log_fit, hop_scaling_row, quorum_tightness, HopScalingRow, TightnessRow};
use crate::run::execute;
use crate::PaylabError;

/// Aggregated, plot-ready output of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: String,
    pub cells: usize,
    /// Cells with a violation or an error. The sweep does not stop for them.
    pub failures: usize,
    /// Free-form lines for the terminal, such as fitted curves.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct CellRow {
    protocol: String,
    n: usize,
    f: usize,
    seed: u64,
    status: &'static str,
    messages: u64,
    signatures: u64,
    steps: u64,
    violations: usize,
    detail: String,
}

#[derive(Debug, Clone, Serialize)]
struct DsCountRow {
    n: usize,
    f: usize,
    messages: u64,
    signatures: u64,
    message_bound: u64,
    signature_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
struct GreedyRow {
    n: usize,
    q: usize,
    seed: u64,
    instances: usize,
    mismatches: usize,
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// Runs the grid named by `cfg.sweep.kind` on a pool of `cfg.workers` threads.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, PaylabError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| PaylabError::Config(format!("worker pool: {e}")))?;
    let g = &cfg.sweep;
    if g.n.is_empty() {
        return Err(PaylabError::Config("sweep.n is empty".into()));
    }
    pool.install(|| match g.kind.as_str() {
        "cells" => Ok(cells(cfg)),
        "ds-counts" => ds_count_grid(cfg),
        "tightness" => tightness(cfg),
        "greedy" => Ok(greedy(cfg)),
        "hop" => hop(cfg),
        other => Err(PaylabError::Config(format!(
            "unknown sweep kind {other:?}; expected cells, ds-counts, tightness, greedy or hop"
        ))),
    })
}

fn cells(cfg: &ExperimentConfig) -> SweepOutput {
    let g = &cfg.sweep;
    let grid: Vec<(usize, usize, u64)> =
        g.n.iter().flat_map(|n| g.f.iter().flat_map(move |f| g.seeds.iter().map(move |s| (*n, *f, *s)))).collect();
    let rows: Vec<CellRow> = grid
        .par_iter()
        .map(|(n, f, seed)| {
            let cell = ExperimentConfig { n: *n, f: *f, seed: *seed, ..cfg.clone() };
            let base = CellRow {
                protocol: cfg.protocol.name().into(),
                n: *n,
                f: *f,
                seed: *seed,
                status: "ok",
                messages: 0,
                signatures: 0,
                steps: 0,
                violations: 0,
                detail: String::new(),
            };
            match execute(&cell) {
                Ok(a) => CellRow {
                    status: if a.ok() { "ok" } else { "violation" },
                    messages: a.summary.messages,
                    signatures: a.summary.signatures,
                    steps: a.summary.steps,
                    violations: a.summary.violations.len(),
                    detail: a.summary.violations.join("; "),
                    ..base
                },
                Err(e) if e.is_usage() => CellRow { status: "skipped", detail: e.to_string(), ..base },
                Err(e) => CellRow { status: "error", detail: e.to_string(), ..base },
            }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.status == "violation" || r.status == "error").count();
    SweepOutput { csv: to_csv(&rows), cells: rows.len(), failures, notes: Vec::new() }
}

fn ds_count_grid(cfg: &ExperimentConfig) -> Result<SweepOutput, PaylabError> {
    let g = &cfg.sweep;
    let grid: Vec<(usize, usize)> =
        g.n.iter().flat_map(|n| g.f.iter().map(move |f| (*n, *f))).filter(|(n, f)| f + 1 < *n).collect();
    let rows = grid
        .par_iter()
        .map(|(n, f)| {
            let (messages, signatures) = ds_counts(*n, *f)?;
            Ok(DsCountRow {
                n: *n,
                f: *f,
                messages,
                signatures,
                message_bound: (n + 4 * n * (f + 1)) as u64,
                signature_floor: (n * (f + 1)) as f64 / 4.0,
            })
        })
        .collect::<Result<Vec<_>, PaylabError>>()?;
    let failures =
        rows.iter().filter(|r| r.messages > r.message_bound || (r.signatures as f64) < r.signature_floor).count();
    Ok(SweepOutput { csv: to_csv(&rows), cells: rows.len(), failures, notes: Vec::new() })
}

/// Cycle coin at f = N-2 and the quorum marker at its largest f, both against N·f.
fn tightness(cfg: &ExperimentConfig) -> Result<SweepOutput, PaylabError> {
    let mut jobs: Vec<(&'static str, usize, usize)> = Vec::new();
    for n in &cfg.sweep.n {
        if *n >= 3 {
            jobs.push(("cyclecoin", *n, n - 2));
        }
        if *n >= 4 {
            jobs.push(("quorum", *n, (n - 1) / 3));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(s, n, f)| match *s {
            "cyclecoin" => coin_tightness(*n, *f),
            _ => quorum_tightness(*n, *f, SelfPay::Transfer),
        })
        .collect::<Result<Vec<TightnessRow>, _>>()?;
    let mut notes = Vec::new();
    for s in ["cyclecoin", "quorum"] {
        let mine: Vec<TightnessRow> = rows.iter().copied().filter(|r| r.solution == s).collect();
        if let Some(fit) = crate::measure::tightness_fit(&mine) {
            notes.push(format!(
                "{s}: exponent vs N {:.3}, vs N·f (doubled) {:.3}, min Σz/(N·f) {:.3}",
                fit.raw_exponent, fit.nf_exponent, fit.min_ratio
            ));
        }
    }
    Ok(SweepOutput { csv: to_csv(&rows), cells: rows.len(), failures: 0, notes })
}

fn greedy(cfg: &ExperimentConfig) -> SweepOutput {
    let g = &cfg.sweep;
    let grid: Vec<(usize, usize, u64)> = g
        .n
        .iter()
        .flat_map(|n| g.q.iter().flat_map(move |q| g.seeds.iter().map(move |s| (*n, *q, *s))))
        .filter(|(n, q, _)| *n >= 2 && (1..=cancel::BRUTE_FORCE_MAX_Q).contains(q))
        .collect();
    let rows: Vec<GreedyRow> = grid
        .par_iter()
        .map(|(n, q, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mismatches = (0..g.samples).filter_map(|_| greedy_check(*n, *q, &mut rng)).count();
            GreedyRow { n: *n, q: *q, seed: *seed, instances: g.samples, mismatches }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.mismatches > 0).count();
    SweepOutput { csv: to_csv(&rows), cells: rows.len(), failures, notes: Vec::new() }
}

fn hop(cfg: &ExperimentConfig) -> Result<SweepOutput, PaylabError> {
    let g = &cfg.sweep;
    let rows = g
        .n
        .par_iter()
        .map(|n| hop_scaling_row(*n, cfg.cycles, &g.seeds, g.samples).map(|(row, _)| row))
        .collect::<Result<Vec<HopScalingRow>, _>>()?;
    let failures = rows.iter().filter(|r| !r.all_paid || r.bound_breaches > 0).count();
    let mut notes = Vec::new();
    if let Some((fit, res)) = hop_log_fit(&rows) {
        notes.push(format!("max messages ≈ {:.2} + {:.2}·ln N, max relative residual {:.3}", fit.a, fit.b, res));
    }
    Ok(SweepOutput { csv: to_csv(&rows), cells: rows.len(), failures, notes })
}
