//! Offline re-audit of a stored run directory.

use std::collections::BTreeSet;
use std::path::Path;

use simnet::{ProcessId, Transcript};

use crate::config::ExperimentConfig;
use crate::run::{execute, read_summary, CONFIG_FILE, METRICS_FILE, TRANSCRIPT_FILE};
use crate::{read_file, PaylabError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    /// Differences between the stored files and a fresh re-run.
    pub mismatches: Vec<String>,
    /// Checker violations of the re-run.
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.violations.is_empty()
    }
}

/// Per-round (messages, signatures) from a stored metrics.csv.
pub fn parse_metrics_csv(text: &str) -> Result<(Vec<u64>, Vec<u64>), PaylabError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let (mut msgs, mut sigs) = (Vec::new(), Vec::new());
    for row in r.deserialize::<(usize, u64, u64)>() {
        let (round, m, s) = row.map_err(|e| PaylabError::Data(format!("metrics.csv: {e}")))?;
        if round != msgs.len() {
            return Err(PaylabError::Data(format!("metrics.csv: round {round} out of order")));
        }
        msgs.push(m);
        sigs.push(s);
    }
    Ok((msgs, sigs))
}

/// Recounts the stored transcript against the stored metrics, re-runs the
/// stored config, and compares every emitted file byte for byte.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport, PaylabError> {
    let cfg_path = dir.join(CONFIG_FILE);
    let cfg: ExperimentConfig = ExperimentConfig::load(&cfg_path)?;
    let stored_transcript = read_file(&dir.join(TRANSCRIPT_FILE))?;
    let stored_metrics = read_file(&dir.join(METRICS_FILE))?;
    let stored_summary = read_summary(dir)?;
    let mut report = VerifyReport::default();

    let transcript = Transcript::from_jsonl(&stored_transcript)
        .map_err(|e| PaylabError::Data(format!("{TRANSCRIPT_FILE}: {e}")))?;
    let (msgs, sigs) = parse_metrics_csv(&stored_metrics)?;
    let corrupted: BTreeSet<ProcessId> = stored_summary.corrupted.iter().map(|p| ProcessId(*p)).collect();
    let (rm, rs) = transcript.recount(&corrupted, msgs.len());
    if rm != msgs {
        report.mismatches.push(format!("transcript recount gives messages {rm:?}, metrics.csv says {msgs:?}"));
    }
    if rs != sigs {
        report.mismatches.push(format!("transcript recount gives signatures {rs:?}, metrics.csv says {sigs:?}"));
    }
    if msgs.iter().sum::<u64>() != stored_summary.messages || sigs.iter().sum::<u64>() != stored_summary.signatures {
        report.mismatches.push("summary totals disagree with metrics.csv".into());
    }

    let fresh = execute(&cfg)?;
    if fresh.transcript.to_jsonl() != stored_transcript {
        report.mismatches.push(format!("{TRANSCRIPT_FILE} differs from a re-run"));
    }
    if fresh.metrics.to_csv() != stored_metrics {
        report.mismatches.push(format!("{METRICS_FILE} differs from a re-run"));
    }
    let mut a = fresh.summary.clone();
    let mut b = stored_summary;
    a.build_id.clear();
    b.build_id.clear();
    if a != b {
        report.mismatches.push("summary differs from a re-run".into());
    }
    for (name, text) in &fresh.extra {
        match std::fs::read_to_string(dir.join(name)) {
            Ok(stored) if &stored == text => {}
            Ok(_) => report.mismatches.push(format!("{name} differs from a re-run")),
            Err(e) => report.mismatches.push(format!("{name}: {e}")),
        }
    }
    report.violations = fresh.summary.violations;
    Ok(report)
}
