use std::fs;
use std::path::Path;
use std::process::Command;

use paylab::{execute, verify_dir, write_artifacts, ExperimentConfig, ProtocolKind};

fn paylab(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_paylab")).args(args).current_dir(cwd).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), "protocol = \"dolev-strong\"\nn = 5\nf = 1\nseed = 4\nout = \"from-file\"\n").unwrap();
    let (code, stdout, stderr) = paylab(&["run", "--config", "exp.toml", "--n", "7", "--out", "from-flag"], dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("dolev-strong N=7 f=1 K=3 seed=4"), "{stdout}");
    assert!(dir.path().join("from-flag/summary.json").exists());
    assert!(!dir.path().join("from-file").exists());
    let stored = fs::read_to_string(dir.path().join("from-flag/config.toml")).unwrap();
    let cfg: ExperimentConfig = toml::from_str(&stored).unwrap();
    assert_eq!((cfg.protocol, cfg.n, cfg.seed), (ProtocolKind::DolevStrong, 7, 4));
}

#[test]
fn quorum_rounds_in_metrics_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = paylab(&["run", "--protocol", "quorum", "--n", "7", "--f", "2", "--rounds", "3", "--out", "q"], dir.path());
    assert_eq!(code, 0, "{stderr}");
    let csv = fs::read_to_string(dir.path().join("q/metrics.csv")).unwrap();
    let msgs: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(msgs, ["14", "14", "14"]);
    let (code, stdout, _) = paylab(&["verify", "q"], dir.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("reproduce"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(paylab(&["run", "--protocol", "quorum", "--n", "3", "--f", "1"], dir.path()).0, 2);
    assert_eq!(paylab(&["run", "--protocol", "hop", "--adversary", "silent:1"], dir.path()).0, 2);
    fs::write(dir.path().join("bad.toml"), "nonsense = 1\n").unwrap();
    assert_eq!(paylab(&["run", "--config", "bad.toml"], dir.path()).0, 2);
    assert_ne!(paylab(&["run", "--protocol", "nope"], dir.path()).0, 0);
}

#[test]
fn naive_split_fails_the_attack_run_only_as_planted() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = paylab(&["attack", "--protocol", "naive", "--n", "5", "--out", "a"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let csv = fs::read_to_string(dir.path().join("a/attacks.csv")).unwrap();
    assert!(csv.starts_with("attack,protocol,N,f,violations\ndouble_spend_split,naive,5,1,1\n"), "{csv}");
}

#[test]
fn verify_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        protocol: ProtocolKind::Cyclecoin,
        n: 5,
        f: 1,
        adversary: "replay:2".into(),
        ..ExperimentConfig::default()
    };
    let a = execute(&cfg).unwrap();
    write_artifacts(&a, dir.path()).unwrap();
    assert!(verify_dir(dir.path()).unwrap().ok());

    let metrics = dir.path().join("metrics.csv");
    let original = fs::read_to_string(&metrics).unwrap();
    let mut lines: Vec<String> = original.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[1] = (cells[1].parse::<u64>().unwrap() + 1).to_string();
    lines[1] = cells.join(",");
    fs::write(&metrics, lines.join("\n") + "\n").unwrap();
    let r = verify_dir(dir.path()).unwrap();
    assert!(r.mismatches.iter().any(|m| m.contains("recount")), "{r:?}");
    fs::write(&metrics, original).unwrap();

    let transcript = dir.path().join("transcript.jsonl");
    let text = fs::read_to_string(&transcript).unwrap();
    let dropped: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    fs::write(&transcript, dropped).unwrap();
    let r = verify_dir(dir.path()).unwrap();
    assert!(r.mismatches.iter().any(|m| m.contains("transcript.jsonl differs")), "{r:?}");
}

#[test]
fn sweep_records_failing_cells_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("g.toml"),
        "protocol = \"quorum\"\nworkers = 2\n[sweep]\nn = [3, 4, 7]\nf = [1, 2]\nseeds = [0]\n",
    )
    .unwrap();
    let (code, stdout, stderr) = paylab(&["sweep", "--config", "g.toml", "--out", "s"], dir.path());
    assert_eq!(code, 0, "{stderr}");
    let csv = fs::read_to_string(dir.path().join("s/sweep-cells.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.contains("quorum,3,1,0,skipped"), "{csv}");
    assert!(csv.contains("quorum,7,2,0,ok,42,"), "{csv}");
    assert!(stdout.contains("6 cells, 0 failing"));
}

#[test]
fn gen_topology_feeds_a_hop_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = paylab(&["gen-topology", "--kind", "random", "--n", "32", "--cycles", "2", "--seed", "5", "--out", "t.txt"], dir.path());
    assert_eq!(code, 0);
    let (code, stdout, stderr) = paylab(&["run", "--protocol", "hop", "--n", "32", "--topology", "t.txt", "--out", "h"], dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("status: Paid"), "{stdout}");
    assert_eq!(fs::read_to_string(dir.path().join("t.txt")).unwrap(), fs::read_to_string(dir.path().join("h/topology.txt")).unwrap());
}
