use std::path::{Path, PathBuf};
use std::process::Command;

use mokka::cli::{main_with, Keyset};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn mokka(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mokka").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn field<'a>(report: &'a str, key: &str) -> Vec<&'a str> {
    report
        .lines()
        .filter_map(|l| l.strip_prefix(key)?.strip_prefix('\t'))
        .collect()
}

#[test]
fn keys_are_deterministic_and_list_combos() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    for path in [&a, &b] {
        let (code, out, _) = mokka(&[
            "keys",
            "--nodes",
            "3",
            "--seed",
            "demo",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("3 combos"), "{out}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let keyset = Keyset::from_toml(&text).unwrap();
    assert_eq!(keyset.combo.len(), 3);
    assert_eq!(keyset.keyring().unwrap().quorum_size(), 2);

    let (code, _, _) = mokka(&[
        "keys",
        "--nodes",
        "5",
        "--seed",
        "demo",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        Keyset::from_toml(&std::fs::read_to_string(&a).unwrap())
            .unwrap()
            .combo
            .len(),
        10
    );
}

#[test]
fn keys_rejects_small_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.toml");
    let (code, _, err) = mokka(&[
        "keys",
        "--nodes",
        "2",
        "--seed",
        "x",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("too small"), "{err}");
    assert!(!path.exists());
}

#[test]
fn tampered_keyset_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.toml");
    mokka(&[
        "keys",
        "--nodes",
        "3",
        "--seed",
        "x",
        "--out",
        path.to_str().unwrap(),
    ]);
    let mut keyset = Keyset::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
    keyset.combo.swap(0, 1);
    assert!(keyset.keyring().is_ok(), "entry order does not matter");
    keyset.combo[0].aggregate_key = keyset.combo[2].aggregate_key.clone();
    assert!(keyset.keyring().is_err());
}

#[test]
fn run_happy_path_exits_zero() {
    let (code, out, _) = mokka(&["run", "happy-path-n3", "--machine"]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "result"), vec!["ok"]);
    assert_eq!(field(&out, "violations"), vec!["0"]);
    let (code, out, _) = mokka(&["run", "happy-path-n3"]);
    assert_eq!(code, 0);
    assert!(out.contains("no invariant violations"));
}

#[test]
fn run_partition_reports_bounded_dual_leadership() {
    let (code, out, _) = mokka(&["run", "partition-4-case4", "--machine"]);
    assert_eq!(code, 0);
    let ttl: u64 = field(&out, "ttl_ms")[0].parse().unwrap();
    let duals = field(&out, "dual_leadership");
    assert!(!duals.is_empty());
    for d in duals {
        let len: u64 = d
            .split(' ')
            .find_map(|kv| kv.strip_prefix("length_ms="))
            .unwrap()
            .parse()
            .unwrap();
        assert!(len <= ttl, "{d}");
        assert!(d.ends_with("exceeds_ttl=false"));
    }
    assert_eq!(field(&out, "partition").len(), 1);
}

#[test]
fn self_test_fixture_exits_one() {
    let (code, out, _) = mokka(&["run", &fixture("self-test.toml"), "--machine"]);
    assert_eq!(code, 1);
    assert!(field(&out, "violation")
        .iter()
        .any(|v| v.starts_with("election-safety-per-term")));
}

#[test]
fn scenario_errors_exit_two() {
    let (code, _, err) = mokka(&["run", &fixture("unknown-key.toml")]);
    assert_eq!(code, 2);
    assert!(err.contains("retries"), "{err}");
    assert_eq!(mokka(&["run", "no-such-scenario"]).0, 2);
    assert_eq!(
        mokka(&["check", &fixture("unknown-key.toml"), "--seeds", "3"]).0,
        2
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mokka(&["run", "happy-path-n3", "--verbose"]).0, 2);
    assert_eq!(mokka(&["frobnicate"]).0, 2);
    assert_eq!(mokka(&[]).0, 2);
    assert_eq!(
        mokka(&["keys", "--nodes", "three", "--seed", "x", "--out", "k"]).0,
        2
    );
    let (code, out, _) = mokka(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("verify"));
}

#[test]
fn check_batches() {
    let (code, out, _) = mokka(&["check", "happy-path-n3", "--seeds", "100", "--machine"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(field(&out, "runs"), vec!["100"]);
    assert_eq!(field(&out, "failed_seeds"), vec!["-"]);

    let (code, out, _) = mokka(&["check", "fake-leader", "--seeds", "100", "--machine"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(field(&out, "violations"), vec!["0"]);

    assert_eq!(mokka(&["check", "happy-path-n3", "--seeds", "0"]).0, 2);
    let (code, _, _) = mokka(&["check", &fixture("self-test.toml"), "--seeds", "2"]);
    assert_eq!(code, 1);
}

#[test]
fn check_output_does_not_depend_on_threading() {
    let a = mokka(&["check", "double-voter", "--seeds", "9", "--machine"]);
    let b = mokka(&["check", "double-voter", "--seeds", "9", "--machine"]);
    assert_eq!(a, b);
}

fn first_leader_proof(trace: &str) -> (String, u64) {
    let line = trace
        .lines()
        .find(|l| l.contains("\trole_change\t") && l.contains("proof="))
        .expect("a leader was elected");
    let detail = line.rsplit('\t').next().unwrap();
    let get = |key: &str| {
        detail
            .split(' ')
            .find_map(|kv| kv.strip_prefix(key))
            .unwrap()
            .to_string()
    };
    (get("proof="), get("proof_ts=").parse().unwrap())
}

#[test]
fn verify_proof_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path: PathBuf = dir.path().join("trace.tsv");
    let keys = dir.path().join("keys.toml");
    let (code, _, _) = mokka(&[
        "run",
        "happy-path-n3",
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (proof, ts) = first_leader_proof(&std::fs::read_to_string(&trace_path).unwrap());
    // bundled scenarios derive keys from the default seed
    mokka(&[
        "keys",
        "--nodes",
        "3",
        "--seed",
        "mokka",
        "--out",
        keys.to_str().unwrap(),
    ]);
    let keys = keys.to_str().unwrap();

    let verify = |now: u64| {
        mokka(&[
            "verify",
            "--proof",
            &proof,
            "--keys",
            keys,
            "--now",
            &now.to_string(),
        ])
    };
    assert_eq!(verify(ts), (0, "ok\n".into(), String::new()));
    assert_eq!(verify(ts + 15_000).0, 0);
    assert_eq!(verify(ts + 15_001), (1, "expired\n".into(), String::new()));

    let truncated = &proof[..proof.len() - 2];
    assert_eq!(
        mokka(&["verify", "--proof", truncated, "--keys", keys, "--now", "0"]).0,
        2
    );
    assert_eq!(
        mokka(&[
            "verify",
            "--proof",
            &proof[1..],
            "--keys",
            keys,
            "--now",
            "0"
        ])
        .0,
        2
    );
    assert_eq!(
        mokka(&[
            "verify",
            "--proof",
            &proof,
            "--keys",
            "/nonexistent",
            "--now",
            "0"
        ])
        .0,
        2
    );

    // another cluster's keys cannot vouch for the proof
    let other = dir.path().join("other.toml");
    mokka(&[
        "keys",
        "--nodes",
        "3",
        "--seed",
        "other",
        "--out",
        other.to_str().unwrap(),
    ]);
    let (code, out, _) = mokka(&[
        "verify",
        "--proof",
        &proof,
        "--keys",
        other.to_str().unwrap(),
        "--now",
        &ts.to_string(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(out, "bad_signature\n");

    let (code, out, _) = mokka(&[
        "verify",
        "--proof",
        &proof,
        "--keys",
        keys,
        "--now",
        &(ts + 2001).to_string(),
        "--ttl-ms",
        "2000",
    ]);
    assert_eq!((code, out.as_str()), (1, "expired\n"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mokka");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["run", "happy-path-n3", "--machine"]), Some(0));
    assert_eq!(status(&["run", &fixture("self-test.toml")]), Some(1));
    assert_eq!(status(&["check", "happy-path-n3", "--seeds", "0"]), Some(2));
}
