//! The `mokka` command line.
//!
//! Exit codes: 0 on success, 1 when an invariant or a proof check fails,
//! 2 for usage, parse and I/O errors.

mod keyset;
mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::proofs::{decode_proof, validate_proof, ProofPolicy};
use crate::simnet::{bundled, render_trace, run, scripted_partition_leadership, Scenario, BUNDLED};

pub use keyset::{ComboEntry, KeyEntry, Keyset};
pub use report::{human_report, machine_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mokka",
    version,
    about = "Proof-of-voting leader election toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive a deterministic cluster keyset.
    Keys {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        seed: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a scenario and check its invariants.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        machine: bool,
        /// Write the trace here (`-` for stdout).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a scenario under many seeds.
    Check {
        scenario: String,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        machine: bool,
    },
    /// Validate a hex-encoded proof against a keyset at a virtual time.
    Verify {
        #[arg(long)]
        proof: String,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        now: u64,
        #[arg(long, default_value_t = ProofPolicy::default().ttl_ms)]
        ttl_ms: u64,
        #[arg(long, default_value_t = ProofPolicy::default().max_clock_skew_ms)]
        skew_ms: u64,
    },
}

/// Runs the CLI with explicit streams; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Keys {
            nodes,
            seed,
            out: path,
        } => cmd_keys(nodes, &seed, &path, out),
        Command::Run {
            scenario,
            machine,
            trace,
        } => cmd_run(&scenario, machine, trace.as_deref(), out),
        Command::Check {
            scenario,
            seeds,
            machine,
        } => cmd_check(&scenario, seeds, machine, out),
        Command::Verify {
            proof,
            keys,
            now,
            ttl_ms,
            skew_ms,
        } => cmd_verify(
            &proof,
            &keys,
            now,
            ProofPolicy {
                ttl_ms,
                max_clock_skew_ms: skew_ms,
            },
            out,
        ),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
    }
}

type CmdResult = Result<i32, String>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn cmd_keys(n: usize, seed: &str, path: &Path, out: &mut dyn Write) -> CmdResult {
    let keyset = Keyset::generate(seed, n).map_err(|e| e.to_string())?;
    std::fs::write(path, keyset.to_toml()).map_err(io_err(path))?;
    let _ = writeln!(
        out,
        "wrote {} keys and {} combos to {}",
        keyset.node.len(),
        keyset.combo.len(),
        path.display()
    );
    Ok(EXIT_OK)
}

/// Reads a scenario file; a bare bundled name works when no such file exists.
pub fn load_scenario(arg: &str) -> Result<Scenario, String> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = bundled(arg) {
            return Ok(s);
        }
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        return Err(format!(
            "{arg}: no such file or bundled scenario (bundled: {})",
            names.join(", ")
        ));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Scenario::from_toml(&text).map_err(|e| format!("{arg}: {e}"))
}

fn cmd_run(arg: &str, machine: bool, trace_path: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let scenario = load_scenario(arg)?;
    let (trace, report) = run(&scenario).map_err(|e| e.to_string())?;
    let partitions = scripted_partition_leadership(&trace, &report);
    match trace_path {
        Some(p) if p == Path::new("-") => {
            let _ = out.write_all(render_trace(&trace).as_bytes());
        }
        Some(p) => std::fs::write(p, render_trace(&trace)).map_err(io_err(p))?,
        None => {}
    }
    let text = if machine {
        machine_report(&report, &partitions)
    } else {
        human_report(&report, &partitions)
    };
    let _ = out.write_all(text.as_bytes());
    Ok(if report.violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct SeedOutcome {
    seed: u64,
    violations: usize,
    elections: usize,
    leader_terms: usize,
    longest_dual_ms: u64,
    converged: bool,
}

fn run_seed(scenario: &Scenario, seed: u64) -> Result<SeedOutcome, String> {
    let (trace, report) = run(&scenario.with_seed(seed)).map_err(|e| e.to_string())?;
    let partitions = scripted_partition_leadership(&trace, &report);
    Ok(SeedOutcome {
        seed,
        violations: report.violations.len(),
        elections: report.elections_started,
        leader_terms: report.leaders_per_term.len(),
        longest_dual_ms: partitions
            .dual
            .iter()
            .map(|d| d.length_ms())
            .max()
            .unwrap_or(0),
        converged: report.final_leader().is_some(),
    })
}

/// Runs `scenario` under `count` consecutive seeds starting at its own seed.
/// Seeds are spread over threads; results come back in seed order.
fn run_seeds(scenario: &Scenario, count: u64) -> Result<Vec<SeedOutcome>, String> {
    let seeds: Vec<u64> = (0..count).map(|i| scenario.seed.wrapping_add(i)).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len());
    let chunk = seeds.len().div_ceil(workers);
    let results: Vec<Result<Vec<SeedOutcome>, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| run_seed(scenario, *s)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let mut all = Vec::with_capacity(seeds.len());
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}

fn stats(values: impl Iterator<Item = u64>) -> String {
    let v: Vec<u64> = values.collect();
    let min = v.iter().min().copied().unwrap_or(0);
    let max = v.iter().max().copied().unwrap_or(0);
    let mean = v.iter().sum::<u64>() as f64 / v.len().max(1) as f64;
    format!("min={min} mean={mean:.2} max={max}")
}

fn cmd_check(arg: &str, seeds: u64, machine: bool, out: &mut dyn Write) -> CmdResult {
    if seeds == 0 {
        return Err("--seeds must be at least 1".into());
    }
    let scenario = load_scenario(arg)?;
    let outcomes = run_seeds(&scenario, seeds)?;
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.violations > 0)
        .map(|o| o.seed.to_string())
        .collect();
    let violations: usize = outcomes.iter().map(|o| o.violations).sum();
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let elections = stats(outcomes.iter().map(|o| o.elections as u64));
    let terms = stats(outcomes.iter().map(|o| o.leader_terms as u64));
    let dual = stats(outcomes.iter().map(|o| o.longest_dual_ms));
    let last = scenario.seed.wrapping_add(seeds - 1);
    let mut text = String::new();
    if machine {
        let _ = writeln!(text, "runs\t{seeds}");
        let _ = writeln!(text, "seeds\t{}..={last}", scenario.seed);
        let _ = writeln!(text, "violations\t{violations}");
        let _ = writeln!(
            text,
            "failed_seeds\t{}",
            if failed.is_empty() {
                "-".into()
            } else {
                failed.join(",")
            }
        );
        let _ = writeln!(text, "elections_started\t{elections}");
        let _ = writeln!(text, "leader_terms\t{terms}");
        let _ = writeln!(text, "longest_dual_leadership_ms\t{dual}");
        let _ = writeln!(text, "converged_runs\t{converged}");
        let _ = writeln!(
            text,
            "result\t{}",
            if failed.is_empty() {
                "ok"
            } else {
                "violations"
            }
        );
    } else {
        let _ = writeln!(
            text,
            "{seeds} runs (seeds {}..={last}): {violations} violations",
            scenario.seed
        );
        if !failed.is_empty() {
            let _ = writeln!(text, "failing seeds: {}", failed.join(", "));
        }
        let _ = writeln!(text, "elections started per run: {elections}");
        let _ = writeln!(text, "terms with a leader per run: {terms}");
        let _ = writeln!(text, "longest dual leadership per run (ms): {dual}");
        let _ = writeln!(
            text,
            "{converged} of {seeds} runs ended with every honest node following one leader"
        );
    }
    let _ = out.write_all(text.as_bytes());
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_verify(
    proof_hex: &str,
    keys: &Path,
    now: u64,
    policy: ProofPolicy,
    out: &mut dyn Write,
) -> CmdResult {
    policy.validate().map_err(|e| e.to_string())?;
    let bytes = hex::decode(proof_hex.trim()).map_err(|e| format!("proof hex: {e}"))?;
    let proof = decode_proof(&bytes).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(keys).map_err(io_err(keys))?;
    let keyset = Keyset::from_toml(&text).map_err(|e| format!("{}: {e}", keys.display()))?;
    let keyring = keyset
        .keyring()
        .map_err(|e| format!("{}: {e}", keys.display()))?;
    let result = validate_proof(&proof, &keyring, &policy, now);
    let _ = writeln!(out, "{}", result.as_str());
    Ok(if result.is_ok() { EXIT_OK } else { EXIT_FAILED })
}
