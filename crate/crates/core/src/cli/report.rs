use std::fmt::Write as _;

use crate::crypto::NodeId;
use crate::simnet::{PartitionLeadership, RunReport};

fn ids(nodes: impl IntoIterator<Item = NodeId>) -> String {
    let parts: Vec<String> = nodes.into_iter().map(|n| n.to_string()).collect();
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(",")
    }
}

/// One `key<TAB>value` line per fact; stable across runs.
pub fn machine_report(report: &RunReport, partitions: &PartitionLeadership) -> String {
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(out, "{key}\t{value}");
    };
    line("n", report.n.to_string());
    line("scheme", report.scheme.to_string());
    line("seed", report.seed.to_string());
    line("duration_ms", report.duration_ms.to_string());
    line("ttl_ms", report.timing.ttl_ms.to_string());
    let adversaries: Vec<String> = report.adversaries.iter().map(|a| a.to_string()).collect();
    line(
        "adversaries",
        if adversaries.is_empty() {
            "-".into()
        } else {
            adversaries.join(" ")
        },
    );
    line("elections_started", report.elections_started.to_string());
    let terms: Vec<String> = report
        .leaders_per_term
        .iter()
        .map(|(term, leaders)| format!("{term}:{}", ids(leaders.iter().copied())))
        .collect();
    line(
        "leaders_per_term",
        if terms.is_empty() {
            "-".into()
        } else {
            terms.join(" ")
        },
    );
    let roles: Vec<String> = report
        .final_roles
        .iter()
        .map(|(id, role)| format!("{id}:{role}@{}", report.final_terms[id]))
        .collect();
    line("final_roles", roles.join(" "));
    line(
        "final_leader",
        report.final_leader().map_or("-".into(), |l| l.to_string()),
    );
    line(
        "packets",
        format!(
            "sent={} delivered={} dropped={}",
            report.packets.sent, report.packets.delivered, report.packets.dropped
        ),
    );
    for window in &partitions.windows {
        let sides: Vec<String> = window
            .groups
            .iter()
            .map(|g| {
                let led: Vec<String> = g
                    .leaders
                    .iter()
                    .map(|iv| format!("{}@{}:{}..{}", iv.node, iv.term, iv.from_ms, iv.to_ms))
                    .collect();
                format!(
                    "[{}]{}={}",
                    ids(g.members.iter().copied()),
                    if g.majority { "majority" } else { "minority" },
                    if led.is_empty() {
                        "-".into()
                    } else {
                        led.join(",")
                    }
                )
            })
            .collect();
        line(
            "partition",
            format!("{}..{} {}", window.start_ms, window.end_ms, sides.join(" ")),
        );
    }
    for dual in &partitions.dual {
        line(
            "dual_leadership",
            format!(
                "{}..{} leaders={} length_ms={} exceeds_ttl={}",
                dual.from_ms,
                dual.to_ms,
                ids(dual.leaders.iter().copied()),
                dual.length_ms(),
                dual.exceeds_ttl
            ),
        );
    }
    line("violations", report.violations.len().to_string());
    for v in &report.violations {
        line("violation", v.to_string());
    }
    line(
        "result",
        if report.violations.is_empty() {
            "ok".into()
        } else {
            "violations".into()
        },
    );
    out
}

pub fn human_report(report: &RunReport, partitions: &PartitionLeadership) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} nodes, {} proofs, seed {}, {} ms simulated",
        report.n, report.scheme, report.seed, report.duration_ms
    );
    for a in &report.adversaries {
        let _ = writeln!(out, "adversary: {a}");
    }
    let _ = writeln!(
        out,
        "{} elections started, {} terms with a leader",
        report.elections_started,
        report.leaders_per_term.len()
    );
    for (term, leaders) in &report.leaders_per_term {
        let _ = writeln!(
            out,
            "  term {term}: leader {}",
            ids(leaders.iter().copied())
        );
    }
    match report.final_leader() {
        Some(leader) => {
            let _ = writeln!(out, "at the end every honest node follows node {leader}");
        }
        None => {
            let _ = writeln!(out, "at the end the honest nodes do not agree on a leader");
        }
    }
    let _ = writeln!(
        out,
        "packets: {} sent, {} delivered, {} dropped",
        report.packets.sent, report.packets.delivered, report.packets.dropped
    );
    for window in &partitions.windows {
        let _ = writeln!(out, "partition {}..{} ms:", window.start_ms, window.end_ms);
        for g in &window.groups {
            let side = if g.majority { "majority" } else { "minority" };
            let _ = write!(out, "  {side} [{}]:", ids(g.members.iter().copied()));
            if g.leaders.is_empty() {
                let _ = write!(out, " no leader");
            }
            for iv in &g.leaders {
                let _ = write!(
                    out,
                    " node {} led term {} for {} ms;",
                    iv.node,
                    iv.term,
                    iv.length_ms()
                );
            }
            out.push('\n');
        }
    }
    for dual in &partitions.dual {
        let _ = writeln!(
            out,
            "two leaders ({}) from {} to {} ms: {} ms{}",
            ids(dual.leaders.iter().copied()),
            dual.from_ms,
            dual.to_ms,
            dual.length_ms(),
            if dual.exceeds_ttl {
                ", longer than the proof ttl"
            } else {
                ""
            }
        );
    }
    if report.violations.is_empty() {
        let _ = writeln!(out, "no invariant violations");
    } else {
        let _ = writeln!(out, "{} invariant violations:", report.violations.len());
        for v in &report.violations {
            let _ = writeln!(out, "  {v}");
        }
    }
    out
}
