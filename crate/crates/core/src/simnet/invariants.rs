use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::scenario::AdversarySpec;
use super::trace::{PacketKind, TimerAction, TimerKind, TraceEvent, TraceKind, Violation};
use super::RunReport;
use crate::crypto::NodeId;
use crate::node::{DiagnosticCode, RoleKind};
use crate::proofs::ValidationResult;

pub const ELECTION_SAFETY: &str = "election-safety-per-term";
pub const VOTE_UNIQUENESS: &str = "vote-uniqueness";
pub const TERM_MONOTONICITY: &str = "term-monotonicity";
pub const FAKE_LEADER_NO_RESET: &str = "fake-leader-never-resets-timers";
pub const REPLAY_REJECTED: &str = "replayed-proof-rejected-after-ttl";
pub const MINORITY_NO_LEADER: &str = "minority-has-no-leader-after-ttl-during-partition";
pub const QUORUM_VOTERS_DISTINCT: &str = "quorum-voters-distinct";

/// One uninterrupted stretch during which `node` held the Leader role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeaderInterval {
    pub node: NodeId,
    pub term: u64,
    pub from_ms: u64,
    pub to_ms: u64,
    pub proof_ts: Option<u64>,
}

impl LeaderInterval {
    pub fn length_ms(&self) -> u64 {
        self.to_ms - self.from_ms
    }
}

pub fn leadership_intervals(trace: &[TraceEvent], end_ms: u64) -> Vec<LeaderInterval> {
    let mut open: BTreeMap<NodeId, LeaderInterval> = BTreeMap::new();
    let mut done = Vec::new();
    for event in trace {
        let (TraceKind::RoleChange { role, leader }, Some(node)) = (&event.kind, event.node) else {
            continue;
        };
        if let Some(mut interval) = open.remove(&node) {
            interval.to_ms = event.time_ms;
            done.push(interval);
        }
        if *role == RoleKind::Leader {
            open.insert(
                node,
                LeaderInterval {
                    node,
                    term: event.term,
                    from_ms: event.time_ms,
                    to_ms: end_ms,
                    proof_ts: leader.as_ref().map(|l| l.proof_ts),
                },
            );
        }
    }
    done.extend(open.into_values());
    done.sort_by_key(|i| (i.from_ms, i.node));
    done
}

fn consequences(trace: &[TraceEvent]) -> HashMap<u64, Vec<&TraceEvent>> {
    let mut map: HashMap<u64, Vec<&TraceEvent>> = HashMap::new();
    for event in trace {
        if let Some(cause) = event.cause {
            map.entry(cause).or_default().push(event);
        }
    }
    map
}

/// Whether an event shows the node treating a heartbeat as coming from a
/// legitimate leader.
fn is_acceptance(event: &TraceEvent) -> bool {
    matches!(
        event.kind,
        TraceKind::Timer {
            timer: TimerKind::Election,
            action: TimerAction::Arm(_),
        } | TraceKind::RoleChange { .. }
            | TraceKind::Diagnostic {
                code: DiagnosticCode::LeaderAccepted { .. },
                ..
            }
    )
}

/// Evaluates the safety invariants over a finished trace.
pub fn check_invariants(trace: &[TraceEvent], report: &RunReport) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violation = |invariant, event: &TraceEvent, detail: String| {
        out.push(Violation {
            invariant,
            time_ms: event.time_ms,
            node: event.node,
            detail,
        })
    };
    let honest = |node: Option<NodeId>| node.is_some_and(|n| report.adversary(n).is_none());
    let fakes: BTreeSet<NodeId> = report
        .adversaries
        .iter()
        .filter(|a| matches!(a, AdversarySpec::FakeLeader { .. }))
        .map(|a| a.node())
        .collect();
    let effects = consequences(trace);
    let no_effects = Vec::new();
    let ttl = report.timing.ttl_ms;
    let q = report.quorum();

    let mut leader_of_term: BTreeMap<u64, NodeId> = BTreeMap::new();
    let mut responses: BTreeSet<(NodeId, u64)> = BTreeSet::new();
    let mut last_term: BTreeMap<NodeId, u64> = BTreeMap::new();

    for event in trace {
        if let Some(node) = event.node {
            if !fakes.contains(&node) {
                let prev = last_term.insert(node, event.term).unwrap_or(0);
                if event.term < prev {
                    violation(
                        TERM_MONOTONICITY,
                        event,
                        format!("term went from {prev} to {}", event.term),
                    );
                }
            }
        }
        match &event.kind {
            TraceKind::RoleChange {
                role: RoleKind::Leader,
                leader,
            } => {
                let node = event.node.expect("role changes name a node");
                match leader_of_term.get(&event.term) {
                    Some(first) if *first != node => violation(
                        ELECTION_SAFETY,
                        event,
                        format!("term {} already led by {first}", event.term),
                    ),
                    _ => {
                        leader_of_term.insert(event.term, node);
                    }
                }
                if let Some(info) = leader {
                    let distinct: BTreeSet<_> = info.voters.iter().collect();
                    if distinct.len() != info.voters.len()
                        || info.voters.len() != q
                        || !distinct.contains(&node)
                    {
                        violation(
                            QUORUM_VOTERS_DISTINCT,
                            event,
                            format!("voters {:?} for quorum {q}", info.voters),
                        );
                    }
                }
            }
            TraceKind::Send(p) if p.kind == PacketKind::VoteResponse && honest(event.node) => {
                if !responses.insert((p.from, p.term)) {
                    violation(
                        VOTE_UNIQUENESS,
                        event,
                        format!("second vote response in term {}", p.term),
                    );
                }
            }
            TraceKind::Deliver(p) if p.kind == PacketKind::Heartbeat && honest(event.node) => {
                let effects = effects.get(&event.seq).unwrap_or(&no_effects);
                if fakes.contains(&p.from) {
                    if let Some(e) = effects.iter().find(|e| is_acceptance(e)) {
                        violation(
                            FAKE_LEADER_NO_RESET,
                            event,
                            format!("forged heartbeat from {} caused {}", p.from, e.kind.name()),
                        );
                    }
                }
                let proof_ts = p.proof_ts.unwrap_or(0);
                if event.time_ms > proof_ts.saturating_add(ttl) {
                    let expired = effects.iter().any(|e| {
                        matches!(
                            e.kind,
                            TraceKind::Diagnostic {
                                code: DiagnosticCode::ProofRejected(ValidationResult::Expired),
                                ..
                            }
                        )
                    });
                    let accepted = effects.iter().any(|e| is_acceptance(e));
                    if accepted || (p.is_relayed() && !expired) {
                        violation(
                            REPLAY_REJECTED,
                            event,
                            format!(
                                "heartbeat from {} with proof_ts={proof_ts} not rejected as expired",
                                p.from
                            ),
                        );
                    }
                }
            }
            TraceKind::Diagnostic {
                code: DiagnosticCode::LeaderAccepted { leader, .. },
                ..
            } if fakes.contains(leader) && honest(event.node) => {
                violation(
                    FAKE_LEADER_NO_RESET,
                    event,
                    format!("accepted impostor {leader} as leader"),
                );
            }
            _ => {}
        }
    }

    let hb = report.timing.heartbeat_interval_ms;
    let intervals = leadership_intervals(trace, report.duration_ms);
    for window in &report.partitions {
        for group in window.groups.iter().filter(|g| g.len() < q) {
            for iv in intervals.iter().filter(|iv| group.contains(&iv.node)) {
                if iv.to_ms <= window.start_ms || iv.from_ms >= window.end_ms {
                    continue;
                }
                let elected_inside = iv.from_ms > window.start_ms;
                let deadline = iv.proof_ts.unwrap_or(iv.from_ms) + ttl + hb;
                let outlived = iv.to_ms.min(window.end_ms) > deadline;
                if elected_inside || outlived {
                    out.push(Violation {
                        invariant: MINORITY_NO_LEADER,
                        time_ms: if elected_inside { iv.from_ms } else { deadline },
                        node: Some(iv.node),
                        detail: format!(
                            "led term {} over {}..{} inside minority window {}..{}",
                            iv.term, iv.from_ms, iv.to_ms, window.start_ms, window.end_ms
                        ),
                    });
                }
            }
        }
    }
    out.sort_by_key(|v| v.time_ms);
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLeadership {
    pub members: Vec<NodeId>,
    pub majority: bool,
    /// Leadership intervals of members, clipped to the window.
    pub leaders: Vec<LeaderInterval>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowLeadership {
    pub start_ms: u64,
    pub end_ms: u64,
    pub groups: Vec<GroupLeadership>,
}

/// A stretch of time in which at least two nodes believed they were Leader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualLeadership {
    pub from_ms: u64,
    pub to_ms: u64,
    pub leaders: Vec<NodeId>,
    pub exceeds_ttl: bool,
}

impl DualLeadership {
    pub fn length_ms(&self) -> u64 {
        self.to_ms - self.from_ms
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionLeadership {
    pub windows: Vec<WindowLeadership>,
    pub dual: Vec<DualLeadership>,
}

/// Summarizes who led on each side of every partition window, and every
/// interval with more than one self-believed leader.
pub fn scripted_partition_leadership(
    trace: &[TraceEvent],
    report: &RunReport,
) -> PartitionLeadership {
    let intervals = leadership_intervals(trace, report.duration_ms);
    let q = report.quorum();
    let windows = report
        .partitions
        .iter()
        .map(|w| WindowLeadership {
            start_ms: w.start_ms,
            end_ms: w.end_ms,
            groups: w
                .groups
                .iter()
                .map(|g| GroupLeadership {
                    members: g.clone(),
                    majority: g.len() >= q,
                    leaders: intervals
                        .iter()
                        .filter(|iv| g.contains(&iv.node))
                        .filter(|iv| iv.to_ms > w.start_ms && iv.from_ms < w.end_ms)
                        .map(|iv| LeaderInterval {
                            from_ms: iv.from_ms.max(w.start_ms),
                            to_ms: iv.to_ms.min(w.end_ms),
                            ..*iv
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();

    let mut points: Vec<u64> = intervals
        .iter()
        .flat_map(|iv| [iv.from_ms, iv.to_ms])
        .collect();
    points.sort_unstable();
    points.dedup();
    let mut dual: Vec<DualLeadership> = Vec::new();
    for pair in points.windows(2) {
        let (from, to) = (pair[0], pair[1]);
        let active: Vec<NodeId> = intervals
            .iter()
            .filter(|iv| iv.from_ms <= from && to <= iv.to_ms && iv.from_ms < iv.to_ms)
            .map(|iv| iv.node)
            .collect();
        if active.len() < 2 {
            continue;
        }
        match dual.last_mut() {
            Some(last) if last.to_ms == from => {
                last.to_ms = to;
                for n in active {
                    if !last.leaders.contains(&n) {
                        last.leaders.push(n);
                    }
                }
            }
            _ => dual.push(DualLeadership {
                from_ms: from,
                to_ms: to,
                leaders: active,
                exceeds_ttl: false,
            }),
        }
    }
    for d in &mut dual {
        d.leaders.sort();
        d.exceeds_ttl = d.length_ms() > report.timing.ttl_ms;
    }
    PartitionLeadership { windows, dual }
}
