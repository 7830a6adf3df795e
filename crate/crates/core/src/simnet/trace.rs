use std::fmt::{self, Write as _};

use crate::crypto::NodeId;
use crate::node::{DiagnosticCode, Packet, PacketBody, RoleKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    VoteRequest,
    VoteResponse,
    Heartbeat,
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketKind::VoteRequest => "vote-request",
            PacketKind::VoteResponse => "vote-response",
            PacketKind::Heartbeat => "heartbeat",
        })
    }
}

/// What the trace keeps of a packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketInfo {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: PacketKind,
    pub term: u64,
    /// Heartbeats only: claimed leader and proof timestamp.
    pub leader: Option<NodeId>,
    pub proof_ts: Option<u64>,
}

impl PacketInfo {
    pub fn of(packet: &Packet) -> Self {
        let (kind, leader, proof_ts) = match &packet.body {
            PacketBody::VoteRequest { .. } => (PacketKind::VoteRequest, None, None),
            PacketBody::VoteResponse { .. } => (PacketKind::VoteResponse, None, None),
            PacketBody::Heartbeat { leader, proof, .. } => (
                PacketKind::Heartbeat,
                Some(*leader),
                Some(proof.timestamp_ms),
            ),
        };
        PacketInfo {
            from: packet.from,
            to: packet.to,
            kind,
            term: packet.body.term(),
            leader,
            proof_ts,
        }
    }

    /// A heartbeat relayed by someone other than the leader it names.
    pub fn is_relayed(&self) -> bool {
        self.leader.is_some_and(|l| l != self.from)
    }
}

impl fmt::Display for PacketInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}->{} term={}",
            self.kind, self.from, self.to, self.term
        )?;
        if let (Some(leader), Some(ts)) = (self.leader, self.proof_ts) {
            write!(f, " leader={leader} proof_ts={ts}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    Partition,
    Loss,
    Silenced,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Partition => "partition",
            DropReason::Loss => "loss",
            DropReason::Silenced => "silenced",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    Election,
    Heartbeat,
    Adversary,
}

impl fmt::Display for TimerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimerKind::Election => "election",
            TimerKind::Heartbeat => "heartbeat",
            TimerKind::Adversary => "adversary",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerAction {
    Arm(u64),
    Fire,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeaderInfo {
    pub voters: Vec<NodeId>,
    pub proof_ts: u64,
    pub proof: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub time_ms: u64,
    pub node: Option<NodeId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at={}", self.invariant, self.time_ms)?;
        if let Some(node) = self.node {
            write!(f, " node={node}")?;
        }
        write!(f, " {}", self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Send(PacketInfo),
    Deliver(PacketInfo),
    Drop {
        packet: PacketInfo,
        reason: DropReason,
    },
    Timer {
        timer: TimerKind,
        action: TimerAction,
    },
    RoleChange {
        role: RoleKind,
        leader: Option<LeaderInfo>,
    },
    Diagnostic {
        code: DiagnosticCode,
        detail: String,
    },
    Violation(Violation),
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Send(_) => "send",
            TraceKind::Deliver(_) => "deliver",
            TraceKind::Drop { .. } => "drop",
            TraceKind::Timer { .. } => "timer",
            TraceKind::RoleChange { .. } => "role_change",
            TraceKind::Diagnostic { .. } => "diagnostic",
            TraceKind::Violation(_) => "violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub time_ms: u64,
    pub node: Option<NodeId>,
    /// The node's term once the event was recorded.
    pub term: u64,
    /// Sequence number of the event that led to this one.
    pub cause: Option<u64>,
    pub kind: TraceKind,
}

pub const TRACE_HEADER: &str = "# seq\ttime_ms\tnode\tterm\tkind\tcause\tdetail";

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t", self.seq, self.time_ms)?;
        match self.node {
            Some(n) => write!(f, "{n}")?,
            None => f.write_str("-")?,
        }
        write!(f, "\t{}\t{}\t", self.term, self.kind.name())?;
        match self.cause {
            Some(c) => write!(f, "{c}\t")?,
            None => f.write_str("-\t")?,
        }
        match &self.kind {
            TraceKind::Send(p) | TraceKind::Deliver(p) => write!(f, "{p}"),
            TraceKind::Drop { packet, reason } => write!(f, "{packet} reason={reason}"),
            TraceKind::Timer { timer, action } => match action {
                TimerAction::Arm(d) => write!(f, "arm {timer} {d}"),
                TimerAction::Fire => write!(f, "fire {timer}"),
            },
            TraceKind::RoleChange { role, leader } => {
                write!(f, "{role}")?;
                if let Some(info) = leader {
                    let voters: Vec<String> = info.voters.iter().map(|v| v.to_string()).collect();
                    write!(
                        f,
                        " voters={} proof_ts={} proof={}",
                        voters.join(","),
                        info.proof_ts,
                        hex::encode(&info.proof)
                    )?;
                }
                Ok(())
            }
            TraceKind::Diagnostic { code, detail } => write!(f, "{code} {detail}"),
            TraceKind::Violation(v) => write!(f, "{v}"),
        }
    }
}

/// Renders a trace as tab-separated lines, one event per line.
pub fn render_trace(trace: &[TraceEvent]) -> String {
    let mut out = String::with_capacity(trace.len() * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for event in trace {
        let _ = writeln!(out, "{event}");
    }
    out
}
