use std::fmt;

use crate::crypto::NodeId;
use crate::proofs::{ValidationResult, VoteGrant, VotePayload, VoteProof};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoleKind {
    Follower,
    Candidate,
    Leader,
}

impl fmt::Display for RoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleKind::Follower => "follower",
            RoleKind::Candidate => "candidate",
            RoleKind::Leader => "leader",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PacketBody {
    VoteRequest {
        payload: VotePayload,
    },
    VoteResponse {
        grant: VoteGrant,
    },
    /// Leader liveness beacon. Always carries the proof-of-voting.
    Heartbeat {
        term: u64,
        leader: NodeId,
        proof: VoteProof,
    },
}

impl PacketBody {
    pub fn kind(&self) -> &'static str {
        match self {
            PacketBody::VoteRequest { .. } => "vote-request",
            PacketBody::VoteResponse { .. } => "vote-response",
            PacketBody::Heartbeat { .. } => "heartbeat",
        }
    }

    pub fn term(&self) -> u64 {
        match self {
            PacketBody::VoteRequest { payload } => payload.term,
            PacketBody::VoteResponse { grant } => grant.term,
            PacketBody::Heartbeat { term, .. } => *term,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub from: NodeId,
    pub to: NodeId,
    pub body: PacketBody,
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    PacketArrived(Packet),
    ElectionTimeout,
    HeartbeatTick,
    /// Time passes with nothing else happening.
    Clock(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticCode {
    StaleTerm,
    StaleResponse,
    DuplicateGrant { voter: NodeId },
    BadGrant,
    VoteDenied,
    SenderMismatch,
    Misaddressed,
    ProofRejected(ValidationResult),
    ProofExpired,
    LeaderAccepted { leader: NodeId, term: u64 },
    ClockRegression,
    Internal,
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticCode::StaleTerm => f.write_str("stale-term"),
            DiagnosticCode::StaleResponse => f.write_str("stale-response"),
            DiagnosticCode::DuplicateGrant { voter } => write!(f, "duplicate-grant:{voter}"),
            DiagnosticCode::BadGrant => f.write_str("bad-grant"),
            DiagnosticCode::VoteDenied => f.write_str("vote-denied"),
            DiagnosticCode::SenderMismatch => f.write_str("sender-mismatch"),
            DiagnosticCode::Misaddressed => f.write_str("misaddressed"),
            DiagnosticCode::ProofRejected(r) => write!(f, "proof-rejected:{r}"),
            DiagnosticCode::ProofExpired => f.write_str("own-proof-expired"),
            DiagnosticCode::LeaderAccepted { leader, term } => {
                write!(f, "leader-accepted:{leader}@{term}")
            }
            DiagnosticCode::ClockRegression => f.write_str("clock-regression"),
            DiagnosticCode::Internal => f.write_str("internal"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Send(Vec<Packet>),
    /// Replaces any pending election timer.
    ArmElectionTimer(u64),
    /// Replaces any pending heartbeat timer.
    ArmHeartbeatTimer(u64),
    RoleChanged {
        role: RoleKind,
        term: u64,
    },
    Diagnostic(Diagnostic),
}

impl Output {
    pub(crate) fn diagnostic(code: DiagnosticCode, detail: String) -> Self {
        Output::Diagnostic(Diagnostic { code, detail })
    }
}
