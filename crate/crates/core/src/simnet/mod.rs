//! Deterministic discrete-event network simulator.
//!
//! A run is a pure function of its [`Scenario`]: virtual time advances from
//! event to event, packets get a uniform random latency or are dropped, and
//! every source of randomness is derived from the scenario seed. The run
//! produces a totally ordered trace and a [`RunReport`] with the outcome of
//! the invariant checks.

mod invariants;
mod scenario;
mod sim;
mod trace;


use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::crypto::{quorum_for, CryptoError, NodeId};
use crate::node::{NodeError, RoleKind};
use crate::proofs::Scheme;

pub use invariants::{
    check_invariants, leadership_intervals, scripted_partition_leadership, DualLeadership,
    GroupLeadership, LeaderInterval, PartitionLeadership, WindowLeadership, ELECTION_SAFETY,
    FAKE_LEADER_NO_RESET, MINORITY_NO_LEADER, QUORUM_VOTERS_DISTINCT, REPLAY_REJECTED,
    TERM_MONOTONICITY, VOTE_UNIQUENESS,
};
pub use scenario::{AdversarySpec, Partition, Scenario, ScenarioError, Timing};
pub use sim::run;
pub use trace::{
    render_trace, DropReason, LeaderInfo, PacketInfo, PacketKind, TimerAction, TimerKind,
    TraceEvent, TraceKind, Violation, TRACE_HEADER,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Node(#[from] NodeError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PacketStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// A stretch during which every honest node followed the same single leader.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Agreement {
    pub from_ms: u64,
    pub until_ms: Option<u64>,
    pub leader: NodeId,
    pub term: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub n: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub duration_ms: u64,
    pub timing: Timing,
    pub partitions: Vec<Partition>,
    pub adversaries: Vec<AdversarySpec>,
    pub leaders_per_term: BTreeMap<u64, BTreeSet<NodeId>>,
    pub elections_started: usize,
    pub violations: Vec<Violation>,
    /// Nodes running the honest state machine only.
    pub final_roles: BTreeMap<NodeId, RoleKind>,
    pub final_terms: BTreeMap<NodeId, u64>,
    pub known_leaders: BTreeMap<NodeId, Option<NodeId>>,
    pub agreements: Vec<Agreement>,
    pub packets: PacketStats,
}

impl RunReport {
    pub fn quorum(&self) -> usize {
        quorum_for(self.n)
    }

    pub fn adversary(&self, node: NodeId) -> Option<&AdversarySpec> {
        self.adversaries.iter().find(|a| a.node() == node)
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n as u16)
            .map(NodeId)
            .filter(|id| self.adversary(*id).is_none())
    }

    /// The leader every honest node follows at the end of the run, if any.
    pub fn final_leader(&self) -> Option<NodeId> {
        self.agreements
            .last()
            .filter(|a| a.until_ms.is_none())
            .map(|a| a.leader)
    }
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "happy-path-n3",
        include_str!("../../scenarios/happy-path-n3.toml"),
    ),
    (
        "happy-path-n5",
        include_str!("../../scenarios/happy-path-n5.toml"),
    ),
    (
        "partition-4-case4",
        include_str!("../../scenarios/partition-4-case4.toml"),
    ),
    (
        "fake-leader",
        include_str!("../../scenarios/fake-leader.toml"),
    ),
    (
        "double-voter",
        include_str!("../../scenarios/double-voter.toml"),
    ),
    (
        "proof-replay-within-ttl",
        include_str!("../../scenarios/proof-replay-within-ttl.toml"),
    ),
    (
        "proof-replay-after-ttl",
        include_str!("../../scenarios/proof-replay-after-ttl.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_toml(text).expect("bundled scenarios are valid"))
}
