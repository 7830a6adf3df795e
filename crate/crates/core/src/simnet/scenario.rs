use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{NodeId, MAX_NODES, MIN_NODES};
use crate::node::NodeConfig;
use crate::proofs::{ProofPolicy, Scheme};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

/// Per-node timing knobs. Every field is optional in a scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub election_timeout_ms: (u64, u64),
    pub heartbeat_interval_ms: u64,
    pub ttl_ms: u64,
    pub max_clock_skew_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        let config = NodeConfig::default();
        Timing {
            election_timeout_ms: config.election_timeout_ms,
            heartbeat_interval_ms: config.heartbeat_interval_ms,
            ttl_ms: config.proof_policy.ttl_ms,
            max_clock_skew_ms: config.proof_policy.max_clock_skew_ms,
        }
    }
}

impl Timing {
    pub fn node_config(&self, scheme: Scheme) -> NodeConfig {
        NodeConfig {
            election_timeout_ms: self.election_timeout_ms,
            heartbeat_interval_ms: self.heartbeat_interval_ms,
            proof_policy: self.policy(),
            scheme,
        }
    }

    pub fn policy(&self) -> ProofPolicy {
        ProofPolicy {
            ttl_ms: self.ttl_ms,
            max_clock_skew_ms: self.max_clock_skew_ms,
        }
    }
}

/// A network split active over `[start_ms, end_ms)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start_ms: u64,
    pub end_ms: u64,
    pub groups: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn active_at(&self, t: u64) -> bool {
        self.start_ms <= t && t < self.end_ms
    }

    pub fn group_of(&self, node: NodeId) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&node))
    }

    pub fn separates(&self, a: NodeId, b: NodeId) -> bool {
        self.group_of(a) != self.group_of(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Runs no honest logic; broadcasts heartbeats carrying a forged proof.
    FakeLeader { node: NodeId, term: u64 },
    /// Honest otherwise; rebroadcasts the first valid proof it observes,
    /// starting `replay_after_ms` after capturing it.
    ProofReplay { node: NodeId, replay_after_ms: u64 },
    /// Honest otherwise; sends every vote response twice.
    DoubleVoter { node: NodeId },
    /// Honest otherwise; every outbound packet is dropped.
    Silent { node: NodeId },
}

impl AdversarySpec {
    pub fn node(&self) -> NodeId {
        match *self {
            AdversarySpec::FakeLeader { node, .. }
            | AdversarySpec::ProofReplay { node, .. }
            | AdversarySpec::DoubleVoter { node }
            | AdversarySpec::Silent { node } => node,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::FakeLeader { .. } => "fake-leader",
            AdversarySpec::ProofReplay { .. } => "proof-replay",
            AdversarySpec::DoubleVoter { .. } => "double-voter",
            AdversarySpec::Silent { .. } => "silent",
        }
    }

    /// Whether the node still runs the honest state machine.
    pub fn runs_node(&self) -> bool {
        !matches!(self, AdversarySpec::FakeLeader { .. })
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::FakeLeader { node, term } => {
                write!(f, "{node}:fake-leader(term={term})")
            }
            AdversarySpec::ProofReplay {
                node,
                replay_after_ms,
            } => write!(f, "{node}:proof-replay(after={replay_after_ms})"),
            other => write!(f, "{}:{}", other.node(), other.name()),
        }
    }
}

fn default_key_seed() -> String {
    "mokka".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub duration_ms: u64,
    /// Inclusive bounds of the uniform per-packet latency.
    pub latency_ms: (u64, u64),
    pub drop_probability: f64,
    #[serde(default)]
    pub node: Timing,
    #[serde(default)]
    pub partitions: Vec<Partition>,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    /// Node whose first election timer fires at 1 ms.
    #[serde(default)]
    pub bootstrap_leader: Option<NodeId>,
    #[serde(default = "default_key_seed")]
    pub key_seed: String,
    /// Injects an impossible trace event so the checker has something to
    /// find. Used to test the harness itself.
    #[serde(default)]
    pub harness_self_test: bool,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Scenario {
            seed,
            ..self.clone()
        }
    }

    pub fn node_config(&self) -> NodeConfig {
        self.node.node_config(self.scheme)
    }

    pub fn adversary(&self, node: NodeId) -> Option<&AdversarySpec> {
        self.adversaries.iter().find(|a| a.node() == node)
    }

    pub fn quorum(&self) -> usize {
        crate::crypto::quorum_for(self.n)
    }

    pub fn partition_at(&self, t: u64) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.active_at(t))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(MIN_NODES..=MAX_NODES).contains(&self.n) {
            return invalid(format!(
                "n must be between {MIN_NODES} and {MAX_NODES}, got {}",
                self.n
            ));
        }
        if self.duration_ms == 0 {
            return invalid("duration_ms must be positive");
        }
        if self.latency_ms.0 > self.latency_ms.1 {
            return invalid("latency_ms lower bound exceeds upper bound");
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return invalid("drop_probability must be in [0, 1)");
        }
        self.node_config()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.node
            .policy()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let all: BTreeSet<NodeId> = (0..self.n as u16).map(NodeId).collect();
        let mut windows: Vec<&Partition> = self.partitions.iter().collect();
        windows.sort_by_key(|p| p.start_ms);
        for (i, p) in windows.iter().enumerate() {
            if p.start_ms >= p.end_ms {
                return invalid(format!(
                    "partition {}..{} must start before it ends",
                    p.start_ms, p.end_ms
                ));
            }
            if let Some(next) = windows.get(i + 1) {
                if next.start_ms < p.end_ms {
                    return invalid("partition windows overlap");
                }
            }
            let mut seen = BTreeSet::new();
            for id in p.groups.iter().flatten() {
                if !all.contains(id) {
                    return invalid(format!("partition names unknown node {id}"));
                }
                if !seen.insert(*id) {
                    return invalid(format!("node {id} is in two partition groups"));
                }
            }
            if seen != all {
                return invalid("partition groups must cover every node");
            }
        }

        let mut adversarial = BTreeSet::new();
        for a in &self.adversaries {
            if !all.contains(&a.node()) {
                return invalid(format!("adversary names unknown node {}", a.node()));
            }
            if !adversarial.insert(a.node()) {
                return invalid(format!("node {} has two adversary behaviors", a.node()));
            }
        }
        if let Some(leader) = self.bootstrap_leader {
            if !all.contains(&leader) {
                return invalid(format!("bootstrap_leader names unknown node {leader}"));
            }
            if adversarial.contains(&leader) {
                return invalid("bootstrap_leader must be honest");
            }
        }
        Ok(())
    }
}
