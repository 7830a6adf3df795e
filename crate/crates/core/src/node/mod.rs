//! The consensus state machine for one node.
//!
//! [`Node::step`] consumes an [`Event`] at a virtual time and returns the
//! [`Output`]s the host must act on: packets to send, timers to (re)arm, role
//! changes and diagnostics. The node performs no I/O and reads no clock; all
//! randomness comes from a generator seeded at [`Node::init`].
//!
//! Terms and voting follow RAFT without a log. A candidate collects signed
//! grants until it holds a quorum, assembles a proof-of-voting, and attaches
//! that proof to every heartbeat. Followers only reset their election timer
//! for heartbeats whose proof validates, and a leader steps down once its own
//! proof expires.

mod types;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{ClusterKeyring, KeyPair, NodeId};
use crate::proofs::{
    build_proof, grant_vote, make_vote_payloads, proof_hash, validate_proof, verify_grant,
    ProofPolicy, Scheme, ValidationCache, ValidationResult, VoteGrant, VotePayload, VoteProof,
    VoteRound,
};

pub use types::{Diagnostic, DiagnosticCode, Event, Output, Packet, PacketBody, RoleKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Inclusive bounds of the randomized election timeout.
    pub election_timeout_ms: (u64, u64),
    pub heartbeat_interval_ms: u64,
    pub proof_policy: ProofPolicy,
    pub scheme: Scheme,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            election_timeout_ms: (150, 300),
            heartbeat_interval_ms: 50,
            proof_policy: ProofPolicy::default(),
            scheme: Scheme::Schnorr,
        }
    }
}

impl NodeConfig {
    pub fn validate(&self) -> Result<(), NodeError> {
        let (low, high) = self.election_timeout_ms;
        if low >= high {
            return Err(NodeError::InvalidConfig(
                "election timeout low bound must be below the high bound",
            ));
        }
        if self.heartbeat_interval_ms == 0 || self.heartbeat_interval_ms >= low {
            return Err(NodeError::InvalidConfig(
                "heartbeat interval must be positive and below the election timeout",
            ));
        }
        if self.heartbeat_interval_ms >= self.proof_policy.ttl_ms {
            return Err(NodeError::InvalidConfig(
                "heartbeat interval must be below the proof ttl",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NodeError {
    #[error("node {0} is not in the keyring")]
    UnknownNode(NodeId),
    #[error("key pair does not match the keyring entry for node {0}")]
    KeyMismatch(NodeId),
    #[error("invalid node config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Clone, Debug)]
pub struct CandidateState {
    pub round: VoteRound,
    pub own_grant: VoteGrant,
    /// Verified grants from other nodes, in arrival order.
    pub grants: Vec<VoteGrant>,
    pub started_ms: u64,
}

#[derive(Clone, Debug)]
pub enum Role {
    Follower,
    Candidate(CandidateState),
    Leader { proof: VoteProof },
}

impl Role {
    pub fn kind(&self) -> RoleKind {
        match self {
            Role::Follower => RoleKind::Follower,
            Role::Candidate(_) => RoleKind::Candidate,
            Role::Leader { .. } => RoleKind::Leader,
        }
    }
}

/// Majority threshold for the node's cluster.
pub fn quorum_size(node: &Node) -> usize {
    node.keyring.quorum_size()
}

#[derive(Clone, Debug)]
pub struct Node {
    id: NodeId,
    current_term: u64,
    voted_for: Option<(u64, NodeId)>,
    role: Role,
    known_leader: Option<(NodeId, [u8; 32])>,
    keyring: Arc<ClusterKeyring>,
    keypair: KeyPair,
    config: NodeConfig,
    cache: ValidationCache,
    rng: ChaCha8Rng,
    last_now: u64,
}

impl Node {
    /// Creates a follower at term 0 and arms its first election timer.
    pub fn init(
        id: NodeId,
        keypair: KeyPair,
        keyring: Arc<ClusterKeyring>,
        config: NodeConfig,
        seed: u64,
    ) -> Result<(Node, Vec<Output>), NodeError> {
        config.validate()?;
        let registered = keyring.public_key(id).ok_or(NodeError::UnknownNode(id))?;
        if registered != keypair.public() {
            return Err(NodeError::KeyMismatch(id));
        }
        let mut node = Node {
            id,
            current_term: 0,
            voted_for: None,
            role: Role::Follower,
            known_leader: None,
            keyring,
            keypair,
            config,
            cache: ValidationCache::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_now: 0,
        };
        let timeout = node.election_timeout();
        Ok((node, vec![Output::ArmElectionTimer(timeout)]))
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn current_term(&self) -> u64 {
        self.current_term
    }

    pub fn voted_for(&self) -> Option<(u64, NodeId)> {
        self.voted_for
    }

    pub fn role(&self) -> &Role {
        &self.role
    }

    pub fn role_kind(&self) -> RoleKind {
        self.role.kind()
    }

    pub fn known_leader(&self) -> Option<NodeId> {
        self.known_leader.map(|(id, _)| id)
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn keyring(&self) -> &Arc<ClusterKeyring> {
        &self.keyring
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn leader_proof(&self) -> Option<&VoteProof> {
        match &self.role {
            Role::Leader { proof } => Some(proof),
            _ => None,
        }
    }

    fn peers(&self) -> Vec<NodeId> {
        self.keyring
            .node_ids()
            .filter(|id| *id != self.id)
            .collect()
    }

    fn election_timeout(&mut self) -> u64 {
        let (low, high) = self.config.election_timeout_ms;
        self.rng.gen_range(low..=high)
    }

    /// Advances the node by one event observed at `now_ms`.
    pub fn step(&mut self, event: Event, now_ms: u64) -> Vec<Output> {
        let mut out = Vec::new();
        let now = if now_ms < self.last_now {
            out.push(Output::diagnostic(
                DiagnosticCode::ClockRegression,
                format!("now={now_ms} last={}", self.last_now),
            ));
            self.last_now
        } else {
            now_ms
        };
        self.last_now = now;
        match event {
            Event::Clock(_) => {}
            Event::ElectionTimeout => self.on_election_timeout(now, &mut out),
            Event::HeartbeatTick => self.on_heartbeat_tick(now, &mut out),
            Event::PacketArrived(packet) => {
                if packet.to != self.id {
                    out.push(Output::diagnostic(
                        DiagnosticCode::Misaddressed,
                        format!("to={}", packet.to),
                    ));
                    return out;
                }
                match packet.body {
                    PacketBody::VoteRequest { payload } => {
                        self.on_vote_request(packet.from, payload, now, &mut out)
                    }
                    PacketBody::VoteResponse { grant } => {
                        self.on_vote_response(packet.from, grant, now, &mut out)
                    }
                    PacketBody::Heartbeat {
                        term,
                        leader,
                        proof,
                    } => self.on_heartbeat(term, leader, proof, now, &mut out),
                }
            }
        }
        out
    }

    fn set_role(&mut self, role: Role, out: &mut Vec<Output>) {
        self.role = role;
        out.push(Output::RoleChanged {
            role: self.role.kind(),
            term: self.current_term,
        });
    }

    fn step_down(&mut self, out: &mut Vec<Output>) {
        match self.role {
            Role::Follower => {}
            Role::Candidate(_) => self.set_role(Role::Follower, out),
            Role::Leader { .. } => {
                self.set_role(Role::Follower, out);
                // a leader lets its election timer lapse
                let timeout = self.election_timeout();
                out.push(Output::ArmElectionTimer(timeout));
            }
        }
    }

    fn adopt_term(&mut self, term: u64, out: &mut Vec<Output>) {
        if term > self.current_term {
            self.current_term = term;
            self.known_leader = None;
            self.step_down(out);
        }
    }

    fn on_election_timeout(&mut self, now: u64, out: &mut Vec<Output>) {
        if matches!(self.role, Role::Leader { .. }) {
            return;
        }
        self.start_election(now, out);
    }

    fn start_election(&mut self, now: u64, out: &mut Vec<Output>) {
        self.current_term += 1;
        self.voted_for = Some((self.current_term, self.id));
        self.known_leader = None;
        let round = match make_vote_payloads(
            self.id,
            self.current_term,
            now,
            &self.keyring,
            self.config.scheme,
            &mut self.rng,
        ) {
            Ok(round) => round,
            Err(e) => {
                out.push(Output::diagnostic(DiagnosticCode::Internal, e.to_string()));
                return;
            }
        };
        let own_payload = round.payload_for(self.id).expect("round covers every node");
        let own_grant = match grant_vote(&self.keypair, own_payload, &self.keyring) {
            Ok(grant) => grant,
            Err(e) => {
                out.push(Output::diagnostic(DiagnosticCode::Internal, e.to_string()));
                return;
            }
        };
        let requests = self
            .peers()
            .into_iter()
            .filter_map(|peer| {
                round.payload_for(peer).map(|payload| Packet {
                    from: self.id,
                    to: peer,
                    body: PacketBody::VoteRequest {
                        payload: payload.clone(),
                    },
                })
            })
            .collect();
        self.set_role(
            Role::Candidate(CandidateState {
                round,
                own_grant,
                grants: Vec::new(),
                started_ms: now,
            }),
            out,
        );
        out.push(Output::Send(requests));
        let timeout = self.election_timeout();
        out.push(Output::ArmElectionTimer(timeout));
    }

    fn on_heartbeat_tick(&mut self, now: u64, out: &mut Vec<Output>) {
        let Role::Leader { proof } = &self.role else {
            return;
        };
        if now > proof.expires_at(&self.config.proof_policy) {
            self.known_leader = None;
            out.push(Output::diagnostic(
                DiagnosticCode::ProofExpired,
                format!("term={} proof_ts={}", self.current_term, proof.timestamp_ms),
            ));
            self.step_down(out);
            return;
        }
        self.broadcast_heartbeat(out);
    }

    fn broadcast_heartbeat(&self, out: &mut Vec<Output>) {
        let Role::Leader { proof } = &self.role else {
            return;
        };
        let packets = self
            .peers()
            .into_iter()
            .map(|peer| Packet {
                from: self.id,
                to: peer,
                body: PacketBody::Heartbeat {
                    term: self.current_term,
                    leader: self.id,
                    proof: proof.clone(),
                },
            })
            .collect();
        out.push(Output::Send(packets));
        out.push(Output::ArmHeartbeatTimer(self.config.heartbeat_interval_ms));
    }

    fn on_vote_request(
        &mut self,
        from: NodeId,
        payload: VotePayload,
        now: u64,
        out: &mut Vec<Output>,
    ) {
        if payload.candidate != from || self.keyring.public_key(from).is_none() {
            out.push(Output::diagnostic(
                DiagnosticCode::SenderMismatch,
                format!("from={from} candidate={}", payload.candidate),
            ));
            return;
        }
        if payload.term < self.current_term {
            out.push(Output::diagnostic(
                DiagnosticCode::StaleTerm,
                format!(
                    "vote-request term={} current={}",
                    payload.term, self.current_term
                ),
            ));
            return;
        }
        self.adopt_term(payload.term, out);
        if let Some((term, candidate)) = self.voted_for {
            if term == payload.term {
                out.push(Output::diagnostic(
                    DiagnosticCode::VoteDenied,
                    format!("term={term} already voted for {candidate}"),
                ));
                return;
            }
        }
        let skew = now.abs_diff(payload.timestamp_ms);
        if skew > self.config.proof_policy.max_clock_skew_ms {
            out.push(Output::diagnostic(
                DiagnosticCode::VoteDenied,
                format!("term={} timestamp skew {skew}ms", payload.term),
            ));
            return;
        }
        let grant = match grant_vote(&self.keypair, &payload, &self.keyring) {
            Ok(grant) => grant,
            Err(e) => {
                out.push(Output::diagnostic(
                    DiagnosticCode::VoteDenied,
                    format!("term={} {e}", payload.term),
                ));
                return;
            }
        };
        self.voted_for = Some((payload.term, from));
        out.push(Output::Send(vec![Packet {
            from: self.id,
            to: from,
            body: PacketBody::VoteResponse { grant },
        }]));
        let timeout = self.election_timeout();
        out.push(Output::ArmElectionTimer(timeout));
    }

    fn on_vote_response(
        &mut self,
        from: NodeId,
        grant: VoteGrant,
        now: u64,
        out: &mut Vec<Output>,
    ) {
        let current_term = self.current_term;
        let Role::Candidate(candidate) = &mut self.role else {
            out.push(Output::diagnostic(
                DiagnosticCode::StaleResponse,
                format!("from={from} term={} not a candidate", grant.term),
            ));
            return;
        };
        if grant.term != current_term {
            out.push(Output::diagnostic(
                DiagnosticCode::StaleResponse,
                format!("from={from} term={} current={current_term}", grant.term),
            ));
            return;
        }
        if grant.voter != from || grant.voter == self.id {
            out.push(Output::diagnostic(
                DiagnosticCode::SenderMismatch,
                format!("from={from} voter={}", grant.voter),
            ));
            return;
        }
        if candidate.grants.iter().any(|g| g.voter == grant.voter) {
            out.push(Output::diagnostic(
                DiagnosticCode::DuplicateGrant { voter: grant.voter },
                format!("term={current_term}"),
            ));
            return;
        }
        if let Err(e) = verify_grant(&grant, &candidate.round, &self.keyring) {
            out.push(Output::diagnostic(DiagnosticCode::BadGrant, e.to_string()));
            return;
        }
        candidate.grants.push(grant);
        if candidate.grants.len() + 1 < self.keyring.quorum_size() {
            return;
        }
        let built = build_proof(
            &self.keypair,
            &candidate.round,
            &candidate.own_grant,
            &candidate.grants,
            &self.keyring,
        );
        let proof = match built {
            Ok(proof) => proof,
            Err(e) => {
                out.push(Output::diagnostic(DiagnosticCode::BadGrant, e.to_string()));
                return;
            }
        };
        let check = validate_proof(&proof, &self.keyring, &self.config.proof_policy, now);
        if !check.is_ok() {
            out.push(Output::diagnostic(
                DiagnosticCode::ProofRejected(check),
                "own proof failed validation".to_string(),
            ));
            return;
        }
        self.known_leader = Some((self.id, proof_hash(&proof)));
        self.set_role(Role::Leader { proof }, out);
        self.broadcast_heartbeat(out);
    }

    fn on_heartbeat(
        &mut self,
        term: u64,
        leader: NodeId,
        proof: VoteProof,
        now: u64,
        out: &mut Vec<Output>,
    ) {
        // The sender is not authenticated; the proof is what vouches for the
        // leader, so the header must agree with it.
        let result = if proof.term != term || proof.candidate != leader {
            ValidationResult::BadSignature
        } else {
            self.cache
                .validate(&proof, &self.keyring, &self.config.proof_policy, now)
        };
        if !result.is_ok() {
            out.push(Output::diagnostic(
                DiagnosticCode::ProofRejected(result),
                format!(
                    "leader={leader} term={term} proof_ts={}",
                    proof.timestamp_ms
                ),
            ));
            return;
        }
        if term < self.current_term {
            out.push(Output::diagnostic(
                DiagnosticCode::StaleTerm,
                format!("heartbeat term={term} current={}", self.current_term),
            ));
            return;
        }
        if leader == self.id {
            return;
        }
        self.adopt_term(term, out);
        self.step_down(out);
        let hash = proof_hash(&proof);
        if self.known_leader.map(|(id, _)| id) != Some(leader) {
            out.push(Output::diagnostic(
                DiagnosticCode::LeaderAccepted { leader, term },
                format!("proof_ts={}", proof.timestamp_ms),
            ));
        }
        self.known_leader = Some((leader, hash));
        let timeout = self.election_timeout();
        out.push(Output::ArmElectionTimer(timeout));
    }
}

#[cfg(test)]
mod tests;
