use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{AdversarySpec, Scenario};
use super::trace::{
    DropReason, LeaderInfo, PacketInfo, TimerAction, TimerKind, TraceEvent, TraceKind,
};
use super::{check_invariants, Agreement, PacketStats, RunReport, SimError};
use crate::crypto::{
    cluster_keys, random_scalar, ClusterKeyring, NodeId, ProjectivePoint, RecoverableSignature,
    SssShare,
};
use crate::node::{DiagnosticCode, Event, Node, NodeConfig, Output, Packet, PacketBody, RoleKind};
use crate::proofs::{
    encode_proof, proof_voters, validate_proof, ProofBody, Scheme, SssEntry, VoteProof,
};

#[allow(clippy::large_enum_variant)]
enum Pending {
    Deliver {
        packet: Packet,
        send_seq: u64,
    },
    Timer {
        node: usize,
        timer: TimerKind,
        generation: u64,
        armed_by: u64,
    },
}

struct Slot {
    id: NodeId,
    node: Option<Node>,
    adversary: Option<AdversarySpec>,
    generations: [u64; 3],
    captured: Option<VoteProof>,
    rng: ChaCha8Rng,
}

impl Slot {
    fn term(&self) -> u64 {
        match (&self.node, self.adversary) {
            (Some(node), _) => node.current_term(),
            (None, Some(AdversarySpec::FakeLeader { term, .. })) => term,
            _ => 0,
        }
    }

    fn honest(&self) -> bool {
        self.adversary.is_none()
    }
}

fn timer_index(timer: TimerKind) -> usize {
    match timer {
        TimerKind::Election => 0,
        TimerKind::Heartbeat => 1,
        TimerKind::Adversary => 2,
    }
}

struct Sim<'a> {
    scenario: &'a Scenario,
    config: NodeConfig,
    keyring: Arc<ClusterKeyring>,
    slots: Vec<Slot>,
    queue: BTreeMap<(u64, u64), Pending>,
    queue_seq: u64,
    now: u64,
    trace: Vec<TraceEvent>,
    net: ChaCha8Rng,
    agreement: Option<(NodeId, u64)>,
    agreements: Vec<Agreement>,
    stats: PacketStats,
}

/// Runs `scenario` to completion and checks the resulting trace.
pub fn run(scenario: &Scenario) -> Result<(Vec<TraceEvent>, RunReport), SimError> {
    scenario.validate()?;
    let (keypairs, keyring) = cluster_keys(&scenario.key_seed, scenario.n)?;
    let keyring = Arc::new(keyring);
    let config = scenario.node_config();

    let mut master = ChaCha8Rng::seed_from_u64(scenario.seed);
    let node_seeds: Vec<u64> = (0..scenario.n).map(|_| master.next_u64()).collect();
    let net = ChaCha8Rng::seed_from_u64(master.next_u64());

    let mut slots = Vec::with_capacity(scenario.n);
    let mut init_outputs = Vec::with_capacity(scenario.n);
    for (i, kp) in keypairs.into_iter().enumerate() {
        let id = NodeId(i as u16);
        let adversary = scenario.adversary(id).copied();
        let node = if adversary.is_none_or(|a| a.runs_node()) {
            let (node, out) = Node::init(id, kp, keyring.clone(), config, node_seeds[i])?;
            init_outputs.push(out);
            Some(node)
        } else {
            init_outputs.push(Vec::new());
            None
        };
        slots.push(Slot {
            id,
            node,
            adversary,
            generations: [0; 3],
            captured: None,
            rng: ChaCha8Rng::seed_from_u64(master.next_u64()),
        });
    }

    let mut sim = Sim {
        scenario,
        config,
        keyring,
        slots,
        queue: BTreeMap::new(),
        queue_seq: 0,
        now: 0,
        trace: Vec::new(),
        net,
        agreement: None,
        agreements: Vec::new(),
        stats: PacketStats::default(),
    };

    for (i, mut out) in init_outputs.into_iter().enumerate() {
        if scenario.bootstrap_leader == Some(NodeId(i as u16)) {
            for o in &mut out {
                if let Output::ArmElectionTimer(d) = o {
                    *d = 1;
                }
            }
        }
        sim.apply(i, out, None);
        if matches!(
            sim.slots[i].adversary,
            Some(AdversarySpec::FakeLeader { .. })
        ) {
            sim.arm(i, TimerKind::Adversary, config.heartbeat_interval_ms, None);
        }
    }

    while let Some(entry) = sim.queue.first_entry() {
        if entry.key().0 > scenario.duration_ms {
            break;
        }
        let ((t, _), pending) = entry.remove_entry();
        sim.now = t;
        match pending {
            Pending::Deliver { packet, send_seq } => sim.deliver(packet, send_seq),
            Pending::Timer {
                node,
                timer,
                generation,
                armed_by,
            } => sim.fire(node, timer, generation, armed_by),
        }
        sim.update_agreement();
    }
    sim.now = scenario.duration_ms;
    if let Some(last) = sim.agreements.last_mut() {
        if last.until_ms.is_none() && sim.agreement.is_none() {
            last.until_ms = Some(sim.now);
        }
    }
    if scenario.harness_self_test {
        sim.inject_conflicting_leaders();
    }
    Ok(sim.finish())
}

impl Sim<'_> {
    fn record(&mut self, node: Option<usize>, cause: Option<u64>, kind: TraceKind) -> u64 {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent {
            seq,
            time_ms: self.now,
            node: node.map(|i| self.slots[i].id),
            term: node.map_or(0, |i| self.slots[i].term()),
            cause,
            kind,
        });
        seq
    }

    fn schedule(&mut self, at: u64, pending: Pending) {
        self.queue.insert((at, self.queue_seq), pending);
        self.queue_seq += 1;
    }

    fn arm(&mut self, i: usize, timer: TimerKind, duration: u64, cause: Option<u64>) {
        let idx = timer_index(timer);
        self.slots[i].generations[idx] += 1;
        let generation = self.slots[i].generations[idx];
        let armed_by = self.record(
            Some(i),
            cause,
            TraceKind::Timer {
                timer,
                action: TimerAction::Arm(duration),
            },
        );
        self.schedule(
            self.now + duration,
            Pending::Timer {
                node: i,
                timer,
                generation,
                armed_by,
            },
        );
    }

    fn fire(&mut self, i: usize, timer: TimerKind, generation: u64, armed_by: u64) {
        if self.slots[i].generations[timer_index(timer)] != generation {
            return;
        }
        let seq = self.record(
            Some(i),
            Some(armed_by),
            TraceKind::Timer {
                timer,
                action: TimerAction::Fire,
            },
        );
        match timer {
            TimerKind::Election => self.step(i, Event::ElectionTimeout, seq),
            TimerKind::Heartbeat => self.step(i, Event::HeartbeatTick, seq),
            TimerKind::Adversary => self.adversary_tick(i, seq),
        }
    }

    fn step(&mut self, i: usize, event: Event, cause: u64) {
        let now = self.now;
        let Some(node) = self.slots[i].node.as_mut() else {
            return;
        };
        let out = node.step(event, now);
        self.apply(i, out, Some(cause));
    }

    fn apply(&mut self, i: usize, outputs: Vec<Output>, cause: Option<u64>) {
        for output in outputs {
            match output {
                Output::Send(packets) => {
                    for packet in packets {
                        let twice = matches!(packet.body, PacketBody::VoteResponse { .. })
                            && matches!(
                                self.slots[i].adversary,
                                Some(AdversarySpec::DoubleVoter { .. })
                            );
                        if twice {
                            self.transmit(i, packet.clone(), cause);
                        }
                        self.transmit(i, packet, cause);
                    }
                }
                Output::ArmElectionTimer(d) => self.arm(i, TimerKind::Election, d, cause),
                Output::ArmHeartbeatTimer(d) => self.arm(i, TimerKind::Heartbeat, d, cause),
                Output::RoleChanged { role, .. } => {
                    let leader = match (role, self.slots[i].node.as_ref()) {
                        (RoleKind::Leader, Some(node)) => {
                            node.leader_proof().map(|proof| LeaderInfo {
                                voters: proof_voters(proof, &self.keyring),
                                proof_ts: proof.timestamp_ms,
                                proof: encode_proof(proof),
                            })
                        }
                        _ => None,
                    };
                    self.record(Some(i), cause, TraceKind::RoleChange { role, leader });
                }
                Output::Diagnostic(d) => {
                    self.record(
                        Some(i),
                        cause,
                        TraceKind::Diagnostic {
                            code: d.code,
                            detail: d.detail,
                        },
                    );
                }
            }
        }
    }

    fn separated(&self, a: NodeId, b: NodeId) -> bool {
        self.scenario
            .partition_at(self.now)
            .is_some_and(|p| p.separates(a, b))
    }

    fn transmit(&mut self, i: usize, packet: Packet, cause: Option<u64>) {
        let info = PacketInfo::of(&packet);
        let seq = self.record(Some(i), cause, TraceKind::Send(info));
        self.stats.sent += 1;
        let reason = if matches!(self.slots[i].adversary, Some(AdversarySpec::Silent { .. })) {
            Some(DropReason::Silenced)
        } else if self.separated(packet.from, packet.to) {
            Some(DropReason::Partition)
        } else if self.scenario.drop_probability > 0.0
            && self.net.gen::<f64>() < self.scenario.drop_probability
        {
            Some(DropReason::Loss)
        } else {
            None
        };
        if let Some(reason) = reason {
            self.stats.dropped += 1;
            self.record(
                Some(i),
                Some(seq),
                TraceKind::Drop {
                    packet: info,
                    reason,
                },
            );
            return;
        }
        let (low, high) = self.scenario.latency_ms;
        let latency = self.net.gen_range(low..=high);
        self.schedule(
            self.now + latency,
            Pending::Deliver {
                packet,
                send_seq: seq,
            },
        );
    }

    fn deliver(&mut self, packet: Packet, send_seq: u64) {
        let to = packet.to.0 as usize;
        let info = PacketInfo::of(&packet);
        // a split that began while the packet was in flight still stops it
        if self.separated(packet.from, packet.to) {
            self.stats.dropped += 1;
            self.record(
                Some(to),
                Some(send_seq),
                TraceKind::Drop {
                    packet: info,
                    reason: DropReason::Partition,
                },
            );
            return;
        }
        self.stats.delivered += 1;
        let seq = self.record(Some(to), Some(send_seq), TraceKind::Deliver(info));
        if let (
            Some(AdversarySpec::ProofReplay {
                replay_after_ms, ..
            }),
            None,
        ) = (self.slots[to].adversary, &self.slots[to].captured)
        {
            if let PacketBody::Heartbeat { proof, .. } = &packet.body {
                let policy = self.config.proof_policy;
                if validate_proof(proof, &self.keyring, &policy, self.now).is_ok() {
                    self.slots[to].captured = Some(proof.clone());
                    self.arm(to, TimerKind::Adversary, replay_after_ms, Some(seq));
                }
            }
        }
        self.step(to, Event::PacketArrived(packet), seq);
    }

    fn adversary_tick(&mut self, i: usize, cause: u64) {
        let from = self.slots[i].id;
        let (term, leader, proof) = match self.slots[i].adversary {
            Some(AdversarySpec::FakeLeader { term, .. }) => {
                let proof = self.forge_proof(i, term);
                (term, from, proof)
            }
            Some(AdversarySpec::ProofReplay { .. }) => match &self.slots[i].captured {
                Some(proof) => (proof.term, proof.candidate, proof.clone()),
                None => return,
            },
            _ => return,
        };
        let peers: Vec<NodeId> = self.keyring.node_ids().filter(|id| *id != from).collect();
        for to in peers {
            let packet = Packet {
                from,
                to,
                body: PacketBody::Heartbeat {
                    term,
                    leader,
                    proof: proof.clone(),
                },
            };
            self.transmit(i, packet, Some(cause));
        }
        self.arm(
            i,
            TimerKind::Adversary,
            self.config.heartbeat_interval_ms,
            Some(cause),
        );
    }

    /// A structurally valid proof naming `slot` as leader, with random
    /// signature material.
    fn forge_proof(&mut self, i: usize, term: u64) -> VoteProof {
        let id = self.slots[i].id;
        let now = self.now;
        let keyring = self.keyring.clone();
        let rng = &mut self.slots[i].rng;
        let body = match self.config.scheme {
            Scheme::Schnorr => ProofBody::Schnorr {
                combo: keyring
                    .combos_containing(&[id])
                    .next()
                    .expect("every node is in some combo"),
                nonce_point: ProjectivePoint::GENERATOR * random_scalar(rng),
                s_value: random_scalar(rng),
            },
            Scheme::Sss => {
                let mut salt = [0u8; 32];
                rng.fill_bytes(&mut salt);
                let entries = (1..=keyring.quorum_size() as u16)
                    .map(|index| SssEntry {
                        share: SssShare {
                            index,
                            value: random_scalar(rng),
                        },
                        signature: RecoverableSignature {
                            r: random_scalar(rng).to_bytes().into(),
                            s: random_scalar(rng).to_bytes().into(),
                            recovery_hint: (rng.next_u32() % 2) as u8,
                        },
                    })
                    .collect();
                ProofBody::Sss { salt, entries }
            }
        };
        VoteProof {
            term,
            timestamp_ms: now,
            candidate: id,
            body,
        }
    }

    fn update_agreement(&mut self) {
        let honest: Vec<&Node> = self
            .slots
            .iter()
            .filter(|s| s.honest())
            .filter_map(|s| s.node.as_ref())
            .collect();
        let mut leaders = honest.iter().filter(|n| n.role_kind() == RoleKind::Leader);
        let state = match (leaders.next(), leaders.next()) {
            (Some(leader), None) => {
                let (id, term) = (leader.id(), leader.current_term());
                honest
                    .iter()
                    .all(|n| {
                        n.id() == id || (n.known_leader() == Some(id) && n.current_term() == term)
                    })
                    .then_some((id, term))
            }
            _ => None,
        };
        if state == self.agreement {
            return;
        }
        if let Some(last) = self.agreements.last_mut() {
            if last.until_ms.is_none() {
                last.until_ms = Some(self.now);
            }
        }
        if let Some((leader, term)) = state {
            self.agreements.push(Agreement {
                from_ms: self.now,
                until_ms: None,
                leader,
                term,
            });
        }
        self.agreement = state;
    }

    /// Appends two leaders for one term, which no honest run can produce.
    fn inject_conflicting_leaders(&mut self) {
        let term = self.trace.iter().map(|e| e.term).max().unwrap_or(0) + 1;
        self.record(
            None,
            None,
            TraceKind::Diagnostic {
                code: DiagnosticCode::Internal,
                detail: format!("harness self-test: injecting two leaders for term {term}"),
            },
        );
        for i in 0..2 {
            let seq = self.record(
                Some(i),
                None,
                TraceKind::RoleChange {
                    role: RoleKind::Leader,
                    leader: None,
                },
            );
            self.trace[seq as usize].term = term;
        }
    }

    fn finish(self) -> (Vec<TraceEvent>, RunReport) {
        let mut report = RunReport {
            n: self.scenario.n,
            scheme: self.scenario.scheme,
            seed: self.scenario.seed,
            duration_ms: self.scenario.duration_ms,
            timing: self.scenario.node,
            partitions: self.scenario.partitions.clone(),
            adversaries: self.scenario.adversaries.clone(),
            leaders_per_term: BTreeMap::new(),
            elections_started: 0,
            violations: Vec::new(),
            final_roles: BTreeMap::new(),
            final_terms: BTreeMap::new(),
            known_leaders: BTreeMap::new(),
            agreements: self.agreements,
            packets: self.stats,
        };
        for event in &self.trace {
            if let (TraceKind::RoleChange { role, .. }, Some(node)) = (&event.kind, event.node) {
                match role {
                    RoleKind::Leader => {
                        report
                            .leaders_per_term
                            .entry(event.term)
                            .or_default()
                            .insert(node);
                    }
                    RoleKind::Candidate => report.elections_started += 1,
                    RoleKind::Follower => {}
                }
            }
        }
        for slot in &self.slots {
            if let Some(node) = &slot.node {
                report.final_roles.insert(slot.id, node.role_kind());
                report.final_terms.insert(slot.id, node.current_term());
                report.known_leaders.insert(slot.id, node.known_leader());
            }
        }
        let mut trace = self.trace;
        report.violations = check_invariants(&trace, &report);
        let end = report.duration_ms;
        for v in &report.violations {
            let seq = trace.len() as u64;
            trace.push(TraceEvent {
                seq,
                time_ms: end,
                node: v.node,
                term: 0,
                cause: None,
                kind: TraceKind::Violation(v.clone()),
            });
        }
        (trace, report)
    }
}
