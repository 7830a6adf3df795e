use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::crypto::{cluster_keys, Scalar};
use crate::proofs::{GrantBody, ProofBody};

struct Cluster {
    nodes: Vec<Node>,
}

impl Cluster {
    fn new(n: usize, scheme: Scheme) -> Self {
        let (kps, kr) = cluster_keys("node", n).unwrap();
        let kr = Arc::new(kr);
        let config = NodeConfig {
            scheme,
            ..NodeConfig::default()
        };
        let nodes = kps
            .into_iter()
            .enumerate()
            .map(|(i, kp)| {
                Node::init(NodeId(i as u16), kp, kr.clone(), config, i as u64)
                    .unwrap()
                    .0
            })
            .collect();
        Cluster { nodes }
    }

    fn deliver(&mut self, packet: Packet, now: u64) -> Vec<Output> {
        let to = packet.to.0 as usize;
        self.nodes[to].step(Event::PacketArrived(packet), now)
    }

    /// Makes `leader` win an election at `now` with votes from every peer.
    fn elect(&mut self, leader: usize, now: u64) -> Vec<Packet> {
        let out = self.nodes[leader].step(Event::ElectionTimeout, now);
        let mut heartbeats = Vec::new();
        for req in sent(&out) {
            let resp = self.deliver(req, now + 1);
            for grant in sent(&resp) {
                let out = self.deliver(grant, now + 2);
                heartbeats.extend(sent(&out));
            }
        }
        heartbeats
    }
}

fn sent(out: &[Output]) -> Vec<Packet> {
    out.iter()
        .filter_map(|o| match o {
            Output::Send(p) => Some(p.clone()),
            _ => None,
        })
        .flatten()
        .collect()
}

fn diagnostics(out: &[Output]) -> Vec<DiagnosticCode> {
    out.iter()
        .filter_map(|o| match o {
            Output::Diagnostic(d) => Some(d.code),
            _ => None,
        })
        .collect()
}

fn arms_election(out: &[Output]) -> bool {
    out.iter().any(|o| matches!(o, Output::ArmElectionTimer(_)))
}

#[test]
fn init_arms_a_timer_in_range() {
    let (kps, kr) = cluster_keys("node", 3).unwrap();
    let kr = Arc::new(kr);
    let (node, out) = Node::init(
        NodeId(0),
        kps[0].clone(),
        kr.clone(),
        NodeConfig::default(),
        1,
    )
    .unwrap();
    assert_eq!(node.role_kind(), RoleKind::Follower);
    assert_eq!(node.current_term(), 0);
    assert_eq!(node.voted_for(), None);
    assert_eq!(out.len(), 1);
    let Output::ArmElectionTimer(a) = out[0] else {
        panic!("{out:?}")
    };
    assert!((150..=300).contains(&a));

    let (_, out) = Node::init(
        NodeId(0),
        kps[0].clone(),
        kr.clone(),
        NodeConfig::default(),
        2,
    )
    .unwrap();
    let Output::ArmElectionTimer(b) = out[0] else {
        panic!()
    };
    assert_ne!(a, b, "seeds 1 and 2 draw different timeouts");

    assert_eq!(
        Node::init(
            NodeId(9),
            kps[0].clone(),
            kr.clone(),
            NodeConfig::default(),
            1
        )
        .unwrap_err(),
        NodeError::UnknownNode(NodeId(9))
    );
    assert_eq!(
        Node::init(
            NodeId(1),
            kps[0].clone(),
            kr.clone(),
            NodeConfig::default(),
            1
        )
        .unwrap_err(),
        NodeError::KeyMismatch(NodeId(1))
    );
    let bad = NodeConfig {
        heartbeat_interval_ms: 200,
        ..NodeConfig::default()
    };
    assert!(Node::init(NodeId(0), kps[0].clone(), kr, bad, 1).is_err());
}

#[test]
fn config_invariants() {
    assert!(NodeConfig::default().validate().is_ok());
    let inverted = NodeConfig {
        election_timeout_ms: (300, 150),
        ..NodeConfig::default()
    };
    assert!(inverted.validate().is_err());
    let slow = NodeConfig {
        heartbeat_interval_ms: 100,
        election_timeout_ms: (150, 300),
        proof_policy: ProofPolicy {
            ttl_ms: 90,
            max_clock_skew_ms: 0,
        },
        scheme: Scheme::Schnorr,
    };
    assert!(slow.validate().is_err());
}

#[test]
fn quorum_sizes() {
    for (n, q) in [(3, 2), (4, 3), (5, 3)] {
        let c = Cluster::new(n, Scheme::Schnorr);
        assert_eq!(quorum_size(&c.nodes[0]), q);
    }
}

#[test]
fn election_timeout_starts_a_round() {
    let mut c = Cluster::new(5, Scheme::Schnorr);
    let out = c.nodes[2].step(Event::ElectionTimeout, 1000);
    let node = &c.nodes[2];
    assert_eq!(node.role_kind(), RoleKind::Candidate);
    assert_eq!(node.current_term(), 1);
    assert_eq!(node.voted_for(), Some((1, NodeId(2))));
    let reqs = sent(&out);
    assert_eq!(reqs.len(), 4);
    assert!(reqs.iter().all(|p| matches!(
        &p.body,
        PacketBody::VoteRequest { payload } if payload.term == 1 && payload.timestamp_ms == 1000
    )));
    assert!(out.contains(&Output::RoleChanged {
        role: RoleKind::Candidate,
        term: 1
    }));
    assert!(arms_election(&out));
}

#[test]
fn three_node_happy_path() {
    for scheme in [Scheme::Schnorr, Scheme::Sss] {
        let mut c = Cluster::new(3, scheme);
        let out = c.nodes[0].step(Event::ElectionTimeout, 100);
        let reqs = sent(&out);
        let resp = c.deliver(reqs[0].clone(), 105);
        assert!(arms_election(&resp));
        assert_eq!(c.nodes[1].voted_for(), Some((1, NodeId(0))));
        let grant = sent(&resp).remove(0);
        let out = c.deliver(grant, 110);
        assert_eq!(c.nodes[0].role_kind(), RoleKind::Leader);
        assert!(out.contains(&Output::ArmHeartbeatTimer(50)));
        let beats = sent(&out);
        assert_eq!(beats.len(), 2);
        let proof = c.nodes[0].leader_proof().unwrap().clone();
        assert_eq!(
            validate_proof(&proof, c.nodes[0].keyring(), &ProofPolicy::default(), 110),
            ValidationResult::Ok
        );

        // node 2 never voted but still follows the proven leader
        let to_two = beats.into_iter().find(|p| p.to == NodeId(2)).unwrap();
        let out = c.deliver(to_two, 115);
        assert!(arms_election(&out));
        assert_eq!(c.nodes[2].known_leader(), Some(NodeId(0)));
        assert_eq!(c.nodes[2].current_term(), 1);
        assert!(diagnostics(&out).contains(&DiagnosticCode::LeaderAccepted {
            leader: NodeId(0),
            term: 1
        }));

        // the late request to node 2 belongs to a finished round but is still
        // a fresh term-1 ballot from node 0 to a node that has not voted
        let late = c.deliver(reqs[1].clone(), 120);
        assert_eq!(sent(&late).len(), 1);
        let out = c.deliver(sent(&late).remove(0), 121);
        assert_eq!(
            diagnostics(&out),
            vec![DiagnosticCode::StaleResponse],
            "{scheme}"
        );
    }
}

#[test]
fn stale_vote_requests_are_ignored() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    let old = sent(&c.nodes[1].step(Event::ElectionTimeout, 0));
    c.nodes[0].step(Event::ElectionTimeout, 10);
    c.nodes[0].step(Event::ElectionTimeout, 20);
    assert_eq!(c.nodes[0].current_term(), 2);
    let out = c.deliver(old[0].clone(), 30);
    assert!(sent(&out).is_empty());
    assert_eq!(diagnostics(&out), vec![DiagnosticCode::StaleTerm]);
}

#[test]
fn one_vote_per_term() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    let from_one = sent(&c.nodes[1].step(Event::ElectionTimeout, 0));
    let from_two = sent(&c.nodes[2].step(Event::ElectionTimeout, 0));
    let to_zero_a = from_one.into_iter().find(|p| p.to == NodeId(0)).unwrap();
    let to_zero_b = from_two.into_iter().find(|p| p.to == NodeId(0)).unwrap();
    let first = c.deliver(to_zero_a.clone(), 5);
    assert_eq!(sent(&first).len(), 1);
    let second = c.deliver(to_zero_b, 6);
    assert!(sent(&second).is_empty());
    assert_eq!(diagnostics(&second), vec![DiagnosticCode::VoteDenied]);
    // a retransmission from the same candidate is not answered twice either
    let again = c.deliver(to_zero_a, 7);
    assert!(sent(&again).is_empty());
    assert_eq!(c.nodes[0].voted_for(), Some((1, NodeId(1))));
}

#[test]
fn higher_term_request_deposes_a_leader() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    c.elect(0, 0);
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Leader);
    c.nodes[1].step(Event::ElectionTimeout, 50);
    let reqs = sent(&c.nodes[1].step(Event::ElectionTimeout, 60));
    let to_zero = reqs.into_iter().find(|p| p.to == NodeId(0)).unwrap();
    let out = c.deliver(to_zero, 70);
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Follower);
    assert_eq!(c.nodes[0].current_term(), 3);
    assert!(out.contains(&Output::RoleChanged {
        role: RoleKind::Follower,
        term: 3
    }));
    assert_eq!(sent(&out).len(), 1);
}

#[test]
fn stale_timestamp_is_not_granted() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    let reqs = sent(&c.nodes[1].step(Event::ElectionTimeout, 1000));
    let out = c.deliver(reqs[0].clone(), 1000 + 501);
    assert!(sent(&out).is_empty());
    assert_eq!(diagnostics(&out), vec![DiagnosticCode::VoteDenied]);
    // the term is still adopted
    assert_eq!(c.nodes[reqs[0].to.0 as usize].current_term(), 1);
}

#[test]
fn duplicate_and_forged_grants() {
    let mut c = Cluster::new(5, Scheme::Schnorr);
    let reqs = sent(&c.nodes[0].step(Event::ElectionTimeout, 0));
    let grant_one = sent(&c.deliver(reqs[0].clone(), 1)).remove(0);
    assert!(diagnostics(&c.deliver(grant_one.clone(), 2)).is_empty());
    let dup = c.deliver(grant_one, 3);
    assert_eq!(
        diagnostics(&dup),
        vec![DiagnosticCode::DuplicateGrant { voter: NodeId(1) }]
    );
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Candidate);

    let mut forged = sent(&c.deliver(reqs[1].clone(), 4)).remove(0);
    if let PacketBody::VoteResponse { grant } = &mut forged.body {
        if let GrantBody::Schnorr { partials } = &mut grant.body {
            partials[0].s_value += Scalar::ONE;
        }
    }
    let out = c.deliver(forged, 5);
    assert_eq!(diagnostics(&out), vec![DiagnosticCode::BadGrant]);
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Candidate);

    let honest = sent(&c.deliver(reqs[2].clone(), 6)).remove(0);
    c.deliver(honest, 7);
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Leader);
}

#[test]
fn invalid_heartbeats_do_not_reset_timers() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    let beats = c.elect(0, 0);
    let good = beats.into_iter().find(|p| p.to == NodeId(2)).unwrap();

    let mut forged = good.clone();
    if let PacketBody::Heartbeat { proof, .. } = &mut forged.body {
        if let ProofBody::Schnorr { s_value, .. } = &mut proof.body {
            *s_value += Scalar::ONE;
        }
    }
    let out = c.deliver(forged, 10);
    assert!(!arms_election(&out));
    assert_eq!(
        diagnostics(&out),
        vec![DiagnosticCode::ProofRejected(
            ValidationResult::BadSignature
        )]
    );
    assert_eq!(c.nodes[2].known_leader(), None);

    // header claiming a different leader than the proof
    let mut relabelled = good.clone();
    if let PacketBody::Heartbeat { leader, .. } = &mut relabelled.body {
        *leader = NodeId(1);
    }
    assert!(!arms_election(&c.deliver(relabelled, 11)));

    let ttl = ProofPolicy::default().ttl_ms;
    assert!(arms_election(&c.deliver(good.clone(), ttl)));
    let out = c.deliver(good, ttl + 1);
    assert!(!arms_election(&out));
    assert_eq!(
        diagnostics(&out),
        vec![DiagnosticCode::ProofRejected(ValidationResult::Expired)]
    );
}

#[test]
fn valid_heartbeat_deposes_competing_candidate() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    let beats = c.elect(0, 0);
    let to_two = beats.into_iter().find(|p| p.to == NodeId(2)).unwrap();
    // node 2 timed out at the same term, before hearing the result
    c.nodes[2].current_term = 0;
    c.nodes[2].voted_for = None;
    c.nodes[2].step(Event::ElectionTimeout, 3);
    assert_eq!(c.nodes[2].role_kind(), RoleKind::Candidate);
    assert_eq!(c.nodes[2].current_term(), 1);
    let out = c.deliver(to_two, 4);
    assert_eq!(c.nodes[2].role_kind(), RoleKind::Follower);
    assert!(out.contains(&Output::RoleChanged {
        role: RoleKind::Follower,
        term: 1
    }));
}

#[test]
fn leader_steps_down_when_its_proof_expires() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    c.elect(0, 1000);
    let ttl = ProofPolicy::default().ttl_ms;
    let out = c.nodes[0].step(Event::HeartbeatTick, 1000 + ttl);
    assert_eq!(sent(&out).len(), 2);
    assert!(out.contains(&Output::ArmHeartbeatTimer(50)));
    let out = c.nodes[0].step(Event::HeartbeatTick, 1000 + ttl + 1);
    assert!(sent(&out).is_empty());
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Follower);
    assert!(arms_election(&out));
    // election timeouts are ignored only while leading
    let out = c.nodes[0].step(Event::ElectionTimeout, 1000 + ttl + 200);
    assert_eq!(c.nodes[0].role_kind(), RoleKind::Candidate);
    assert_eq!(sent(&out).len(), 2);
}

#[test]
fn candidate_timeout_restarts_with_fresh_timestamp() {
    let mut c = Cluster::new(3, Scheme::Sss);
    c.nodes[1].step(Event::ElectionTimeout, 100);
    let out = c.nodes[1].step(Event::ElectionTimeout, 400);
    assert_eq!(c.nodes[1].current_term(), 2);
    assert_eq!(c.nodes[1].role_kind(), RoleKind::Candidate);
    for p in sent(&out) {
        let PacketBody::VoteRequest { payload } = p.body else {
            panic!()
        };
        assert_eq!((payload.term, payload.timestamp_ms), (2, 400));
    }
}

#[test]
fn ticks_and_timeouts_in_the_wrong_role_are_noops() {
    let mut c = Cluster::new(3, Scheme::Schnorr);
    assert!(c.nodes[0].step(Event::HeartbeatTick, 10).is_empty());
    c.elect(0, 20);
    assert!(c.nodes[0].step(Event::ElectionTimeout, 30).is_empty());
    assert!(c.nodes[0].step(Event::Clock(40), 40).is_empty());
    let out = c.nodes[0].step(Event::Clock(0), 0);
    assert_eq!(diagnostics(&out), vec![DiagnosticCode::ClockRegression]);
}

#[test]
fn replaying_a_script_is_deterministic() {
    let run = || {
        let mut c = Cluster::new(5, Scheme::Sss);
        let mut log = Vec::new();
        let beats = c.elect(3, 500);
        log.push(format!("{beats:?}"));
        for p in beats {
            log.push(format!("{:?}", c.deliver(p, 510)));
        }
        log.push(format!("{:?}", c.nodes[3].step(Event::HeartbeatTick, 560)));
        log
    };
    assert_eq!(run(), run());
}

#[derive(Clone, Debug)]
enum Stim {
    Timeout(usize),
    Tick(usize),
    Advance(u64),
    Deliver(usize),
    DropOne(usize),
}

fn stim() -> impl Strategy<Value = Stim> {
    prop_oneof![
        (0usize..5).prop_map(Stim::Timeout),
        (0usize..5).prop_map(Stim::Tick),
        (1u64..400).prop_map(Stim::Advance),
        any::<usize>().prop_map(Stim::Deliver),
        any::<usize>().prop_map(Stim::DropOne),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random schedules over an in-memory network: terms never decrease, no
    /// node answers two ballots in one term, and no term has two leaders.
    #[test]
    fn safety_under_random_schedules(script in prop::collection::vec(stim(), 1..120)) {
        let mut c = Cluster::new(5, Scheme::Schnorr);
        let mut now = 0u64;
        let mut in_flight: Vec<Packet> = Vec::new();
        let mut last_term = [0u64; 5];
        let mut responses: BTreeMap<(u16, u64), usize> = BTreeMap::new();
        let mut leaders: BTreeMap<u64, NodeId> = BTreeMap::new();
        for s in script {
            let (who, out) = match s {
                Stim::Timeout(i) => (i, c.nodes[i].step(Event::ElectionTimeout, now)),
                Stim::Tick(i) => (i, c.nodes[i].step(Event::HeartbeatTick, now)),
                Stim::Advance(dt) => { now += dt; continue; }
                Stim::DropOne(k) => {
                    if !in_flight.is_empty() { in_flight.remove(k % in_flight.len()); }
                    continue;
                }
                Stim::Deliver(k) => {
                    if in_flight.is_empty() { continue; }
                    let p = in_flight.remove(k % in_flight.len());
                    let to = p.to.0 as usize;
                    (to, c.deliver(p, now))
                }
            };
            for o in &out {
                match o {
                    Output::Send(ps) => {
                        for p in ps {
                            if let PacketBody::VoteResponse { grant } = &p.body {
                                let n = responses.entry((p.from.0, grant.term)).or_default();
                                *n += 1;
                                prop_assert_eq!(*n, 1);
                            }
                        }
                        in_flight.extend(ps.iter().cloned());
                    }
                    Output::RoleChanged { role: RoleKind::Leader, term } => {
                        let prev = leaders.insert(*term, NodeId(who as u16));
                        prop_assert!(prev.is_none() || prev == Some(NodeId(who as u16)));
                    }
                    _ => {}
                }
            }
            for (i, node) in c.nodes.iter().enumerate() {
                prop_assert!(node.current_term() >= last_term[i]);
                last_term[i] = node.current_term();
            }
        }
    }
}
