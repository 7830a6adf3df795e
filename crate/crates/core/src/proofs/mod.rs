//! Proof-of-voting: who voted, for whom, in which term, and until when.
//!
//! Two constructions share one interface. The Schnorr scheme produces a
//! fixed 92-byte proof verified against one quorum combo's aggregate key.
//! The Shamir scheme produces a proof that grows with the quorum: the
//! candidate splits a secret derived from `(timestamp, salt, term)`, each
//! voter signs its share with a recoverable signature, and a validator
//! checks that the signed shares reconstruct the secret.

mod codec;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    hash_to_scalar, recover_pubkey, schnorr_aggregate, schnorr_partial_sign,
    schnorr_partial_verify, sign_recoverable, sss_split, ClusterKeyring, ComboId, CryptoError,
    KeyPair, NodeId, PartialSignature, ProjectivePoint, RecoverableSignature, Scalar, SssShare,
};

pub use codec::{decode_proof, encode_proof, proof_hash, SCHNORR_PROOF_LEN, SSS_ENTRY_LEN};
pub use validate::{proof_voters, validate_proof, ValidationCache};

/// Which proof construction a cluster uses. The discriminant is the wire tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Scheme {
    Schnorr = 1,
    Sss = 2,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Scheme::Schnorr),
            2 => Some(Scheme::Sss),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Schnorr => "schnorr",
            Scheme::Sss => "sss",
        })
    }
}

/// Length of the signed vote message.
pub const VOTE_MESSAGE_LEN: usize = 19;

/// `scheme tag ‖ term (8 BE) ‖ timestamp_ms (8 BE) ‖ candidate (2 BE)`.
pub fn vote_message(
    scheme: Scheme,
    term: u64,
    timestamp_ms: u64,
    candidate: NodeId,
) -> [u8; VOTE_MESSAGE_LEN] {
    let mut out = [0u8; VOTE_MESSAGE_LEN];
    out[0] = scheme.tag();
    out[1..9].copy_from_slice(&term.to_be_bytes());
    out[9..17].copy_from_slice(&timestamp_ms.to_be_bytes());
    out[17..19].copy_from_slice(&candidate.to_be_bytes());
    out
}

/// The secret a Shamir-scheme candidate splits among the cluster.
pub fn sss_round_secret(timestamp_ms: u64, salt: &[u8; 32], term: u64) -> Scalar {
    hash_to_scalar(
        b"sss-secret",
        &[&timestamp_ms.to_be_bytes(), salt, &term.to_be_bytes()],
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PayloadBody {
    Schnorr,
    Sss { salt: [u8; 32], share: SssShare },
}

/// What a candidate asks a peer to sign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VotePayload {
    pub term: u64,
    pub timestamp_ms: u64,
    pub candidate: NodeId,
    pub body: PayloadBody,
}

impl VotePayload {
    pub fn scheme(&self) -> Scheme {
        match self.body {
            PayloadBody::Schnorr => Scheme::Schnorr,
            PayloadBody::Sss { .. } => Scheme::Sss,
        }
    }

    pub fn message(&self) -> [u8; VOTE_MESSAGE_LEN] {
        vote_message(self.scheme(), self.term, self.timestamp_ms, self.candidate)
    }
}

/// One election round as seen by its candidate: the public parameters plus
/// the payload addressed to every node, the candidate included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteRound {
    pub scheme: Scheme,
    pub term: u64,
    pub timestamp_ms: u64,
    pub candidate: NodeId,
    pub payloads: BTreeMap<NodeId, VotePayload>,
}

impl VoteRound {
    pub fn payload_for(&self, node: NodeId) -> Option<&VotePayload> {
        self.payloads.get(&node)
    }

    pub fn message(&self) -> [u8; VOTE_MESSAGE_LEN] {
        vote_message(self.scheme, self.term, self.timestamp_ms, self.candidate)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GrantBody {
    Schnorr {
        partials: Vec<PartialSignature>,
    },
    Sss {
        share: SssShare,
        signature: RecoverableSignature,
    },
}

/// A voter's signed answer to a [`VotePayload`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteGrant {
    pub voter: NodeId,
    pub term: u64,
    pub body: GrantBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SssEntry {
    pub share: SssShare,
    pub signature: RecoverableSignature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofBody {
    Schnorr {
        combo: ComboId,
        nonce_point: ProjectivePoint,
        s_value: Scalar,
    },
    Sss {
        salt: [u8; 32],
        entries: Vec<SssEntry>,
    },
}

/// Proof that a quorum voted for `candidate` in `term`, created at
/// `timestamp_ms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteProof {
    pub term: u64,
    pub timestamp_ms: u64,
    pub candidate: NodeId,
    pub body: ProofBody,
}

impl VoteProof {
    pub fn scheme(&self) -> Scheme {
        match self.body {
            ProofBody::Schnorr { .. } => Scheme::Schnorr,
            ProofBody::Sss { .. } => Scheme::Sss,
        }
    }

    pub fn message(&self) -> [u8; VOTE_MESSAGE_LEN] {
        vote_message(self.scheme(), self.term, self.timestamp_ms, self.candidate)
    }

    /// Last instant at which the proof is still valid (inclusive).
    pub fn expires_at(&self, policy: &ProofPolicy) -> u64 {
        self.timestamp_ms.saturating_add(policy.ttl_ms)
    }
}

/// Proof lifetime and tolerated clock skew.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofPolicy {
    pub ttl_ms: u64,
    pub max_clock_skew_ms: u64,
}

impl Default for ProofPolicy {
    fn default() -> Self {
        Self {
            ttl_ms: 15_000,
            max_clock_skew_ms: 500,
        }
    }
}

impl ProofPolicy {
    pub fn validate(&self) -> Result<(), ProofError> {
        if self.ttl_ms == 0 {
            return Err(ProofError::InvalidPolicy("ttl_ms must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValidationResult {
    Ok,
    Expired,
    BadSignature,
    BadSecret,
    UnknownVoter,
    FutureTimestamp,
}

impl ValidationResult {
    pub fn is_ok(self) -> bool {
        self == ValidationResult::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationResult::Ok => "ok",
            ValidationResult::Expired => "expired",
            ValidationResult::BadSignature => "bad_signature",
            ValidationResult::BadSecret => "bad_secret",
            ValidationResult::UnknownVoter => "unknown_voter",
            ValidationResult::FutureTimestamp => "future_timestamp",
        }
    }
}

impl fmt::Display for ValidationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("term must be at least 1")]
    InvalidTerm,
    #[error("node {0} is not in the keyring")]
    UnknownNode(NodeId),
    #[error("voter key is not in the keyring")]
    VoterNotInKeyring,
    #[error("payload share is not addressed to node {0}")]
    Misaddressed(NodeId),
    #[error("no quorum: {have} voters, need {need}")]
    NoQuorum { have: usize, need: usize },
    #[error("bad grant from node {0}")]
    BadGrant(NodeId),
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("malformed proof: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Opens a round: the payload each node (the candidate included) signs.
///
/// Schnorr payloads are identical for every node. Shamir payloads each carry
/// the recipient's share of a fresh secret; `rng` supplies the salt and the
/// polynomial coefficients.
pub fn make_vote_payloads<R: RngCore>(
    candidate: NodeId,
    term: u64,
    now_ms: u64,
    keyring: &ClusterKeyring,
    scheme: Scheme,
    rng: &mut R,
) -> Result<VoteRound, ProofError> {
    if term == 0 {
        return Err(ProofError::InvalidTerm);
    }
    if keyring.public_key(candidate).is_none() {
        return Err(ProofError::UnknownNode(candidate));
    }
    let payloads = match scheme {
        Scheme::Schnorr => keyring
            .node_ids()
            .map(|id| {
                (
                    id,
                    VotePayload {
                        term,
                        timestamp_ms: now_ms,
                        candidate,
                        body: PayloadBody::Schnorr,
                    },
                )
            })
            .collect(),
        Scheme::Sss => {
            let mut salt = [0u8; 32];
            rng.fill_bytes(&mut salt);
            let secret = sss_round_secret(now_ms, &salt, term);
            let shares = sss_split(secret, keyring.len(), keyring.quorum_size(), rng)?;
            keyring
                .node_ids()
                .zip(shares)
                .map(|(id, share)| {
                    (
                        id,
                        VotePayload {
                            term,
                            timestamp_ms: now_ms,
                            candidate,
                            body: PayloadBody::Sss { salt, share },
                        },
                    )
                })
                .collect()
        }
    };
    Ok(VoteRound {
        scheme,
        term,
        timestamp_ms: now_ms,
        candidate,
        payloads,
    })
}

fn sss_signed_bytes(share: &SssShare, message: &[u8; VOTE_MESSAGE_LEN]) -> Vec<u8> {
    let mut out = share.encode().to_vec();
    out.extend_from_slice(message);
    out
}

/// Signs a payload. Schnorr voters produce one partial per combo holding both
/// themselves and the candidate; Shamir voters sign their share.
pub fn grant_vote(
    voter_kp: &KeyPair,
    payload: &VotePayload,
    keyring: &ClusterKeyring,
) -> Result<VoteGrant, ProofError> {
    let voter = keyring
        .node_for_key(voter_kp.public())
        .ok_or(ProofError::VoterNotInKeyring)?;
    if keyring.public_key(payload.candidate).is_none() {
        return Err(ProofError::UnknownNode(payload.candidate));
    }
    let message = payload.message();
    let body = match &payload.body {
        PayloadBody::Schnorr => {
            let required = [voter, payload.candidate];
            let partials = keyring
                .combos_containing(&required)
                .map(|combo| schnorr_partial_sign(voter_kp, keyring, combo, &message))
                .collect::<Result<Vec<_>, _>>()?;
            GrantBody::Schnorr { partials }
        }
        PayloadBody::Sss { share, .. } => {
            if keyring.ordinal(voter) != Some(share.index) {
                return Err(ProofError::Misaddressed(voter));
            }
            let signature = sign_recoverable(voter_kp, &sss_signed_bytes(share, &message));
            GrantBody::Sss {
                share: *share,
                signature,
            }
        }
    };
    Ok(VoteGrant {
        voter,
        term: payload.term,
        body,
    })
}

/// Checks a grant against the payload the candidate sent to that voter.
pub fn verify_grant(
    grant: &VoteGrant,
    round: &VoteRound,
    keyring: &ClusterKeyring,
) -> Result<(), ProofError> {
    let bad = ProofError::BadGrant(grant.voter);
    let payload = round.payload_for(grant.voter).ok_or(bad.clone())?;
    if grant.term != round.term {
        return Err(bad);
    }
    let message = round.message();
    match (&grant.body, &payload.body) {
        (GrantBody::Schnorr { partials }, PayloadBody::Schnorr) => {
            let required = [grant.voter, round.candidate];
            let mut expected: Vec<ComboId> = keyring.combos_containing(&required).collect();
            expected.sort();
            let mut got: Vec<ComboId> = partials.iter().map(|p| p.combo).collect();
            got.sort();
            if got != expected {
                return Err(bad);
            }
            let all_valid = partials
                .iter()
                .all(|p| p.signer == grant.voter && schnorr_partial_verify(keyring, p, &message));
            if !all_valid {
                return Err(bad);
            }
            Ok(())
        }
        (GrantBody::Sss { share, signature }, PayloadBody::Sss { share: sent, .. }) => {
            if share != sent {
                return Err(bad);
            }
            let recovered = recover_pubkey(&sss_signed_bytes(share, &message), signature)
                .map_err(|_| bad.clone())?;
            if keyring.public_key(grant.voter) != Some(&recovered) {
                return Err(bad);
            }
            Ok(())
        }
        _ => Err(bad),
    }
}

/// Assembles the proof once a quorum has granted.
///
/// Voters are taken in order: the candidate first, then `grants` in arrival
/// order, skipping repeats. The first `q` of them form the proof.
pub fn build_proof(
    candidate_kp: &KeyPair,
    round: &VoteRound,
    own_grant: &VoteGrant,
    grants: &[VoteGrant],
    keyring: &ClusterKeyring,
) -> Result<VoteProof, ProofError> {
    let candidate = keyring
        .node_for_key(candidate_kp.public())
        .ok_or(ProofError::VoterNotInKeyring)?;
    if candidate != round.candidate || own_grant.voter != candidate {
        return Err(ProofError::BadGrant(own_grant.voter));
    }
    let mut seen = BTreeSet::new();
    let mut voters: Vec<&VoteGrant> = Vec::new();
    for grant in std::iter::once(own_grant).chain(grants) {
        verify_grant(grant, round, keyring)?;
        if seen.insert(grant.voter) {
            voters.push(grant);
        }
    }
    let q = keyring.quorum_size();
    if voters.len() < q {
        return Err(ProofError::NoQuorum {
            have: voters.len(),
            need: q,
        });
    }
    let chosen = &voters[..q];
    let body = match round.scheme {
        Scheme::Schnorr => {
            let combo = ComboId::from_members(chosen.iter().map(|g| g.voter));
            let partials: Vec<PartialSignature> = chosen
                .iter()
                .filter_map(|g| match &g.body {
                    GrantBody::Schnorr { partials } => {
                        partials.iter().find(|p| p.combo == combo).cloned()
                    }
                    GrantBody::Sss { .. } => None,
                })
                .collect();
            let (nonce_point, s_value) = schnorr_aggregate(&partials)?;
            ProofBody::Schnorr {
                combo,
                nonce_point,
                s_value,
            }
        }
        Scheme::Sss => {
            let salt = match &round.payload_for(candidate).map(|p| &p.body) {
                Some(PayloadBody::Sss { salt, .. }) => *salt,
                _ => return Err(ProofError::BadGrant(candidate)),
            };
            let entries = chosen
                .iter()
                .filter_map(|g| match &g.body {
                    GrantBody::Sss { share, signature } => Some(SssEntry {
                        share: *share,
                        signature: *signature,
                    }),
                    GrantBody::Schnorr { .. } => None,
                })
                .collect();
            ProofBody::Sss { salt, entries }
        }
    };
    Ok(VoteProof {
        term: round.term,
        timestamp_ms: round.timestamp_ms,
        candidate,
        body,
    })
}
