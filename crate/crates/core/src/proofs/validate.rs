use std::collections::{BTreeSet, HashSet};

use super::{
    proof_hash, sss_round_secret, sss_signed_bytes, ProofBody, ProofPolicy, SssEntry,
    ValidationResult, VoteProof,
};
use crate::crypto::{recover_pubkey, schnorr_verify, sss_restore, ClusterKeyring, NodeId};

fn check_window(proof: &VoteProof, policy: &ProofPolicy, now_ms: u64) -> Option<ValidationResult> {
    if proof.timestamp_ms > now_ms.saturating_add(policy.max_clock_skew_ms) {
        return Some(ValidationResult::FutureTimestamp);
    }
    if now_ms > proof.expires_at(policy) {
        return Some(ValidationResult::Expired);
    }
    None
}

fn check_sss(
    proof: &VoteProof,
    salt: &[u8; 32],
    entries: &[SssEntry],
    keyring: &ClusterKeyring,
) -> ValidationResult {
    let message = proof.message();
    let mut voters = BTreeSet::new();
    for entry in entries {
        let Ok(key) = recover_pubkey(&sss_signed_bytes(&entry.share, &message), &entry.signature)
        else {
            return ValidationResult::BadSignature;
        };
        let Some(voter) = keyring.node_for_key(&key) else {
            return ValidationResult::UnknownVoter;
        };
        // a share only counts when signed by the node it was dealt to
        if keyring.ordinal(voter) != Some(entry.share.index) || !voters.insert(voter) {
            return ValidationResult::BadSignature;
        }
    }
    if !voters.contains(&proof.candidate) {
        return ValidationResult::BadSignature;
    }
    let shares: Vec<_> = entries.iter().map(|e| e.share).collect();
    let expected = sss_round_secret(proof.timestamp_ms, salt, proof.term);
    match sss_restore(&shares, keyring.quorum_size()) {
        Ok(restored) if restored == expected => ValidationResult::Ok,
        _ => ValidationResult::BadSecret,
    }
}

fn check_signatures(proof: &VoteProof, keyring: &ClusterKeyring) -> ValidationResult {
    match &proof.body {
        ProofBody::Schnorr {
            combo,
            nonce_point,
            s_value,
        } => {
            if !keyring.contains_combo(*combo) {
                return ValidationResult::UnknownVoter;
            }
            if !combo.contains(proof.candidate) {
                return ValidationResult::BadSignature;
            }
            if schnorr_verify(keyring, *combo, &proof.message(), nonce_point, s_value) {
                ValidationResult::Ok
            } else {
                ValidationResult::BadSignature
            }
        }
        ProofBody::Sss { salt, entries } => check_sss(proof, salt, entries, keyring),
    }
}

/// Classifies `proof` at virtual time `now_ms`.
///
/// The time window is checked first: a proof dated more than the allowed
/// skew into the future is `FutureTimestamp`, and one past
/// `timestamp + ttl` is `Expired`. Only then are signatures examined.
pub fn validate_proof(
    proof: &VoteProof,
    keyring: &ClusterKeyring,
    policy: &ProofPolicy,
    now_ms: u64,
) -> ValidationResult {
    check_window(proof, policy, now_ms).unwrap_or_else(|| check_signatures(proof, keyring))
}

/// Nodes the proof claims as voters, read from the combo mask or the share
/// indices. No signature is checked.
pub fn proof_voters(proof: &VoteProof, keyring: &ClusterKeyring) -> Vec<NodeId> {
    match &proof.body {
        ProofBody::Schnorr { combo, .. } => combo.members().collect(),
        ProofBody::Sss { entries, .. } => entries
            .iter()
            .filter_map(|e| keyring.node_at_ordinal(e.share.index))
            .collect(),
    }
}

/// Remembers proofs whose signatures already checked out, keyed by the hash
/// of their encoding, so repeat heartbeats skip the curve arithmetic. The
/// time window is still evaluated on every call.
#[derive(Debug, Default, Clone)]
pub struct ValidationCache {
    verified: HashSet<[u8; 32]>,
}

impl ValidationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.verified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verified.is_empty()
    }

    pub fn validate(
        &mut self,
        proof: &VoteProof,
        keyring: &ClusterKeyring,
        policy: &ProofPolicy,
        now_ms: u64,
    ) -> ValidationResult {
        if let Some(rejected) = check_window(proof, policy, now_ms) {
            return rejected;
        }
        let key = proof_hash(proof);
        if self.verified.contains(&key) {
            return ValidationResult::Ok;
        }
        let result = check_signatures(proof, keyring);
        if result.is_ok() {
            self.verified.insert(key);
        }
        result
    }
}
