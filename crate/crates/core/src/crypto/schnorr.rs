//! Single-round Schnorr multisignature over precomputed quorum combos.
//!
//! Every voter signs independently with a deterministic nonce; the candidate
//! sums the partials of one combo into a full signature. The challenge binds
//! the combo's aggregate key and the message but not the combined nonce
//! point, which is what lets followers sign without a nonce-exchange round.
//! This is weaker than full MuSig; see the README's security notes.

use std::collections::BTreeSet;

use k256::{ProjectivePoint, Scalar};

use super::group::{encode_point, encode_scalar, hash_to_scalar};
use super::keys::{ClusterKeyring, ComboId, KeyPair, NodeId};
use super::CryptoError;

/// One voter's contribution for one combo.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialSignature {
    pub signer: NodeId,
    pub combo: ComboId,
    pub nonce_point: ProjectivePoint,
    pub s_value: Scalar,
}

/// `e = H("challenge", [aggregate_key(combo), message])`.
pub fn schnorr_challenge(
    keyring: &ClusterKeyring,
    combo: ComboId,
    message: &[u8],
) -> Result<Scalar, CryptoError> {
    let agg = keyring
        .aggregate_key(combo)
        .ok_or(CryptoError::UnknownCombo(combo))?;
    Ok(hash_to_scalar(b"challenge", &[&encode_point(agg), message]))
}

pub fn schnorr_partial_sign(
    kp: &KeyPair,
    keyring: &ClusterKeyring,
    combo: ComboId,
    message: &[u8],
) -> Result<PartialSignature, CryptoError> {
    let signer = keyring
        .node_for_key(kp.public())
        .ok_or(CryptoError::UnknownSigner)?;
    if !combo.contains(signer) {
        return Err(CryptoError::NotAMember(signer, combo));
    }
    let e = schnorr_challenge(keyring, combo, message)?;
    let nonce = hash_to_scalar(
        b"nonce",
        &[&encode_scalar(kp.secret()), &combo.to_le_bytes(), message],
    );
    Ok(PartialSignature {
        signer,
        combo,
        nonce_point: ProjectivePoint::GENERATOR * nonce,
        s_value: nonce + e * kp.secret(),
    })
}

/// Checks `s_i·G == R_i + e·X_signer`. Any mismatch, including an unknown
/// combo or signer, is reported as `false`.
pub fn schnorr_partial_verify(
    keyring: &ClusterKeyring,
    psig: &PartialSignature,
    message: &[u8],
) -> bool {
    if !psig.combo.contains(psig.signer) {
        return false;
    }
    let Some(pk) = keyring.public_key(psig.signer) else {
        return false;
    };
    let Ok(e) = schnorr_challenge(keyring, psig.combo, message) else {
        return false;
    };
    ProjectivePoint::GENERATOR * psig.s_value == psig.nonce_point + *pk * e
}

/// Sums exactly one partial per combo member into `(R, s)`.
pub fn schnorr_aggregate(
    partials: &[PartialSignature],
) -> Result<(ProjectivePoint, Scalar), CryptoError> {
    let first = partials.first().ok_or(CryptoError::IncompleteCombo)?;
    let combo = first.combo;
    let mut signers = BTreeSet::new();
    for p in partials {
        if p.combo != combo {
            return Err(CryptoError::MixedCombos);
        }
        if !signers.insert(p.signer) {
            return Err(CryptoError::DuplicateSigner(p.signer));
        }
    }
    if ComboId::from_members(signers.iter().copied()) != combo || signers.len() != combo.len() {
        return Err(CryptoError::IncompleteCombo);
    }
    Ok(partials
        .iter()
        .fold((ProjectivePoint::IDENTITY, Scalar::ZERO), |(r, s), p| {
            (r + p.nonce_point, s + p.s_value)
        }))
}

/// Checks `s·G == R + e·aggregate_key(combo)`.
pub fn schnorr_verify(
    keyring: &ClusterKeyring,
    combo: ComboId,
    message: &[u8],
    nonce_point: &ProjectivePoint,
    s_value: &Scalar,
) -> bool {
    let (Some(agg), Ok(e)) = (
        keyring.aggregate_key(combo),
        schnorr_challenge(keyring, combo, message),
    ) else {
        return false;
    };
    ProjectivePoint::GENERATOR * s_value == *nonce_point + *agg * e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keys::keygen;

    fn ring(n: u16) -> (Vec<KeyPair>, ClusterKeyring) {
        let kps: Vec<KeyPair> = (0..n)
            .map(|i| keygen(format!("node-{i}").as_bytes()).unwrap())
            .collect();
        let keys: Vec<_> = kps
            .iter()
            .enumerate()
            .map(|(i, kp)| (NodeId(i as u16), *kp.public()))
            .collect();
        (kps, ClusterKeyring::build(&keys).unwrap())
    }

    fn sign_all(
        kps: &[KeyPair],
        kr: &ClusterKeyring,
        combo: ComboId,
        msg: &[u8],
    ) -> Vec<PartialSignature> {
        combo
            .members()
            .map(|m| schnorr_partial_sign(&kps[m.0 as usize], kr, combo, msg).unwrap())
            .collect()
    }

    #[test]
    fn challenge_binds_combo_and_message() {
        let (_, kr) = ring(3);
        let (c1, c2) = (kr.combos()[0].0, kr.combos()[1].0);
        let e1 = schnorr_challenge(&kr, c1, b"hello").unwrap();
        assert_eq!(e1, schnorr_challenge(&kr, c1, b"hello").unwrap());
        assert_ne!(e1, schnorr_challenge(&kr, c2, b"hello").unwrap());
        assert_ne!(e1, schnorr_challenge(&kr, c1, b"hellp").unwrap());
        assert!(schnorr_challenge(&kr, ComboId(0b1000), b"x").is_err());
    }

    #[test]
    fn partial_satisfies_verification_equation() {
        let (kps, kr) = ring(3);
        let combo = ComboId(0b011);
        let p = schnorr_partial_sign(&kps[0], &kr, combo, b"m").unwrap();
        let e = schnorr_challenge(&kr, combo, b"m").unwrap();
        assert_eq!(
            ProjectivePoint::GENERATOR * p.s_value,
            p.nonce_point + *kps[0].public() * e
        );
        assert_eq!(p, schnorr_partial_sign(&kps[0], &kr, combo, b"m").unwrap());
        assert!(schnorr_partial_verify(&kr, &p, b"m"));
    }

    #[test]
    fn non_member_cannot_sign() {
        let (kps, kr) = ring(3);
        let err = schnorr_partial_sign(&kps[2], &kr, ComboId(0b011), b"m").unwrap_err();
        assert!(err.to_string().contains("not a member"));
    }

    #[test]
    fn tampered_partials_are_rejected() {
        let (kps, kr) = ring(3);
        let p = schnorr_partial_sign(&kps[0], &kr, ComboId(0b011), b"m").unwrap();
        let mut bumped = p.clone();
        bumped.s_value += Scalar::ONE;
        assert!(!schnorr_partial_verify(&kr, &bumped, b"m"));
        let mut moved = p.clone();
        moved.combo = ComboId(0b101);
        assert!(!schnorr_partial_verify(&kr, &moved, b"m"));
        let mut renamed = p.clone();
        renamed.signer = NodeId(1);
        assert!(!schnorr_partial_verify(&kr, &renamed, b"m"));
        assert!(!schnorr_partial_verify(&kr, &p, b"n"));
    }

    #[test]
    fn aggregate_verifies_for_every_combo() {
        for n in [3u16, 5] {
            let (kps, kr) = ring(n);
            for (combo, _) in kr.combos() {
                let parts = sign_all(&kps, &kr, *combo, b"vote");
                let (r, s) = schnorr_aggregate(&parts).unwrap();
                assert!(schnorr_verify(&kr, *combo, b"vote", &r, &s));
                assert!(!schnorr_verify(&kr, *combo, b"votf", &r, &s));
                for (other, _) in kr.combos().iter().filter(|(c, _)| c != combo) {
                    assert!(!schnorr_verify(&kr, *other, b"vote", &r, &s));
                }
            }
        }
    }

    #[test]
    fn aggregate_is_order_independent() {
        let (kps, kr) = ring(5);
        let combo = kr.combos()[4].0;
        let mut parts = sign_all(&kps, &kr, combo, b"m");
        let fwd = schnorr_aggregate(&parts).unwrap();
        parts.reverse();
        assert_eq!(fwd, schnorr_aggregate(&parts).unwrap());
    }

    #[test]
    fn aggregate_rejects_incomplete_or_duplicate_sets() {
        let (kps, kr) = ring(5);
        let combo = kr.combos()[0].0;
        let parts = sign_all(&kps, &kr, combo, b"m");
        let err = schnorr_aggregate(&parts[..2]).unwrap_err();
        assert_eq!(err.to_string(), "incomplete combo");
        let dup = vec![parts[0].clone(), parts[0].clone(), parts[1].clone()];
        assert!(matches!(
            schnorr_aggregate(&dup),
            Err(CryptoError::DuplicateSigner(_))
        ));
        assert!(schnorr_aggregate(&[]).is_err());
    }
}
