//! ECDSA signatures with a recovery hint, used by the Shamir scheme so a
//! validator can tell who signed a share without carrying the key.

use k256::ecdsa::{RecoveryId, Signature, SigningKey, VerifyingKey};
use k256::ProjectivePoint;
use sha2::{Digest, Sha256};

use super::keys::KeyPair;
use super::CryptoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecoverableSignature {
    pub r: [u8; 32],
    pub s: [u8; 32],
    pub recovery_hint: u8,
}

impl RecoverableSignature {
    pub const ENCODED_LEN: usize = 65;

    pub fn encode(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.recovery_hint;
        out
    }

    /// Splits the fixed layout; range checks on `r`/`s` happen at recovery.
    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(CryptoError::InvalidSignatureEncoding);
        }
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..64]);
        Ok(Self {
            r,
            s,
            recovery_hint: bytes[64],
        })
    }
}

/// Signs `SHA-256(message)` with an RFC 6979 nonce.
pub fn sign_recoverable(kp: &KeyPair, message: &[u8]) -> RecoverableSignature {
    let digest = Sha256::digest(message);
    let key = SigningKey::from_bytes(&kp.secret().to_bytes())
        .expect("key pair secrets are nonzero scalars");
    let (sig, recid) = key
        .sign_prehash_recoverable(&digest)
        .expect("signing a 32-byte prehash cannot fail");
    let (r, s) = sig.split_bytes();
    RecoverableSignature {
        r: r.into(),
        s: s.into(),
        recovery_hint: recid.to_byte(),
    }
}

pub fn recover_pubkey(
    message: &[u8],
    sig: &RecoverableSignature,
) -> Result<ProjectivePoint, CryptoError> {
    let recid =
        RecoveryId::from_byte(sig.recovery_hint).ok_or(CryptoError::InvalidSignatureEncoding)?;
    let parsed =
        Signature::from_scalars(sig.r, sig.s).map_err(|_| CryptoError::InvalidSignatureEncoding)?;
    let digest = Sha256::digest(message);
    let vk = VerifyingKey::recover_from_prehash(&digest, &parsed, recid)
        .map_err(|_| CryptoError::RecoveryFailed)?;
    Ok(ProjectivePoint::from(*vk.as_affine()))
}
