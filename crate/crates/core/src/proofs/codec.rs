//! Wire layout of [`VoteProof`].
//!
//! Schnorr (92 bytes):
//! `tag (1) ‖ term (8 BE) ‖ timestamp_ms (8 BE) ‖ candidate (2 BE) ‖
//!  combo (8 LE) ‖ R (33 compressed) ‖ s (32 BE)`
//!
//! Shamir:
//! `tag ‖ term ‖ timestamp_ms ‖ candidate ‖ salt (32) ‖ count (2 BE) ‖
//!  count × (index 32 ‖ value 32 ‖ r 32 ‖ s 32 ‖ hint 1)`

use sha2::{Digest, Sha256};

use super::{ProofBody, ProofError, Scheme, SssEntry, VoteProof};
use crate::crypto::{
    decode_point, decode_scalar, encode_point, encode_scalar, ComboId, NodeId,
    RecoverableSignature, SssShare,
};

const HEADER_LEN: usize = 1 + 8 + 8 + 2;
pub const SCHNORR_PROOF_LEN: usize = HEADER_LEN + 8 + 33 + 32;
pub const SSS_ENTRY_LEN: usize = SssShare::ENCODED_LEN + RecoverableSignature::ENCODED_LEN;

pub fn encode_proof(proof: &VoteProof) -> Vec<u8> {
    let mut out = Vec::with_capacity(SCHNORR_PROOF_LEN);
    out.push(proof.scheme().tag());
    out.extend_from_slice(&proof.term.to_be_bytes());
    out.extend_from_slice(&proof.timestamp_ms.to_be_bytes());
    out.extend_from_slice(&proof.candidate.to_be_bytes());
    match &proof.body {
        ProofBody::Schnorr {
            combo,
            nonce_point,
            s_value,
        } => {
            out.extend_from_slice(&combo.to_le_bytes());
            out.extend_from_slice(&encode_point(nonce_point));
            out.extend_from_slice(&encode_scalar(s_value));
        }
        ProofBody::Sss { salt, entries } => {
            out.extend_from_slice(salt);
            out.extend_from_slice(&(entries.len() as u16).to_be_bytes());
            for e in entries {
                out.extend_from_slice(&e.share.encode());
                out.extend_from_slice(&e.signature.encode());
            }
        }
    }
    out
}

fn be_u64(bytes: &[u8]) -> u64 {
    let mut buf = [0u8; 8];
    buf.copy_from_slice(bytes);
    u64::from_be_bytes(buf)
}

pub fn decode_proof(bytes: &[u8]) -> Result<VoteProof, ProofError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProofError::Malformed("truncated header"));
    }
    let scheme = Scheme::from_tag(bytes[0]).ok_or(ProofError::Malformed("unknown scheme tag"))?;
    let term = be_u64(&bytes[1..9]);
    let timestamp_ms = be_u64(&bytes[9..17]);
    let candidate = NodeId(u16::from_be_bytes([bytes[17], bytes[18]]));
    let rest = &bytes[HEADER_LEN..];
    let body = match scheme {
        Scheme::Schnorr => {
            if bytes.len() != SCHNORR_PROOF_LEN {
                return Err(ProofError::Malformed("schnorr proof must be 92 bytes"));
            }
            let mut mask = [0u8; 8];
            mask.copy_from_slice(&rest[..8]);
            ProofBody::Schnorr {
                combo: ComboId(u64::from_le_bytes(mask)),
                nonce_point: decode_point(&rest[8..41])
                    .map_err(|_| ProofError::Malformed("invalid nonce point"))?,
                s_value: decode_scalar(&rest[41..73])
                    .map_err(|_| ProofError::Malformed("non-canonical s"))?,
            }
        }
        Scheme::Sss => {
            if rest.len() < 34 {
                return Err(ProofError::Malformed("truncated salt or count"));
            }
            let mut salt = [0u8; 32];
            salt.copy_from_slice(&rest[..32]);
            let count = u16::from_be_bytes([rest[32], rest[33]]) as usize;
            let entry_bytes = &rest[34..];
            if entry_bytes.len() != count * SSS_ENTRY_LEN {
                return Err(ProofError::Malformed("entry count does not match length"));
            }
            let entries = entry_bytes
                .chunks_exact(SSS_ENTRY_LEN)
                .map(|chunk| {
                    let (share, sig) = chunk.split_at(SssShare::ENCODED_LEN);
                    Ok(SssEntry {
                        share: SssShare::decode(share)
                            .map_err(|_| ProofError::Malformed("invalid share"))?,
                        signature: RecoverableSignature::decode(sig)
                            .map_err(|_| ProofError::Malformed("invalid signature"))?,
                    })
                })
                .collect::<Result<Vec<_>, ProofError>>()?;
            ProofBody::Sss { salt, entries }
        }
    };
    Ok(VoteProof {
        term,
        timestamp_ms,
        candidate,
        body,
    })
}

/// SHA-256 of the encoded proof; the validation cache key.
pub fn proof_hash(proof: &VoteProof) -> [u8; 32] {
    Sha256::digest(encode_proof(proof)).into()
}
