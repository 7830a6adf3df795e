//! Curve primitives behind both proof-of-voting schemes.
//!
//! The group is secp256k1 (SEC 2). Arithmetic is not constant time in the
//! sense a wallet would require; these primitives serve a consensus
//! simulator and library, not key custody.

mod group;
mod keys;
mod recoverable;
mod schnorr;
mod sss;

use thiserror::Error;

pub use group::{
    decode_point, decode_scalar, encode_point, encode_scalar, hash_to_scalar, POINT_LEN, SCALAR_LEN,
};
pub use k256::{ProjectivePoint, Scalar};
pub use keys::{
    cluster_keys, keygen, quorum_for, random_scalar, ClusterKeyring, ComboId, KeyPair, NodeId,
    MAX_NODES, MIN_NODES,
};
pub use recoverable::{recover_pubkey, sign_recoverable, RecoverableSignature};
pub use schnorr::{
    schnorr_aggregate, schnorr_challenge, schnorr_partial_sign, schnorr_partial_verify,
    schnorr_verify, PartialSignature,
};
pub use sss::{sss_restore, sss_split, SssShare};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("seed must be nonempty")]
    EmptySeed,
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("cluster too small: {0} nodes")]
    ClusterTooSmall(usize),
    #[error("cluster too large: {0} nodes")]
    ClusterTooLarge(usize),
    #[error("node id {0} does not fit a 64-bit combo mask")]
    NodeIdOutOfRange(NodeId),
    #[error("unknown combo {0}")]
    UnknownCombo(ComboId),
    #[error("signing key is not in the keyring")]
    UnknownSigner,
    #[error("node {0} is not a member of combo {1}")]
    NotAMember(NodeId, ComboId),
    #[error("incomplete combo")]
    IncompleteCombo,
    #[error("partials target different combos")]
    MixedCombos,
    #[error("duplicate signer {0}")]
    DuplicateSigner(NodeId),
    #[error("invalid threshold {q} of {n}")]
    BadThreshold { n: usize, q: usize },
    #[error("below threshold: {have} shares, need {need}")]
    BelowThreshold { have: usize, need: usize },
    #[error("duplicate share index {0}")]
    DuplicateShareIndex(u16),
    #[error("invalid share index")]
    InvalidShareIndex,
    #[error("invalid signature encoding")]
    InvalidSignatureEncoding,
    #[error("public key recovery failed")]
    RecoveryFailed,
    #[error("invalid point encoding")]
    InvalidPoint,
    #[error("invalid scalar encoding")]
    InvalidScalar,
}
