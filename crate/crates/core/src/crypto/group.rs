//! Group and field plumbing over secp256k1: byte encodings and the
//! domain-separated hash every derivation routes through.

use k256::elliptic_curve::group::Group;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::PrimeField;
use k256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint, Scalar, U256};
use sha2::{Digest, Sha256};

use super::CryptoError;

/// Compressed SEC1 point length.
pub const POINT_LEN: usize = 33;
/// Big-endian scalar / field element length.
pub const SCALAR_LEN: usize = 32;

/// Encodes a point in 33-byte compressed form. The identity, which has no
/// compressed SEC1 form, is written as 33 zero bytes.
pub fn encode_point(point: &ProjectivePoint) -> [u8; POINT_LEN] {
    let mut out = [0u8; POINT_LEN];
    if bool::from(point.is_identity()) {
        return out;
    }
    let encoded = point.to_affine().to_encoded_point(true);
    out.copy_from_slice(encoded.as_bytes());
    out
}

pub fn decode_point(bytes: &[u8]) -> Result<ProjectivePoint, CryptoError> {
    if bytes.len() != POINT_LEN {
        return Err(CryptoError::InvalidPoint);
    }
    if bytes.iter().all(|b| *b == 0) {
        return Ok(ProjectivePoint::IDENTITY);
    }
    let encoded = EncodedPoint::from_bytes(bytes).map_err(|_| CryptoError::InvalidPoint)?;
    Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&encoded))
        .map(ProjectivePoint::from)
        .ok_or(CryptoError::InvalidPoint)
}

pub fn encode_scalar(scalar: &Scalar) -> [u8; SCALAR_LEN] {
    scalar.to_bytes().into()
}

/// Decodes a canonical big-endian scalar; values at or above the group order
/// are rejected rather than reduced.
pub fn decode_scalar(bytes: &[u8]) -> Result<Scalar, CryptoError> {
    if bytes.len() != SCALAR_LEN {
        return Err(CryptoError::InvalidScalar);
    }
    let arr: [u8; SCALAR_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidScalar)?;
    let repr = FieldBytes::from(arr);
    Option::<Scalar>::from(Scalar::from_repr(repr)).ok_or(CryptoError::InvalidScalar)
}

/// Maps `(domain_tag, parts)` to a scalar in `[0, n)`.
///
/// Each input is length-prefixed before hashing so that no two distinct
/// `(tag, parts)` tuples share a preimage.
pub fn hash_to_scalar(domain_tag: &[u8], parts: &[&[u8]]) -> Scalar {
    let mut hasher = Sha256::new();
    hasher.update((domain_tag.len() as u32).to_be_bytes());
    hasher.update(domain_tag);
    hasher.update((parts.len() as u32).to_be_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    <Scalar as Reduce<U256>>::reduce_bytes(&digest)
}
