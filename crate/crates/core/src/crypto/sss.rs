//! Shamir secret sharing over the secp256k1 scalar field.

use std::collections::BTreeSet;

use k256::elliptic_curve::ops::Reduce;
use k256::{Scalar, U256};
use rand::RngCore;

use super::group::{decode_scalar, encode_scalar};
use super::CryptoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SssShare {
    /// 1-based evaluation point; the holder's ordinal in the keyring.
    pub index: u16,
    pub value: Scalar,
}

impl SssShare {
    pub const ENCODED_LEN: usize = 64;

    /// `index (32 BE) ‖ value (32 BE)`.
    pub fn encode(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&encode_scalar(&Scalar::from(self.index as u64)));
        out[32..].copy_from_slice(&encode_scalar(&self.value));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(CryptoError::InvalidScalar);
        }
        let idx = &bytes[..32];
        if idx[..30].iter().any(|b| *b != 0) {
            return Err(CryptoError::InvalidShareIndex);
        }
        let index = u16::from_be_bytes([idx[30], idx[31]]);
        if index == 0 {
            return Err(CryptoError::InvalidShareIndex);
        }
        Ok(Self {
            index,
            value: decode_scalar(&bytes[32..])?,
        })
    }
}

fn random_field_element<R: RngCore>(rng: &mut R) -> Scalar {
    let mut buf = [0u8; 32];
    rng.fill_bytes(&mut buf);
    <Scalar as Reduce<U256>>::reduce_bytes(&buf.into())
}

/// Splits `secret` into `n` shares, any `q` of which restore it.
pub fn sss_split<R: RngCore>(
    secret: Scalar,
    n: usize,
    q: usize,
    rng: &mut R,
) -> Result<Vec<SssShare>, CryptoError> {
    if q == 0 || q > n || n > u16::MAX as usize {
        return Err(CryptoError::BadThreshold { n, q });
    }
    let mut coefficients = Vec::with_capacity(q);
    coefficients.push(secret);
    coefficients.extend((1..q).map(|_| random_field_element(rng)));
    Ok((1..=n as u16)
        .map(|index| {
            let x = Scalar::from(index as u64);
            // Horner evaluation from the highest coefficient down
            let value = coefficients
                .iter()
                .rev()
                .fold(Scalar::ZERO, |acc, c| acc * x + c);
            SssShare { index, value }
        })
        .collect())
}

/// Lagrange interpolation at zero over the `q` lowest-indexed shares.
pub fn sss_restore(shares: &[SssShare], q: usize) -> Result<Scalar, CryptoError> {
    let mut seen = BTreeSet::new();
    for s in shares {
        if s.index == 0 {
            return Err(CryptoError::InvalidShareIndex);
        }
        if !seen.insert(s.index) {
            return Err(CryptoError::DuplicateShareIndex(s.index));
        }
    }
    if q == 0 || shares.len() < q {
        return Err(CryptoError::BelowThreshold {
            have: shares.len(),
            need: q,
        });
    }
    let mut sorted = shares.to_vec();
    sorted.sort_by_key(|s| s.index);
    let used = &sorted[..q];
    let mut secret = Scalar::ZERO;
    for (j, sj) in used.iter().enumerate() {
        let xj = Scalar::from(sj.index as u64);
        let mut num = Scalar::ONE;
        let mut den = Scalar::ONE;
        for (m, sm) in used.iter().enumerate() {
            if m == j {
                continue;
            }
            let xm = Scalar::from(sm.index as u64);
            num *= xm;
            den *= xm - xj;
        }
        // indices are distinct and nonzero, so den is invertible
        let inv = Option::<Scalar>::from(den.invert()).ok_or(CryptoError::InvalidShareIndex)?;
        secret += sj.value * num * inv;
    }
    Ok(secret)
}
