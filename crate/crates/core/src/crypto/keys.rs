use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use k256::elliptic_curve::Field;
use k256::{ProjectivePoint, Scalar};
use serde::{Deserialize, Serialize};

use super::group::{encode_point, encode_scalar, hash_to_scalar};
use super::CryptoError;

/// Smallest cluster the keyring accepts.
pub const MIN_NODES: usize = 3;
/// Largest cluster the keyring accepts; bounds the combo table at C(16, 9).
pub const MAX_NODES: usize = 16;

/// Identifier of a cluster member. Doubles as the bit position in a [`ComboId`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl NodeId {
    pub fn to_be_bytes(self) -> [u8; 2] {
        self.0.to_be_bytes()
    }
}

/// A signing identity. The secret never leaves this struct in any encoding
/// the protocol produces.
#[derive(Clone)]
pub struct KeyPair {
    secret: Scalar,
    public: ProjectivePoint,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &hex::encode(encode_point(&self.public)))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Builds a pair from an explicit nonzero secret.
    pub fn from_secret(secret: Scalar) -> Result<Self, CryptoError> {
        if bool::from(secret.is_zero()) {
            return Err(CryptoError::InvalidScalar);
        }
        Ok(Self {
            secret,
            public: ProjectivePoint::GENERATOR * secret,
        })
    }

    pub fn public(&self) -> &ProjectivePoint {
        &self.public
    }

    pub(crate) fn secret(&self) -> &Scalar {
        &self.secret
    }

    /// Raw secret bytes, used only by the keyset file writer.
    pub fn secret_bytes(&self) -> [u8; 32] {
        encode_scalar(&self.secret)
    }
}

/// Derives a key pair deterministically from `seed`.
///
/// A zero scalar is re-derived with an appended counter, so this never fails
/// for a nonempty seed.
pub fn keygen(seed: &[u8]) -> Result<KeyPair, CryptoError> {
    if seed.is_empty() {
        return Err(CryptoError::EmptySeed);
    }
    let mut counter: u32 = 0;
    loop {
        let secret = if counter == 0 {
            hash_to_scalar(b"keygen", &[seed])
        } else {
            hash_to_scalar(b"keygen", &[seed, &counter.to_be_bytes()])
        };
        if let Ok(kp) = KeyPair::from_secret(secret) {
            return Ok(kp);
        }
        counter += 1;
    }
}

/// Derives `n` key pairs from `"{seed}-{i}"` and the keyring over node ids
/// `0..n`.
pub fn cluster_keys(seed: &str, n: usize) -> Result<(Vec<KeyPair>, ClusterKeyring), CryptoError> {
    let kps = (0..n)
        .map(|i| keygen(format!("{seed}-{i}").as_bytes()))
        .collect::<Result<Vec<_>, _>>()?;
    let keys: Vec<_> = kps
        .iter()
        .enumerate()
        .map(|(i, kp)| (NodeId(i as u16), *kp.public()))
        .collect();
    let keyring = ClusterKeyring::build(&keys)?;
    Ok((kps, keyring))
}

/// A quorum-size subset of nodes, as a bitmask over node ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComboId(pub u64);

impl ComboId {
    pub fn from_members<I: IntoIterator<Item = NodeId>>(members: I) -> Self {
        ComboId(
            members
                .into_iter()
                .fold(0u64, |acc, id| acc | (1u64 << id.0)),
        )
    }

    pub fn contains(self, id: NodeId) -> bool {
        id.0 < 64 && self.0 & (1u64 << id.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = NodeId> {
        (0u16..64)
            .filter(move |i| self.0 & (1u64 << i) != 0)
            .map(NodeId)
    }

    /// 8-byte little-endian bitmask, as hashed and put on the wire.
    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }
}

impl fmt::Display for ComboId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.members().map(|m| m.to_string()).join(","))
    }
}

/// Every member's public key plus the aggregate key of every quorum-size
/// subset, computed once at startup.
#[derive(Clone, Debug)]
pub struct ClusterKeyring {
    nodes: Vec<(NodeId, ProjectivePoint)>,
    quorum: usize,
    combos: Vec<(ComboId, ProjectivePoint)>,
    combo_index: BTreeMap<ComboId, usize>,
}

/// Majority threshold for a cluster of `n` nodes.
pub fn quorum_for(n: usize) -> usize {
    n / 2 + 1
}

impl ClusterKeyring {
    pub fn build(keys: &[(NodeId, ProjectivePoint)]) -> Result<Self, CryptoError> {
        let mut nodes = keys.to_vec();
        nodes.sort_by_key(|(id, _)| *id);
        if let Some(dup) = nodes.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CryptoError::DuplicateNode(dup[0].0));
        }
        if nodes.len() < MIN_NODES {
            return Err(CryptoError::ClusterTooSmall(nodes.len()));
        }
        if nodes.len() > MAX_NODES {
            return Err(CryptoError::ClusterTooLarge(nodes.len()));
        }
        if let Some((id, _)) = nodes.iter().find(|(id, _)| id.0 >= 64) {
            return Err(CryptoError::NodeIdOutOfRange(*id));
        }
        let quorum = quorum_for(nodes.len());
        // `combinations` over an ordered input yields lexicographic order.
        let combos: Vec<(ComboId, ProjectivePoint)> = nodes
            .iter()
            .combinations(quorum)
            .map(|subset| {
                let id = ComboId::from_members(subset.iter().map(|(n, _)| *n));
                let key = subset
                    .iter()
                    .fold(ProjectivePoint::IDENTITY, |acc, (_, pk)| acc + pk);
                (id, key)
            })
            .collect();
        let combo_index = combos
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (*id, i))
            .collect();
        Ok(Self {
            nodes,
            quorum,
            combos,
            combo_index,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn quorum_size(&self) -> usize {
        self.quorum
    }

    pub fn nodes(&self) -> &[(NodeId, ProjectivePoint)] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|(id, _)| *id)
    }

    pub fn public_key(&self, id: NodeId) -> Option<&ProjectivePoint> {
        self.nodes.iter().find(|(n, _)| *n == id).map(|(_, pk)| pk)
    }

    pub fn node_for_key(&self, key: &ProjectivePoint) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|(_, pk)| pk == key)
            .map(|(id, _)| *id)
    }

    /// 1-based position of `id` in id order; used as the Shamir share index.
    pub fn ordinal(&self, id: NodeId) -> Option<u16> {
        self.nodes
            .iter()
            .position(|(n, _)| *n == id)
            .map(|p| p as u16 + 1)
    }

    pub fn node_at_ordinal(&self, ordinal: u16) -> Option<NodeId> {
        let idx = (ordinal as usize).checked_sub(1)?;
        self.nodes.get(idx).map(|(id, _)| *id)
    }

    /// All quorum combos in lexicographic member order.
    pub fn combos(&self) -> &[(ComboId, ProjectivePoint)] {
        &self.combos
    }

    pub fn aggregate_key(&self, combo: ComboId) -> Option<&ProjectivePoint> {
        self.combo_index.get(&combo).map(|i| &self.combos[*i].1)
    }

    pub fn contains_combo(&self, combo: ComboId) -> bool {
        self.combo_index.contains_key(&combo)
    }

    /// Combos that contain every node in `required`, in lexicographic order.
    pub fn combos_containing<'a>(
        &'a self,
        required: &'a [NodeId],
    ) -> impl Iterator<Item = ComboId> + 'a {
        self.combos
            .iter()
            .map(|(id, _)| *id)
            .filter(move |c| required.iter().all(|r| c.contains(*r)))
    }
}

/// Draws a uniformly random nonzero scalar; test and simulator helper.
pub fn random_scalar<R: rand::RngCore + rand::CryptoRng>(rng: &mut R) -> Scalar {
    loop {
        let s = Scalar::random(&mut *rng);
        if !bool::from(s.is_zero()) {
            return s;
        }
    }
}
