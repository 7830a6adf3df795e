//! Keyset files: TOML with one `[[node]]` table per member and one
//! `[[combo]]` table per quorum combination.
//!
//! ```toml
//! seed = "demo"
//! nodes = 3
//! quorum = 2
//!
//! [[node]]
//! id = 0
//! public = "02…"   # compressed SEC1, hex
//! secret = "…"     # optional; verification only needs public keys
//!
//! [[combo]]
//! members = [0, 1]
//! aggregate_key = "03…"
//! ```

use serde::{Deserialize, Serialize};

use crate::crypto::{
    cluster_keys, decode_point, encode_point, ClusterKeyring, ComboId, CryptoError, NodeId,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEntry {
    pub id: NodeId,
    pub public: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComboEntry {
    pub members: Vec<NodeId>,
    pub aggregate_key: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyset {
    pub seed: String,
    pub nodes: usize,
    pub quorum: usize,
    pub node: Vec<KeyEntry>,
    pub combo: Vec<ComboEntry>,
}

impl Keyset {
    pub fn generate(seed: &str, n: usize) -> Result<Self, CryptoError> {
        let (keypairs, keyring) = cluster_keys(seed, n)?;
        let node = keypairs
            .iter()
            .zip(keyring.nodes())
            .map(|(kp, (id, public))| KeyEntry {
                id: *id,
                public: hex::encode(encode_point(public)),
                secret: Some(hex::encode(kp.secret_bytes())),
            })
            .collect();
        let combo = keyring
            .combos()
            .iter()
            .map(|(combo, key)| ComboEntry {
                members: combo.members().collect(),
                aggregate_key: hex::encode(encode_point(key)),
            })
            .collect();
        Ok(Keyset {
            seed: seed.to_string(),
            nodes: n,
            quorum: keyring.quorum_size(),
            node,
            combo,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("keyset serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    /// Rebuilds the keyring from the public keys and checks every listed
    /// combo against it.
    pub fn keyring(&self) -> Result<ClusterKeyring, String> {
        let keys = self
            .node
            .iter()
            .map(|entry| {
                let bytes = hex::decode(&entry.public)
                    .map_err(|e| format!("node {}: public key: {e}", entry.id))?;
                let point = decode_point(&bytes)
                    .map_err(|e| format!("node {}: public key: {e}", entry.id))?;
                Ok((entry.id, point))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let keyring = ClusterKeyring::build(&keys).map_err(|e| e.to_string())?;
        if keyring.len() != self.nodes || keyring.quorum_size() != self.quorum {
            return Err("node count or quorum does not match the key list".into());
        }
        if self.combo.len() != keyring.combos().len() {
            return Err(format!(
                "expected {} combos, file lists {}",
                keyring.combos().len(),
                self.combo.len()
            ));
        }
        for entry in &self.combo {
            let combo = ComboId::from_members(entry.members.iter().copied());
            let expected = keyring
                .aggregate_key(combo)
                .ok_or_else(|| format!("combo {combo} is not a quorum"))?;
            if hex::encode(encode_point(expected)) != entry.aggregate_key {
                return Err(format!("combo {combo} has the wrong aggregate key"));
            }
        }
        Ok(keyring)
    }
}
