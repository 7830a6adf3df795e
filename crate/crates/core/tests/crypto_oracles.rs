//! Cross-checks the curve backend against a from-scratch affine
//! implementation of secp256k1 over arbitrary-precision integers.

use mokka::crypto::{
    encode_point, keygen, schnorr_aggregate, schnorr_partial_sign, schnorr_verify, ClusterKeyring,
    KeyPair, NodeId,
};
use num_bigint::BigUint;

struct Curve {
    p: BigUint,
    gx: BigUint,
    gy: BigUint,
}

type Affine = Option<(BigUint, BigUint)>;

impl Curve {
    fn secp256k1() -> Self {
        let h = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).unwrap();
        Curve {
            p: h("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F"),
            gx: h("79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798"),
            gy: h("483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8"),
        }
    }

    fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.p) - (b % &self.p)) % &self.p
    }

    fn add(&self, a: &Affine, b: &Affine) -> Affine {
        let (Some((x1, y1)), Some((x2, y2))) = (a, b) else {
            return a.clone().or_else(|| b.clone());
        };
        let lambda = if x1 == x2 {
            if (y1 + y2) % &self.p == BigUint::from(0u32) {
                return None;
            }
            let num = (BigUint::from(3u32) * x1 * x1) % &self.p;
            num * self.inv(&((BigUint::from(2u32) * y1) % &self.p)) % &self.p
        } else {
            self.sub(y2, y1) * self.inv(&self.sub(x2, x1)) % &self.p
        };
        let x3 = self.sub(&self.sub(&(&lambda * &lambda % &self.p), x1), x2);
        let y3 = self.sub(&(&lambda * self.sub(x1, &x3) % &self.p), y1);
        Some((x3, y3))
    }

    fn mul(&self, k: &BigUint) -> Affine {
        let mut acc: Affine = None;
        let mut base: Affine = Some((self.gx.clone(), self.gy.clone()));
        for i in 0..k.bits() {
            if k.bit(i) {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
        }
        acc
    }

    fn compress(&self, pt: &Affine) -> [u8; 33] {
        let mut out = [0u8; 33];
        if let Some((x, y)) = pt {
            out[0] = if y.bit(0) { 3 } else { 2 };
            let xb = x.to_bytes_be();
            out[33 - xb.len()..].copy_from_slice(&xb);
        }
        out
    }
}

#[test]
fn keygen_public_matches_independent_scalar_mult() {
    let curve = Curve::secp256k1();
    for seed in ["node-0", "node-1", "node-2", "a much longer seed string"] {
        let kp = keygen(seed.as_bytes()).unwrap();
        let secret = BigUint::from_bytes_be(&kp.secret_bytes());
        let expected = curve.compress(&curve.mul(&secret));
        assert_eq!(encode_point(kp.public()), expected, "seed {seed}");
    }
}

#[test]
fn aggregate_keys_match_independent_point_sums() {
    let curve = Curve::secp256k1();
    let kps: Vec<KeyPair> = (0..5)
        .map(|i| keygen(format!("node-{i}").as_bytes()).unwrap())
        .collect();
    let keys: Vec<_> = kps
        .iter()
        .enumerate()
        .map(|(i, kp)| (NodeId(i as u16), *kp.public()))
        .collect();
    let kr = ClusterKeyring::build(&keys).unwrap();
    let affine: Vec<Affine> = kps
        .iter()
        .map(|kp| curve.mul(&BigUint::from_bytes_be(&kp.secret_bytes())))
        .collect();
    for (combo, agg) in kr.combos() {
        let sum = combo
            .members()
            .fold(None, |acc, m| curve.add(&acc, &affine[m.0 as usize]));
        assert_eq!(encode_point(agg), curve.compress(&sum), "combo {combo}");
    }
}

#[test]
fn multisig_round_trip_is_bit_stable() {
    let kps: Vec<KeyPair> = (0..3)
        .map(|i| keygen(format!("node-{i}").as_bytes()).unwrap())
        .collect();
    let keys: Vec<_> = kps
        .iter()
        .enumerate()
        .map(|(i, kp)| (NodeId(i as u16), *kp.public()))
        .collect();
    let run = || {
        let kr = ClusterKeyring::build(&keys).unwrap();
        let combo = kr.combos()[0].0;
        let parts: Vec<_> = combo
            .members()
            .map(|m| schnorr_partial_sign(&kps[m.0 as usize], &kr, combo, b"msg").unwrap())
            .collect();
        let (r, s) = schnorr_aggregate(&parts).unwrap();
        assert!(schnorr_verify(&kr, combo, b"msg", &r, &s));
        (encode_point(&r), s.to_bytes())
    };
    assert_eq!(run(), run());
}
