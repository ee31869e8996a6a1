use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Prime-order curves backing the registered groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Curve {
    P224,
    P256,
    P384,
    P521,
}

/// A registered elliptic-curve group, identified on the wire by one octet.
///
/// Identifiers follow the IKEv2 Diffie-Hellman transform numbers so that the
/// registry is an existing one rather than an invented table.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EcGroup {
    id: u8,
    name: &'static str,
    key_size_octets: usize,
    order_bits: usize,
    order_hex: &'static str,
    pub(crate) curve: Curve,
}

impl EcGroup {
    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Width of a field element / scalar in octets (the IE's `s`).
    pub fn key_size_octets(&self) -> usize {
        self.key_size_octets
    }

    pub fn order_bits(&self) -> usize {
        self.order_bits
    }

    /// Order of the base point. Private scalars live in `[1, order - 1]`.
    pub fn order(&self) -> BigUint {
        BigUint::parse_bytes(self.order_hex.as_bytes(), 16).expect("registry order is valid hex")
    }

    /// Length of a raw `r || s` signature for keys on this group.
    pub fn signature_len(&self) -> usize {
        2 * self.key_size_octets
    }

    /// Length of an uncompressed `x || y` point on the wire.
    pub fn point_len(&self) -> usize {
        2 * self.key_size_octets
    }
}

impl fmt::Debug for EcGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EcGroup({} {}, s={})", self.id, self.name, self.key_size_octets)
    }
}

impl fmt::Display for EcGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.name)
    }
}

impl Serialize for EcGroup {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.id)
    }
}

impl<'de> Deserialize<'de> for EcGroup {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let id = u8::deserialize(deserializer)?;
        registry_lookup(id).map_err(serde::de::Error::custom)
    }
}

pub const GROUP_P224: u8 = 26;
pub const GROUP_P256: u8 = 19;
pub const GROUP_P384: u8 = 20;
pub const GROUP_P521: u8 = 21;

static REGISTRY: [EcGroup; 4] = [
    EcGroup {
        id: GROUP_P256,
        name: "secp256r1",
        key_size_octets: 32,
        order_bits: 256,
        order_hex: "ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551",
        curve: Curve::P256,
    },
    EcGroup {
        id: GROUP_P384,
        name: "secp384r1",
        key_size_octets: 48,
        order_bits: 384,
        order_hex: "ffffffffffffffffffffffffffffffffffffffffffffffffc7634d81f4372ddf581a0db248b0a77aecec196accc52973",
        curve: Curve::P384,
    },
    EcGroup {
        id: GROUP_P521,
        name: "secp521r1",
        key_size_octets: 66,
        order_bits: 521,
        order_hex: "01fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffa51868783bf2f966b7fcc0148f709a5d03bb5c9b8899c47aebb6fb71e91386409",
        curve: Curve::P521,
    },
    EcGroup {
        id: GROUP_P224,
        name: "secp224r1",
        key_size_octets: 28,
        order_bits: 224,
        order_hex: "ffffffffffffffffffffffffffff16a2e0b8f03e13dd29455c5c2a3d",
        curve: Curve::P224,
    },
];

pub fn registry_lookup(group_id: u8) -> Result<EcGroup, CryptoError> {
    REGISTRY.iter().find(|g| g.id == group_id).copied().ok_or(CryptoError::UnknownGroup(group_id))
}

/// All registered groups, ordered by ascending id.
pub fn registered_groups() -> Vec<EcGroup> {
    let mut groups = REGISTRY.to_vec();
    groups.sort_by_key(|g| g.id);
    groups
}

/// An affine curve point in fixed-width big-endian coordinates.
///
/// The point at infinity has no representation here; every `CurvePoint` that
/// came out of this crate's arithmetic is a finite point.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CurvePoint {
    pub(crate) x: Vec<u8>,
    pub(crate) y: Vec<u8>,
}

impl CurvePoint {
    /// Builds a point from raw coordinates without checking curve membership.
    pub fn from_coordinates(x: Vec<u8>, y: Vec<u8>) -> Self {
        Self { x, y }
    }

    /// Splits an `x || y` octet string for `group`. Curve membership is checked
    /// later by whichever operation consumes the point.
    pub fn from_bytes(group: EcGroup, bytes: &[u8]) -> Result<Self, CryptoError> {
        let s = group.key_size_octets();
        if bytes.len() != 2 * s {
            return Err(CryptoError::InvalidPoint);
        }
        Ok(Self { x: bytes[..s].to_vec(), y: bytes[s..].to_vec() })
    }

    pub fn x(&self) -> &[u8] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn y_is_odd(&self) -> bool {
        self.y.last().is_some_and(|b| b & 1 == 1)
    }

    /// `x || y`, each coordinate exactly `s` octets.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.x.len() + self.y.len());
        out.extend_from_slice(&self.x);
        out.extend_from_slice(&self.y);
        out
    }
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurvePoint(x={}, y={})", hex::encode(&self.x), hex::encode(&self.y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_known_and_unknown_ids() {
        let g = registry_lookup(26).unwrap();
        assert_eq!(g.key_size_octets(), 28);
        assert_eq!(g.order_bits(), 224);
        assert_eq!(registry_lookup(19).unwrap().key_size_octets(), 32);
        assert_eq!(registry_lookup(20).unwrap().key_size_octets(), 48);
        assert_eq!(registry_lookup(21).unwrap().key_size_octets(), 66);
        assert!(matches!(registry_lookup(0), Err(CryptoError::UnknownGroup(0))));
        assert!(registry_lookup(255).is_err());
    }

    #[test]
    fn registry_invariants() {
        let groups = registered_groups();
        let mut ids: Vec<u8> = groups.iter().map(|g| g.id()).collect();
        ids.dedup();
        assert_eq!(ids.len(), groups.len());
        for g in groups {
            assert!(g.key_size_octets() > 0);
            assert!(g.order() > BigUint::from(3u8));
            assert_eq!(g.order().bits() as usize, g.order_bits());
            assert!(g.order_bits() <= 8 * g.key_size_octets());
        }
    }

    #[test]
    fn group_serializes_as_its_id() {
        let g = registry_lookup(26).unwrap();
        assert_eq!(serde_json::to_string(&g).unwrap(), "26");
        let back: EcGroup = serde_json::from_str("26").unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<EcGroup>("7").is_err());
    }
}
