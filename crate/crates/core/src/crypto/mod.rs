//! Group registry, ECDH key agreement and ECDSA over SHA-256.

mod backend;
mod ecdh;
mod ecdsa;
mod group;

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

pub use ecdh::{ecdh_agree, ecdh_generate, EcdhKeyPair};
pub use ecdsa::{ecdsa_sign, ecdsa_verify, ecdsa_verify_x_only, EcdsaKeyPair, VerifyError};
pub use group::{
    registered_groups, registry_lookup, CurvePoint, EcGroup, GROUP_P224, GROUP_P256, GROUP_P384, GROUP_P521,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("group id {0} is not registered")]
    UnknownGroup(u8),
    #[error("point is not a finite point on the group's curve")]
    InvalidPoint,
    #[error("scalar is outside [1, n-1]")]
    InvalidScalar,
}

/// SHA-256 digest.
pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

/// The 32-octet secret produced by the SOAP key agreement, used as the PMK.
#[derive(Clone, PartialEq, Eq, Hash, Zeroize, ZeroizeOnDrop)]
pub struct SharedPsk([u8; 32]);

impl SharedPsk {
    pub const LEN: usize = 32;

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl TryFrom<&[u8]> for SharedPsk {
    type Error = CryptoError;

    fn try_from(value: &[u8]) -> Result<Self, Self::Error> {
        let bytes: [u8; 32] = value.try_into().map_err(|_| CryptoError::InvalidScalar)?;
        Ok(Self(bytes))
    }
}

impl fmt::Debug for SharedPsk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Only a short fingerprint; transcripts and logs must never carry the key.
        write!(f, "SharedPsk({}..)", hex::encode(&sha256(&self.0)[..4]))
    }
}

/// A private scalar, fixed-width big-endian, wiped on drop.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct SecretScalar(Vec<u8>);

impl SecretScalar {
    pub(crate) fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for SecretScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretScalar(..)")
    }
}

/// Draws a scalar uniformly from `[1, n - 1]` by rejection sampling.
pub(crate) fn sample_scalar<R: rand_core::RngCore + ?Sized>(group: EcGroup, rng: &mut R) -> SecretScalar {
    let s = group.key_size_octets();
    let excess = 8 * s - group.order_bits();
    let mut buf = vec![0u8; s];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xff >> excess;
        if backend::scalar_in_range(group.curve, &buf) {
            return SecretScalar::new(buf);
        }
    }
}

/// Checks that `point` is a finite point on `group`'s curve.
pub fn is_on_curve(group: EcGroup, point: &CurvePoint) -> bool {
    point.x.len() == group.key_size_octets()
        && point.y.len() == group.key_size_octets()
        && backend::on_curve(group.curve, point)
}

/// `scalar * G`. Fails if the scalar is zero or not below the group order.
pub fn public_from_scalar(group: EcGroup, scalar: &[u8]) -> Result<CurvePoint, CryptoError> {
    backend::mul_base(group.curve, scalar).ok_or(CryptoError::InvalidScalar)
}

/// Recovers the even-y point with the given x-coordinate.
pub fn point_from_x_only(group: EcGroup, x: &[u8]) -> Result<CurvePoint, CryptoError> {
    backend::decompress_even(group.curve, x).filter(|p| !p.y_is_odd()).ok_or(CryptoError::InvalidPoint)
}
