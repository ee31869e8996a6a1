use hmac::{Hmac, Mac};
use rand_core::RngCore;
use sha2::Sha256;
use thiserror::Error;

use super::backend::{self, RawVerify};
use super::{point_from_x_only, sample_scalar, sha256, CryptoError, CurvePoint, EcGroup, SecretScalar};

/// A long-term signing identity.
///
/// Key generation normalizes the public point to even y, so the x-coordinate
/// alone identifies the key (the SOAP IE carries only `s` octets of key).
#[derive(Clone, Debug)]
pub struct EcdsaKeyPair {
    group: EcGroup,
    private_key: SecretScalar,
    public_key: CurvePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("signature must be {expected} octets, got {actual}")]
    MalformedLength { expected: usize, actual: usize },
    #[error("signature component outside [1, n-1]")]
    OutOfRange,
    #[error("public key is not on the curve")]
    BadPublicKey,
    #[error("signature does not verify")]
    Invalid,
}

impl EcdsaKeyPair {
    pub fn generate<R: RngCore + ?Sized>(group: EcGroup, rng: &mut R) -> Self {
        let d = sample_scalar(group, rng);
        Self::from_scalar(group, d.as_bytes()).expect("sampled scalar is in range")
    }

    /// Builds the key pair for `scalar`, replacing it by `n - scalar` when
    /// needed so that the public point has even y.
    pub fn from_scalar(group: EcGroup, scalar: &[u8]) -> Result<Self, CryptoError> {
        let mut d = scalar.to_vec();
        let mut q = backend::mul_base(group.curve, &d).ok_or(CryptoError::InvalidScalar)?;
        if q.y_is_odd() {
            d = backend::negate_scalar(group.curve, &d).ok_or(CryptoError::InvalidScalar)?;
            q = backend::mul_base(group.curve, &d).ok_or(CryptoError::InvalidScalar)?;
        }
        Ok(Self { group, private_key: SecretScalar::new(d), public_key: q })
    }

    pub fn group(&self) -> EcGroup {
        self.group
    }

    pub fn private_key(&self) -> &SecretScalar {
        &self.private_key
    }

    pub fn public_key(&self) -> &CurvePoint {
        &self.public_key
    }

    /// The `s`-octet x-only encoding carried in the SOAP IE.
    pub fn public_key_x(&self) -> &[u8] {
        self.public_key.x()
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        ecdsa_sign(self, message)
    }
}

/// Left-aligns a SHA-256 digest into the group's scalar width: truncates to
/// the leftmost bits when the order is shorter, left-pads otherwise.
fn digest_to_field(group: EcGroup, digest: &[u8; 32]) -> Vec<u8> {
    let s = group.key_size_octets();
    if s <= digest.len() {
        // Every registered order shorter than 256 bits is byte-aligned.
        digest[..s].to_vec()
    } else {
        let mut out = vec![0u8; s - digest.len()];
        out.extend_from_slice(digest);
        out
    }
}

/// Deterministic nonce candidate `counter` derived from the private key and
/// the message digest with HMAC-SHA-256 in counter mode.
fn nonce_candidate(group: EcGroup, d: &[u8], digest: &[u8; 32], counter: u32) -> Vec<u8> {
    let s = group.key_size_octets();
    let mut out = Vec::with_capacity(s + 32);
    let mut block = 0u32;
    while out.len() < s {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(d).expect("hmac accepts any key length");
        mac.update(b"soap-ecdsa-nonce");
        mac.update(digest);
        mac.update(&counter.to_be_bytes());
        mac.update(&block.to_be_bytes());
        out.extend_from_slice(&mac.finalize().into_bytes());
        block += 1;
    }
    out.truncate(s);
    out[0] &= 0xff >> (8 * s - group.order_bits());
    out
}

/// Signs `SHA-256(message)`; returns `r || s`, each `key_size_octets` wide.
pub fn ecdsa_sign(key: &EcdsaKeyPair, message: &[u8]) -> Vec<u8> {
    let group = key.group;
    let digest = sha256(message);
    let e = digest_to_field(group, &digest);
    let d = key.private_key.as_bytes();
    for counter in 0u32.. {
        let k = nonce_candidate(group, d, &digest, counter);
        if let Some((r, s)) = backend::sign_with_nonce(group.curve, d, &e, &k) {
            let mut sig = r;
            sig.extend_from_slice(&s);
            return sig;
        }
    }
    unreachable!("nonce counter exhausted")
}

pub fn ecdsa_verify(
    public_key: &CurvePoint,
    group: EcGroup,
    message: &[u8],
    signature: &[u8],
) -> Result<(), VerifyError> {
    let s_len = group.key_size_octets();
    if signature.len() != 2 * s_len {
        return Err(VerifyError::MalformedLength { expected: 2 * s_len, actual: signature.len() });
    }
    if public_key.x.len() != s_len || public_key.y.len() != s_len {
        return Err(VerifyError::BadPublicKey);
    }
    let e = digest_to_field(group, &sha256(message));
    match backend::verify(group.curve, public_key, &e, &signature[..s_len], &signature[s_len..]) {
        RawVerify::Valid => Ok(()),
        RawVerify::Invalid => Err(VerifyError::Invalid),
        RawVerify::OutOfRange => Err(VerifyError::OutOfRange),
        RawVerify::BadKey => Err(VerifyError::BadPublicKey),
    }
}

/// Verifies against an x-only key as carried in the SOAP IE.
pub fn ecdsa_verify_x_only(key_x: &[u8], group: EcGroup, message: &[u8], signature: &[u8]) -> Result<(), VerifyError> {
    let q = point_from_x_only(group, key_x).map_err(|_| VerifyError::BadPublicKey)?;
    ecdsa_verify(&q, group, message, signature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{registered_groups, registry_lookup, GROUP_P224};
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    #[test]
    fn sign_verify_round_trip_all_groups() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for g in registered_groups() {
            let key = EcdsaKeyPair::generate(g, &mut rng);
            assert!(!key.public_key().y_is_odd());
            let sig = key.sign(b"hello soap");
            assert_eq!(sig.len(), g.signature_len());
            ecdsa_verify(key.public_key(), g, b"hello soap", &sig).unwrap();
            ecdsa_verify_x_only(key.public_key_x(), g, b"hello soap", &sig).unwrap();
        }
    }

    #[test]
    fn flipped_message_bit_is_rejected() {
        let g = registry_lookup(GROUP_P224).unwrap();
        let key = EcdsaKeyPair::generate(g, &mut ChaCha20Rng::seed_from_u64(1));
        let sig = key.sign(b"message");
        assert_eq!(ecdsa_verify(key.public_key(), g, b"messagf", &sig), Err(VerifyError::Invalid));
    }

    #[test]
    fn other_key_is_rejected() {
        let g = registry_lookup(GROUP_P224).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k1 = EcdsaKeyPair::generate(g, &mut rng);
        let k2 = EcdsaKeyPair::generate(g, &mut rng);
        let sig = k1.sign(b"message");
        assert_eq!(ecdsa_verify(k2.public_key(), g, b"message", &sig), Err(VerifyError::Invalid));
    }

    #[test]
    fn signing_is_deterministic() {
        let g = registry_lookup(GROUP_P224).unwrap();
        let key = EcdsaKeyPair::generate(g, &mut ChaCha20Rng::seed_from_u64(3));
        assert_eq!(key.sign(b"abc"), key.sign(b"abc"));
        assert_ne!(key.sign(b"abc"), key.sign(b"abd"));
    }

    #[test]
    fn malformed_signatures_have_distinct_reasons() {
        let g = registry_lookup(GROUP_P224).unwrap();
        let key = EcdsaKeyPair::generate(g, &mut ChaCha20Rng::seed_from_u64(4));
        let sig = key.sign(b"m");
        assert_eq!(
            ecdsa_verify(key.public_key(), g, b"m", &sig[..55]),
            Err(VerifyError::MalformedLength { expected: 56, actual: 55 })
        );
        let mut zero_r = sig.clone();
        zero_r[..28].fill(0);
        assert_eq!(ecdsa_verify(key.public_key(), g, b"m", &zero_r), Err(VerifyError::OutOfRange));
        let mut big_s = sig.clone();
        big_s[28..].fill(0xff);
        assert_eq!(ecdsa_verify(key.public_key(), g, b"m", &big_s), Err(VerifyError::OutOfRange));
    }

    #[test]
    fn digest_alignment() {
        let d = [0x11u8; 32];
        assert_eq!(digest_to_field(registry_lookup(26).unwrap(), &d).len(), 28);
        let wide = digest_to_field(registry_lookup(21).unwrap(), &d);
        assert_eq!(wide.len(), 66);
        assert!(wide[..34].iter().all(|&b| b == 0));
    }
}
