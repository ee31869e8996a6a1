use rand_core::RngCore;

use super::{backend, is_on_curve, sample_scalar, sha256, CryptoError, CurvePoint, EcGroup, SecretScalar, SharedPsk};

/// An ephemeral Diffie-Hellman key pair on a registered group.
#[derive(Clone, Debug)]
pub struct EcdhKeyPair {
    group: EcGroup,
    private_scalar: SecretScalar,
    public_point: CurvePoint,
}

impl EcdhKeyPair {
    /// Rebuilds a key pair from a known scalar.
    pub fn from_scalar(group: EcGroup, scalar: &[u8]) -> Result<Self, CryptoError> {
        let public_point = backend::mul_base(group.curve, scalar).ok_or(CryptoError::InvalidScalar)?;
        Ok(Self { group, private_scalar: SecretScalar::new(scalar.to_vec()), public_point })
    }

    pub fn group(&self) -> EcGroup {
        self.group
    }

    pub fn private_scalar(&self) -> &SecretScalar {
        &self.private_scalar
    }

    pub fn public_point(&self) -> &CurvePoint {
        &self.public_point
    }
}

pub fn ecdh_generate<R: RngCore + ?Sized>(group: EcGroup, rng: &mut R) -> EcdhKeyPair {
    let private_scalar = sample_scalar(group, rng);
    let public_point = backend::mul_base(group.curve, private_scalar.as_bytes()).expect("sampled scalar is in range");
    EcdhKeyPair { group, private_scalar, public_point }
}

/// `SHA-256(x(own * peer))` with x encoded as an `s`-octet big-endian integer.
pub fn ecdh_agree(own: &EcdhKeyPair, peer_public: &CurvePoint) -> Result<SharedPsk, CryptoError> {
    if !is_on_curve(own.group, peer_public) {
        return Err(CryptoError::InvalidPoint);
    }
    let x = backend::mul_point_x(own.group.curve, own.private_scalar.as_bytes(), peer_public)
        .ok_or(CryptoError::InvalidPoint)?;
    Ok(SharedPsk::from_bytes(sha256(&x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{registered_groups, registry_lookup, GROUP_P224};
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn p224() -> EcGroup {
        registry_lookup(GROUP_P224).unwrap()
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = ecdh_generate(p224(), &mut ChaCha20Rng::seed_from_u64(7));
        let b = ecdh_generate(p224(), &mut ChaCha20Rng::seed_from_u64(7));
        assert_eq!(a.private_scalar(), b.private_scalar());
        assert_eq!(a.public_point(), b.public_point());
        let c = ecdh_generate(p224(), &mut ChaCha20Rng::seed_from_u64(8));
        assert_ne!(a.private_scalar(), c.private_scalar());
    }

    #[test]
    fn public_points_are_on_curve_and_fixed_width() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for g in registered_groups() {
            for _ in 0..20 {
                let k = ecdh_generate(g, &mut rng);
                assert!(is_on_curve(g, k.public_point()));
                assert_eq!(k.public_point().to_bytes().len(), 2 * g.key_size_octets());
            }
        }
    }

    #[test]
    fn agreement_is_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for g in registered_groups() {
            let client = ecdh_generate(g, &mut rng);
            let ap = ecdh_generate(g, &mut rng);
            let k1 = ecdh_agree(&client, ap.public_point()).unwrap();
            let k2 = ecdh_agree(&ap, client.public_point()).unwrap();
            assert_eq!(k1, k2);
        }
    }

    #[test]
    fn off_curve_peer_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let own = ecdh_generate(p224(), &mut rng);
        let mut bad = own.public_point().clone();
        bad.y[27] ^= 1;
        assert_eq!(ecdh_agree(&own, &bad), Err(CryptoError::InvalidPoint));
        let zero = CurvePoint::from_coordinates(vec![0; 28], vec![0; 28]);
        assert_eq!(ecdh_agree(&own, &zero), Err(CryptoError::InvalidPoint));
        let short = CurvePoint::from_coordinates(vec![1; 27], vec![1; 28]);
        assert_eq!(ecdh_agree(&own, &short), Err(CryptoError::InvalidPoint));
    }
}
