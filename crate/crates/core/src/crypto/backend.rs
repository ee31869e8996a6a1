//! Thin byte-level adapters over the RustCrypto prime-order curve crates.
//!
//! Everything crossing this boundary is a fixed-width big-endian octet
//! string; the rest of the crate never touches curve-crate types.

use super::group::{Curve, CurvePoint};

/// Outcome of checking an `(r, s)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RawVerify {
    Valid,
    Invalid,
    OutOfRange,
    BadKey,
}

macro_rules! curve_ops {
    ($name:ident, $krate:ident, $curve:ty) => {
        pub(crate) mod $name {
            #![allow(unused_imports)]
            use super::RawVerify;
            use crate::crypto::group::CurvePoint;
            use $krate::elliptic_curve::{
                ff::{Field as _, PrimeField},
                ops::Reduce,
                point::{AffineCoordinates, DecompressPoint},
                sec1::{FromEncodedPoint, ToEncodedPoint},
                subtle::Choice,
                Curve,
            };
            use $krate::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint, Scalar};

            type Uint = <$curve as Curve>::Uint;

            fn field_bytes(bytes: &[u8]) -> Option<FieldBytes> {
                let mut fb = FieldBytes::default();
                if bytes.len() != fb.len() {
                    return None;
                }
                fb.copy_from_slice(bytes);
                Some(fb)
            }

            /// Scalar in `[1, n - 1]`, or `None`.
            fn scalar(bytes: &[u8]) -> Option<Scalar> {
                let fb = field_bytes(bytes)?;
                let s: Option<Scalar> = Scalar::from_repr(fb).into();
                s.filter(|s| !bool::from(s.is_zero()))
            }

            fn reduce(bytes: &[u8]) -> Option<Scalar> {
                field_bytes(bytes).map(|fb| <Scalar as Reduce<Uint>>::reduce_bytes(&fb))
            }

            fn affine(p: &CurvePoint) -> Option<AffinePoint> {
                let x = field_bytes(&p.x)?;
                let y = field_bytes(&p.y)?;
                let ep = EncodedPoint::from_affine_coordinates(&x, &y, false);
                AffinePoint::from_encoded_point(&ep).into()
            }

            fn to_point(a: &AffinePoint) -> Option<CurvePoint> {
                let ep = a.to_encoded_point(false);
                Some(CurvePoint { x: ep.x()?.to_vec(), y: ep.y()?.to_vec() })
            }

            pub(crate) fn scalar_in_range(d: &[u8]) -> bool {
                scalar(d).is_some()
            }

            pub(crate) fn negate_scalar(d: &[u8]) -> Option<Vec<u8>> {
                scalar(d).map(|s| (-s).to_repr().to_vec())
            }

            pub(crate) fn mul_base(d: &[u8]) -> Option<CurvePoint> {
                let k = scalar(d)?;
                to_point(&(ProjectivePoint::GENERATOR * k).to_affine())
            }

            pub(crate) fn on_curve(p: &CurvePoint) -> bool {
                affine(p).is_some()
            }

            /// x-coordinate of `d * peer`; `None` if `peer` is not a finite
            /// point on the curve or the product is the identity.
            pub(crate) fn mul_point_x(d: &[u8], peer: &CurvePoint) -> Option<Vec<u8>> {
                let k = scalar(d)?;
                let p = affine(peer)?;
                let shared = (ProjectivePoint::from(p) * k).to_affine();
                to_point(&shared).map(|pt| pt.x)
            }

            pub(crate) fn decompress_even(x: &[u8]) -> Option<CurvePoint> {
                let fb = field_bytes(x)?;
                let a: Option<AffinePoint> = AffinePoint::decompress(&fb, Choice::from(0)).into();
                to_point(&a?)
            }

            /// One signing attempt with nonce `k`; `None` when `k` is out of
            /// range or the attempt degenerates to `r = 0` or `s = 0`.
            pub(crate) fn sign_with_nonce(d: &[u8], e: &[u8], k: &[u8]) -> Option<(Vec<u8>, Vec<u8>)> {
                let d = scalar(d)?;
                let k = scalar(k)?;
                let e = reduce(e)?;
                let big_r = (ProjectivePoint::GENERATOR * k).to_affine();
                let r = <Scalar as Reduce<Uint>>::reduce_bytes(&big_r.x());
                if bool::from(r.is_zero()) {
                    return None;
                }
                let k_inv: Option<Scalar> = k.invert().into();
                let s = k_inv? * (e + r * d);
                if bool::from(s.is_zero()) {
                    return None;
                }
                Some((r.to_repr().to_vec(), s.to_repr().to_vec()))
            }

            pub(crate) fn verify(q: &CurvePoint, e: &[u8], r: &[u8], s: &[u8]) -> RawVerify {
                let (Some(r), Some(s)) = (scalar(r), scalar(s)) else {
                    return RawVerify::OutOfRange;
                };
                let Some(q) = affine(q) else {
                    return RawVerify::BadKey;
                };
                let Some(e) = reduce(e) else {
                    return RawVerify::Invalid;
                };
                let Some(w) = Option::<Scalar>::from(s.invert()) else {
                    return RawVerify::OutOfRange;
                };
                let u1 = e * w;
                let u2 = r * w;
                let big_r = (ProjectivePoint::GENERATOR * u1 + ProjectivePoint::from(q) * u2).to_affine();
                if to_point(&big_r).is_none() {
                    return RawVerify::Invalid;
                }
                let v = <Scalar as Reduce<Uint>>::reduce_bytes(&big_r.x());
                if v == r {
                    RawVerify::Valid
                } else {
                    RawVerify::Invalid
                }
            }
        }
    };
}

curve_ops!(p224_ops, p224, p224::NistP224);
curve_ops!(p256_ops, p256, p256::NistP256);
curve_ops!(p384_ops, p384, p384::NistP384);
curve_ops!(p521_ops, p521, p521::NistP521);

macro_rules! dispatch {
    ($curve:expr, $f:ident($($arg:expr),*)) => {
        match $curve {
            Curve::P224 => p224_ops::$f($($arg),*),
            Curve::P256 => p256_ops::$f($($arg),*),
            Curve::P384 => p384_ops::$f($($arg),*),
            Curve::P521 => p521_ops::$f($($arg),*),
        }
    };
}

pub(crate) fn scalar_in_range(curve: Curve, d: &[u8]) -> bool {
    dispatch!(curve, scalar_in_range(d))
}

pub(crate) fn negate_scalar(curve: Curve, d: &[u8]) -> Option<Vec<u8>> {
    dispatch!(curve, negate_scalar(d))
}

pub(crate) fn mul_base(curve: Curve, d: &[u8]) -> Option<CurvePoint> {
    dispatch!(curve, mul_base(d))
}

pub(crate) fn on_curve(curve: Curve, p: &CurvePoint) -> bool {
    dispatch!(curve, on_curve(p))
}

pub(crate) fn mul_point_x(curve: Curve, d: &[u8], peer: &CurvePoint) -> Option<Vec<u8>> {
    dispatch!(curve, mul_point_x(d, peer))
}

pub(crate) fn decompress_even(curve: Curve, x: &[u8]) -> Option<CurvePoint> {
    dispatch!(curve, decompress_even(x))
}

pub(crate) fn sign_with_nonce(curve: Curve, d: &[u8], e: &[u8], k: &[u8]) -> Option<(Vec<u8>, Vec<u8>)> {
    dispatch!(curve, sign_with_nonce(d, e, k))
}

pub(crate) fn verify(curve: Curve, q: &CurvePoint, e: &[u8], r: &[u8], s: &[u8]) -> RawVerify {
    dispatch!(curve, verify(q, e, r, s))
}
