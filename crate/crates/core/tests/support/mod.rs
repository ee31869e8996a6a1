//! Reference elliptic-curve arithmetic over the NIST prime curves: affine
//! double-and-add on big integers, sharing no code with the crate.

#![allow(dead_code)]

use num_bigint::BigUint;

pub struct Curve {
    pub id: u8,
    p: BigUint,
    b: BigUint,
    pub g: (BigUint, BigUint),
    len: usize,
}

fn h(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).unwrap()
}

pub fn curves() -> Vec<Curve> {
    vec![
        Curve {
            id: 26,
            p: h("ffffffffffffffffffffffffffffffff000000000000000000000001"),
            b: h("b4050a850c04b3abf54132565044b0b7d7bfd8ba270b39432355ffb4"),
            g: (
                h("b70e0cbd6bb4bf7f321390b94a03c1d356c21122343280d6115c1d21"),
                h("bd376388b5f723fb4c22dfe6cd4375a05a07476444d5819985007e34"),
            ),
            len: 28,
        },
        Curve {
            id: 19,
            p: h("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff"),
            b: h("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
            g: (
                h("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
                h("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
            ),
            len: 32,
        },
        Curve {
            id: 20,
            p: h("fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffeffffffff0000000000000000ffffffff"),
            b: h("b3312fa7e23ee7e4988e056be3f82d19181d9c6efe8141120314088f5013875ac656398d8a2ed19d2a85c8edd3ec2aef"),
            g: (
                h("aa87ca22be8b05378eb1c71ef320ad746e1d3b628ba79b9859f741e082542a385502f25dbf55296c3a545e3872760ab7"),
                h("3617de4a96262c6f5d9e98bf9292dc29f8f41dbd289a147ce9da3113b5f0b8c00a60b1ce1d7e819d7a431d7c90ea0e5f"),
            ),
            len: 48,
        },
        Curve {
            id: 21,
            p: (BigUint::from(1u8) << 521) - 1u8,
            b: h("0051953eb9618e1c9a1f929a21a0b68540eea2da725b99b315f3b8b489918ef109e156193951ec7e937b1652c0bd3bb1bf073573df883d2c34f1ef451fd46b503f00"),
            g: (
                h("00c6858e06b70404e9cd9e3ecb662395b4429c648139053fb521f828af606b4d3dbaa14b5e77efe75928fe1dc127a2ffa8de3348b3c1856a429bf97e7e31c2e5bd66"),
                h("011839296a789a3bc0045c8a5fb42c7d1bd998f54449579b446817afbd17273e662c97ee72995ef42640c550b9013fad0761353c7086a272c24088be94769fd16650"),
            ),
            len: 66,
        },
    ]
}

pub type Point = Option<(BigUint, BigUint)>;

impl Curve {
    fn sub(&self, x: &BigUint, y: &BigUint) -> BigUint {
        (x + &self.p - y) % &self.p
    }

    fn inv(&self, x: &BigUint) -> BigUint {
        x.modpow(&(&self.p - 2u8), &self.p)
    }

    pub fn on_curve(&self, (x, y): &(BigUint, BigUint)) -> bool {
        let rhs = (x * x * x + &self.b + &self.p * 3u8 - x * 3u8 % &self.p) % &self.p;
        (y * y) % &self.p == rhs
    }

    /// y^2 = x^3 - 3x + b, affine.
    pub fn add(&self, a: &Point, b: &Point) -> Point {
        let (Some((x1, y1)), Some((x2, y2))) = (a, b) else { return a.clone().or(b.clone()) };
        let lambda = if x1 == x2 {
            if (y1 + y2) % &self.p == BigUint::ZERO {
                return None;
            }
            let num = (x1 * x1 * 3u8 + &self.p - 3u8) % &self.p;
            num * self.inv(&(y1 * 2u8 % &self.p)) % &self.p
        } else {
            self.sub(y2, y1) * self.inv(&self.sub(x2, x1)) % &self.p
        };
        let x3 = self.sub(&self.sub(&(&lambda * &lambda % &self.p), x1), x2);
        let y3 = self.sub(&(&lambda * self.sub(x1, &x3) % &self.p), y1);
        Some((x3, y3))
    }

    pub fn mul(&self, k: &BigUint, p: &Point) -> Point {
        let mut acc: Point = None;
        for i in (0..k.bits()).rev() {
            acc = self.add(&acc, &acc);
            if k.bit(i) {
                acc = self.add(&acc, p);
            }
        }
        acc
    }

    pub fn encode(&self, v: &BigUint) -> Vec<u8> {
        let b = v.to_bytes_be();
        let mut out = vec![0u8; self.len - b.len()];
        out.extend_from_slice(&b);
        out
    }
}
