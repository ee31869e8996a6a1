use serde::{Deserialize, Serialize};

use super::{need, CodecError};

pub const SOAP_PROTOCOL_VERSION: u8 = 0xff;
pub const SOAP_PACKET_TYPE: u8 = 0xff;
pub const SESSION_NONCE_LEN: usize = 8;

/// Field widths of a SOAP Message, fixed by the preceding negotiation.
///
/// The ECDH key width comes from the negotiated group; the signature width
/// from the sender's ECDSA key (the IE's `s`). They differ when the two
/// curves differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapLayout {
    pub ecdh_key_len: usize,
    pub signature_len: usize,
    /// Whether an 8-octet session nonce trails the signature.
    pub nonce_extension: bool,
}

impl SoapLayout {
    pub fn body_len(&self) -> usize {
        self.ecdh_key_len + self.signature_len + if self.nonce_extension { SESSION_NONCE_LEN } else { 0 }
    }

    /// EAPOL header plus packet body.
    pub fn encoded_len(&self) -> usize {
        4 + self.body_len()
    }
}

/// SOAP Message 1 or 2: an EAPOL header with reserved version/type, then the
/// sender's ECDH public key (`x || y`) and its ECDSA signature (`r || s`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapMessage {
    #[serde(with = "hex::serde")]
    pub ecdh_public_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub ecdsa_signature: Vec<u8>,
    pub session_nonce: Option<[u8; SESSION_NONCE_LEN]>,
}

impl SoapMessage {
    pub fn layout(&self) -> SoapLayout {
        SoapLayout {
            ecdh_key_len: self.ecdh_public_key.len(),
            signature_len: self.ecdsa_signature.len(),
            nonce_extension: self.session_nonce.is_some(),
        }
    }

    pub fn packet_body_length(&self) -> usize {
        self.layout().body_len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let body_len = self.packet_body_length();
        if body_len > u16::MAX as usize {
            return Err(CodecError::Oversize { what: "SOAP message body", len: body_len });
        }
        let mut out = Vec::with_capacity(4 + body_len);
        out.push(SOAP_PROTOCOL_VERSION);
        out.push(SOAP_PACKET_TYPE);
        out.extend_from_slice(&(body_len as u16).to_be_bytes());
        out.extend_from_slice(&self.ecdh_public_key);
        out.extend_from_slice(&self.ecdsa_signature);
        if let Some(nonce) = &self.session_nonce {
            out.extend_from_slice(nonce);
        }
        Ok(out)
    }
}

/// Parses a SOAP Message with the widths agreed during negotiation.
///
/// Anything whose version/type is not `0xff/0xff` yields
/// [`CodecError::NotSoap`], so callers can fall through to EAPOL-Key parsing.
pub fn parse_soap_message(bytes: &[u8], layout: SoapLayout) -> Result<SoapMessage, CodecError> {
    need("EAPOL header", bytes, 4)?;
    let (version, packet_type) = (bytes[0], bytes[1]);
    if version != SOAP_PROTOCOL_VERSION || packet_type != SOAP_PACKET_TYPE {
        return Err(CodecError::NotSoap { version, packet_type });
    }
    let declared = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
    let body = &bytes[4..];
    if declared != body.len() {
        return Err(CodecError::LengthMismatch { what: "SOAP packet body", declared, actual: body.len() });
    }
    if declared != layout.body_len() {
        return Err(CodecError::LengthMismatch {
            what: "SOAP negotiated layout",
            declared: layout.body_len(),
            actual: declared,
        });
    }
    let (key, rest) = body.split_at(layout.ecdh_key_len);
    let (sig, rest) = rest.split_at(layout.signature_len);
    let session_nonce = layout.nonce_extension.then(|| rest.try_into().expect("length checked above"));
    Ok(SoapMessage { ecdh_public_key: key.to_vec(), ecdsa_signature: sig.to_vec(), session_nonce })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strict_224() -> SoapLayout {
        SoapLayout { ecdh_key_len: 56, signature_len: 56, nonce_extension: false }
    }

    #[test]
    fn strict_224_body_is_116_octets() {
        let msg = SoapMessage { ecdh_public_key: vec![1; 56], ecdsa_signature: vec![2; 56], session_nonce: None };
        let bytes = msg.encode().unwrap();
        assert_eq!(bytes.len(), 116);
        assert_eq!(&bytes[..4], &[0xff, 0xff, 0x00, 112]);
        assert_eq!(parse_soap_message(&bytes, strict_224()).unwrap(), msg);
    }

    #[test]
    fn nonce_extension_adds_eight() {
        let msg =
            SoapMessage { ecdh_public_key: vec![1; 56], ecdsa_signature: vec![2; 56], session_nonce: Some([9; 8]) };
        let bytes = msg.encode().unwrap();
        assert_eq!(bytes.len(), 124);
        assert_eq!(parse_soap_message(&bytes, msg.layout()).unwrap(), msg);
        assert!(parse_soap_message(&bytes, strict_224()).is_err());
    }

    #[test]
    fn real_eapol_key_is_not_soap() {
        let mut bytes = vec![0x02, 0x03, 0x00, 0x5f];
        bytes.resize(99, 0);
        assert_eq!(
            parse_soap_message(&bytes, strict_224()),
            Err(CodecError::NotSoap { version: 0x02, packet_type: 0x03 })
        );
        let mut half = vec![0xff, 0x03, 0, 0];
        half.resize(116, 0);
        assert!(matches!(parse_soap_message(&half, strict_224()), Err(CodecError::NotSoap { .. })));
    }

    #[test]
    fn length_mismatches_are_malformed() {
        let msg = SoapMessage { ecdh_public_key: vec![1; 56], ecdsa_signature: vec![2; 56], session_nonce: None };
        let bytes = msg.encode().unwrap();
        assert!(parse_soap_message(&bytes[..115], strict_224()).is_err());
        let mut lying = bytes.clone();
        lying[3] = 111;
        assert!(parse_soap_message(&lying, strict_224()).is_err());
        assert!(parse_soap_message(&bytes[..3], strict_224()).is_err());
    }

    fn arb_msg() -> impl Strategy<Value = SoapMessage> {
        (
            prop::sample::select(vec![56usize, 64, 96, 132]),
            prop::sample::select(vec![56usize, 64, 96, 132]),
            any::<Option<[u8; 8]>>(),
        )
            .prop_flat_map(|(k, s, n)| {
                (prop::collection::vec(any::<u8>(), k), prop::collection::vec(any::<u8>(), s), Just(n)).prop_map(
                    |(ecdh_public_key, ecdsa_signature, session_nonce)| SoapMessage {
                        ecdh_public_key,
                        ecdsa_signature,
                        session_nonce,
                    },
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn message_round_trip(msg in arb_msg()) {
            let bytes = msg.encode().unwrap();
            prop_assert_eq!(parse_soap_message(&bytes, msg.layout()).unwrap(), msg);
        }

        #[test]
        fn message_parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
            let _ = parse_soap_message(&bytes, strict_224());
        }
    }
}
