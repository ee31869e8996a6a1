use serde::{Deserialize, Serialize};

use super::{need, CodecError};

pub const EAPOL_VERSION: u8 = 0x02;
pub const EAPOL_KEY_PACKET_TYPE: u8 = 0x03;
/// Descriptor type, key info through key data length.
pub const EAPOL_KEY_BODY_PREFIX: usize = 95;
const RSN_DESCRIPTOR: u8 = 0x02;
const MIC_OFFSET: usize = 4 + 1 + 2 + 2 + 8 + 32 + 16 + 8 + 8;

/// Key Information bits (IEEE 802.11 EAPOL-Key frame).
pub mod key_info {
    /// HMAC-SHA1-128 MIC / AES key wrap.
    pub const VERSION_HMAC_SHA1: u16 = 0x0002;
    pub const VERSION_MASK: u16 = 0x0007;
    pub const PAIRWISE: u16 = 0x0008;
    pub const INSTALL: u16 = 0x0040;
    pub const ACK: u16 = 0x0080;
    pub const MIC: u16 = 0x0100;
    pub const SECURE: u16 = 0x0200;
    pub const ENCRYPTED_KEY_DATA: u16 = 0x1000;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EapolKeyFrame {
    pub descriptor_type: u8,
    pub key_info: u16,
    pub key_length: u16,
    pub replay_counter: u64,
    #[serde(with = "hex::serde")]
    pub key_nonce: [u8; 32],
    #[serde(with = "hex::serde")]
    pub key_iv: [u8; 16],
    pub key_rsc: u64,
    pub key_id: u64,
    #[serde(with = "hex::serde")]
    pub key_mic: [u8; 16],
    #[serde(with = "hex::serde")]
    pub key_data: Vec<u8>,
}

impl Default for EapolKeyFrame {
    fn default() -> Self {
        Self {
            descriptor_type: RSN_DESCRIPTOR,
            key_info: 0,
            key_length: 0,
            replay_counter: 0,
            key_nonce: [0; 32],
            key_iv: [0; 16],
            key_rsc: 0,
            key_id: 0,
            key_mic: [0; 16],
            key_data: Vec::new(),
        }
    }
}

impl EapolKeyFrame {
    pub fn has(&self, bits: u16) -> bool {
        self.key_info & bits == bits
    }

    pub fn encoded_len(&self) -> usize {
        4 + EAPOL_KEY_BODY_PREFIX + self.key_data.len()
    }

    /// EAPOL header followed by the key descriptor.
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let body_len = EAPOL_KEY_BODY_PREFIX + self.key_data.len();
        if body_len > u16::MAX as usize {
            return Err(CodecError::Oversize { what: "EAPOL-Key body", len: body_len });
        }
        let mut out = Vec::with_capacity(4 + body_len);
        out.push(EAPOL_VERSION);
        out.push(EAPOL_KEY_PACKET_TYPE);
        out.extend_from_slice(&(body_len as u16).to_be_bytes());
        out.push(self.descriptor_type);
        out.extend_from_slice(&self.key_info.to_be_bytes());
        out.extend_from_slice(&self.key_length.to_be_bytes());
        out.extend_from_slice(&self.replay_counter.to_be_bytes());
        out.extend_from_slice(&self.key_nonce);
        out.extend_from_slice(&self.key_iv);
        out.extend_from_slice(&self.key_rsc.to_be_bytes());
        out.extend_from_slice(&self.key_id.to_be_bytes());
        out.extend_from_slice(&self.key_mic);
        out.extend_from_slice(&(self.key_data.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.key_data);
        Ok(out)
    }

    /// Encoding with the MIC field zeroed: the input to MIC computation.
    pub fn encode_for_mic(&self) -> Result<Vec<u8>, CodecError> {
        let mut bytes = self.encode()?;
        bytes[MIC_OFFSET..MIC_OFFSET + 16].fill(0);
        Ok(bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CodecError> {
        need("EAPOL header", bytes, 4)?;
        if bytes[1] != EAPOL_KEY_PACKET_TYPE {
            return Err(CodecError::Malformed("not an EAPOL-Key packet"));
        }
        let declared = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
        let body = &bytes[4..];
        if declared != body.len() {
            return Err(CodecError::LengthMismatch { what: "EAPOL body", declared, actual: body.len() });
        }
        need("EAPOL-Key descriptor", body, EAPOL_KEY_BODY_PREFIX)?;
        let u16_at = |o: usize| u16::from_be_bytes([body[o], body[o + 1]]);
        let u64_at = |o: usize| u64::from_be_bytes(body[o..o + 8].try_into().unwrap());
        let key_data_len = u16_at(93) as usize;
        let key_data = &body[EAPOL_KEY_BODY_PREFIX..];
        if key_data.len() != key_data_len {
            return Err(CodecError::LengthMismatch {
                what: "EAPOL-Key data",
                declared: key_data_len,
                actual: key_data.len(),
            });
        }
        Ok(Self {
            descriptor_type: body[0],
            key_info: u16_at(1),
            key_length: u16_at(3),
            replay_counter: u64_at(5),
            key_nonce: body[13..45].try_into().unwrap(),
            key_iv: body[45..61].try_into().unwrap(),
            key_rsc: u64_at(61),
            key_id: u64_at(69),
            key_mic: body[77..93].try_into().unwrap(),
            key_data: key_data.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prefix_is_95_octets() {
        let f = EapolKeyFrame::default();
        assert_eq!(f.encode().unwrap().len(), 4 + 95);
        let f = EapolKeyFrame { key_data: vec![0; 64], ..Default::default() };
        assert_eq!(f.encode().unwrap().len(), 163);
    }

    #[test]
    fn mic_offset_points_at_mic() {
        let f = EapolKeyFrame { key_mic: [0xee; 16], ..Default::default() };
        let bytes = f.encode().unwrap();
        assert_eq!(&bytes[MIC_OFFSET..MIC_OFFSET + 16], &[0xee; 16]);
        assert!(f.encode_for_mic().unwrap()[MIC_OFFSET..MIC_OFFSET + 16].iter().all(|&b| b == 0));
    }

    #[test]
    fn bad_lengths_rejected() {
        let f = EapolKeyFrame { key_data: vec![1, 2, 3], ..Default::default() };
        let bytes = f.encode().unwrap();
        assert!(EapolKeyFrame::parse(&bytes[..bytes.len() - 1]).is_err());
        let mut lie = bytes.clone();
        lie[4 + 94] = 4;
        assert!(EapolKeyFrame::parse(&lie).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn eapol_round_trip(
            key_info in any::<u16>(),
            replay_counter in any::<u64>(),
            key_nonce in any::<[u8; 32]>(),
            key_mic in any::<[u8; 16]>(),
            key_data in prop::collection::vec(any::<u8>(), 0..80),
        ) {
            let f = EapolKeyFrame { key_info, replay_counter, key_nonce, key_mic, key_data, key_length: 16, ..Default::default() };
            let bytes = f.encode().unwrap();
            prop_assert_eq!(EapolKeyFrame::parse(&bytes).unwrap(), f);
        }

        #[test]
        fn eapol_parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let _ = EapolKeyFrame::parse(&bytes);
        }
    }
}
