use serde::{Deserialize, Serialize};

use super::ie::{encode_elements, parse_elements, Element, EID_MGMT_SIGNATURE};
use super::{CodecError, MacAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgmtSubtype {
    Beacon,
    ProbeResponse,
    AssociationRequest,
    AssociationResponse,
    Disassociation,
}

impl MgmtSubtype {
    /// Width of the fixed fields preceding the element list.
    pub fn fixed_len(self) -> usize {
        match self {
            // timestamp, beacon interval, capability
            MgmtSubtype::Beacon | MgmtSubtype::ProbeResponse => 12,
            // capability, listen interval
            MgmtSubtype::AssociationRequest => 4,
            // capability, status, association id
            MgmtSubtype::AssociationResponse => 6,
            // reason code
            MgmtSubtype::Disassociation => 2,
        }
    }

    /// First octet of the 802.11 frame control field (type 0, version 0).
    pub fn frame_control(self) -> u8 {
        let subtype: u8 = match self {
            MgmtSubtype::AssociationRequest => 0x0,
            MgmtSubtype::AssociationResponse => 0x1,
            MgmtSubtype::ProbeResponse => 0x5,
            MgmtSubtype::Beacon => 0x8,
            MgmtSubtype::Disassociation => 0xa,
        };
        subtype << 4
    }

    pub fn from_frame_control(fc: u8) -> Option<Self> {
        if fc & 0x0f != 0 {
            return None;
        }
        Some(match fc >> 4 {
            0x0 => MgmtSubtype::AssociationRequest,
            0x1 => MgmtSubtype::AssociationResponse,
            0x5 => MgmtSubtype::ProbeResponse,
            0x8 => MgmtSubtype::Beacon,
            0xa => MgmtSubtype::Disassociation,
            _ => return None,
        })
    }
}

/// A management frame body: fixed fields, then TLV elements.
///
/// When present, `signature` is serialized as a trailing element
/// ([`EID_MGMT_SIGNATURE`]) so that receivers unaware of it skip it like any
/// other unknown element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagementFrame {
    pub subtype: MgmtSubtype,
    pub dest: MacAddr,
    pub source: MacAddr,
    pub bssid: MacAddr,
    #[serde(with = "hex::serde")]
    pub fixed: Vec<u8>,
    pub elements: Vec<Element>,
    pub signature: Option<Vec<u8>>,
}

pub const STATUS_SUCCESS: u16 = 0;
pub const STATUS_REFUSED: u16 = 1;
/// "Disassociated because sending STA is leaving".
pub const REASON_LEAVING: u16 = 8;

impl ManagementFrame {
    /// Frame with zeroed fixed fields of the right width.
    pub fn new(subtype: MgmtSubtype, dest: MacAddr, source: MacAddr, bssid: MacAddr, elements: Vec<Element>) -> Self {
        let mut fixed = vec![0u8; subtype.fixed_len()];
        match subtype {
            MgmtSubtype::Beacon | MgmtSubtype::ProbeResponse => {
                // beacon interval 100 TU, capability ESS | privacy
                fixed[8..10].copy_from_slice(&100u16.to_le_bytes());
                fixed[10..12].copy_from_slice(&0x0011u16.to_le_bytes());
            }
            MgmtSubtype::AssociationRequest => {
                fixed[0..2].copy_from_slice(&0x0011u16.to_le_bytes());
                fixed[2..4].copy_from_slice(&10u16.to_le_bytes());
            }
            MgmtSubtype::AssociationResponse => {
                fixed[0..2].copy_from_slice(&0x0011u16.to_le_bytes());
                fixed[4..6].copy_from_slice(&0xc001u16.to_le_bytes());
            }
            MgmtSubtype::Disassociation => {
                fixed[0..2].copy_from_slice(&REASON_LEAVING.to_le_bytes());
            }
        }
        Self { subtype, dest, source, bssid, fixed, elements, signature: None }
    }

    pub fn association_response(dest: MacAddr, ap: MacAddr, status: u16, elements: Vec<Element>) -> Self {
        let mut f = Self::new(MgmtSubtype::AssociationResponse, dest, ap, ap, elements);
        f.fixed[2..4].copy_from_slice(&status.to_le_bytes());
        f
    }

    pub fn disassociation(dest: MacAddr, source: MacAddr, bssid: MacAddr, reason: u16) -> Self {
        let mut f = Self::new(MgmtSubtype::Disassociation, dest, source, bssid, Vec::new());
        f.fixed[0..2].copy_from_slice(&reason.to_le_bytes());
        f
    }

    /// Status code of an Association Response.
    pub fn status_code(&self) -> Option<u16> {
        (self.subtype == MgmtSubtype::AssociationResponse).then(|| u16::from_le_bytes([self.fixed[2], self.fixed[3]]))
    }

    pub fn element(&self, id: u8) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Fixed fields and elements, without the signature element.
    pub fn encode_body_unsigned(&self) -> Result<Vec<u8>, CodecError> {
        if self.fixed.len() != self.subtype.fixed_len() {
            return Err(CodecError::LengthMismatch {
                what: "management fixed fields",
                declared: self.subtype.fixed_len(),
                actual: self.fixed.len(),
            });
        }
        let mut out = self.fixed.clone();
        encode_elements(&self.elements, &mut out)?;
        Ok(out)
    }

    pub fn encode_body(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = self.encode_body_unsigned()?;
        if let Some(sig) = &self.signature {
            encode_elements(&[Element::new(EID_MGMT_SIGNATURE, sig.clone())], &mut out)?;
        }
        Ok(out)
    }

    /// Inverse of [`encode_body`](Self::encode_body). A signature element is
    /// only recognized in final position.
    pub fn parse_body(
        subtype: MgmtSubtype,
        dest: MacAddr,
        source: MacAddr,
        bssid: MacAddr,
        body: &[u8],
    ) -> Result<Self, CodecError> {
        let n = subtype.fixed_len();
        super::need("management fixed fields", body, n)?;
        let mut elements = parse_elements(&body[n..])?;
        let signature = match elements.last() {
            Some(e) if e.id == EID_MGMT_SIGNATURE => elements.pop().map(|e| e.payload),
            _ => None,
        };
        Ok(Self { subtype, dest, source, bssid, fixed: body[..n].to_vec(), elements, signature })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ie::EID_SSID;

    fn mac(n: u8) -> MacAddr {
        MacAddr([2, 0, 0, 0, 0, n])
    }

    #[test]
    fn fixed_widths() {
        for (st, w) in [
            (MgmtSubtype::Beacon, 12),
            (MgmtSubtype::ProbeResponse, 12),
            (MgmtSubtype::AssociationRequest, 4),
            (MgmtSubtype::AssociationResponse, 6),
            (MgmtSubtype::Disassociation, 2),
        ] {
            let f = ManagementFrame::new(st, mac(1), mac(2), mac(2), vec![]);
            assert_eq!(f.encode_body().unwrap().len(), w);
            assert_eq!(MgmtSubtype::from_frame_control(st.frame_control()), Some(st));
        }
    }

    #[test]
    fn signature_travels_as_last_element() {
        let mut f = ManagementFrame::new(
            MgmtSubtype::Beacon,
            mac(1),
            mac(2),
            mac(2),
            vec![Element::new(EID_SSID, b"x".to_vec())],
        );
        f.signature = Some(vec![7; 56]);
        let body = f.encode_body().unwrap();
        assert_eq!(body.len(), 12 + 3 + 58);
        let back = ManagementFrame::parse_body(f.subtype, f.dest, f.source, f.bssid, &body).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn status_code_accessor() {
        let f = ManagementFrame::association_response(mac(1), mac(2), STATUS_REFUSED, vec![]);
        assert_eq!(f.status_code(), Some(STATUS_REFUSED));
        let g = ManagementFrame::disassociation(mac(1), mac(2), mac(2), REASON_LEAVING);
        assert_eq!(g.status_code(), None);
    }
}
