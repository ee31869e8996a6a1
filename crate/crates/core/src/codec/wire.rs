use serde::{Deserialize, Serialize};

use super::eapol::{key_info, EapolKeyFrame, EAPOL_KEY_PACKET_TYPE};
use super::mgmt::{ManagementFrame, MgmtSubtype};
use super::soap_msg::{parse_soap_message, SoapLayout, SoapMessage, SOAP_PACKET_TYPE};
use super::{need, CodecError, MacAddr};

pub const MAC_HEADER_LEN: usize = 24;
pub const LLC_SNAP_LEN: usize = 8;
/// LLC/SNAP header announcing an 802.1X (EAPOL) payload.
pub const LLC_SNAP: [u8; LLC_SNAP_LEN] = [0xaa, 0xaa, 0x03, 0x00, 0x00, 0x00, 0x88, 0x8e];

const FC_DATA: u8 = 0x08;
const FLAG_TO_DS: u8 = 0x01;
const FLAG_FROM_DS: u8 = 0x02;

/// Payload of an EAPOL-carrying data frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EapolPdu {
    Soap(SoapMessage),
    Key(EapolKeyFrame),
}

impl EapolPdu {
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        match self {
            EapolPdu::Soap(m) => m.encode(),
            EapolPdu::Key(k) => k.encode(),
        }
    }
}

/// Anything that goes over the simulated air.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Management(ManagementFrame),
    Eapol { dest: MacAddr, source: MacAddr, bssid: MacAddr, pdu: EapolPdu },
}

impl Frame {
    pub fn dest(&self) -> MacAddr {
        match self {
            Frame::Management(m) => m.dest,
            Frame::Eapol { dest, .. } => *dest,
        }
    }

    pub fn source(&self) -> MacAddr {
        match self {
            Frame::Management(m) => m.source,
            Frame::Eapol { source, .. } => *source,
        }
    }

    pub fn bssid(&self) -> MacAddr {
        match self {
            Frame::Management(m) => m.bssid,
            Frame::Eapol { bssid, .. } => *bssid,
        }
    }

    /// Short human label: management subtype, `soap`, or `eapol-m1`..`eapol-m4`.
    pub fn label(&self) -> &'static str {
        match self {
            Frame::Management(m) => match m.subtype {
                MgmtSubtype::Beacon => "beacon",
                MgmtSubtype::ProbeResponse => "probe-response",
                MgmtSubtype::AssociationRequest => "assoc-request",
                MgmtSubtype::AssociationResponse => "assoc-response",
                MgmtSubtype::Disassociation => "disassoc",
            },
            Frame::Eapol { pdu: EapolPdu::Soap(_), .. } => "soap",
            Frame::Eapol { pdu: EapolPdu::Key(k), .. } => match eapol_message_number(k) {
                Some(1) => "eapol-m1",
                Some(2) => "eapol-m2",
                Some(3) => "eapol-m3",
                Some(4) => "eapol-m4",
                _ => "eapol-key",
            },
        }
    }

    fn header(&self) -> [u8; MAC_HEADER_LEN] {
        let mut h = [0u8; MAC_HEADER_LEN];
        match self {
            Frame::Management(m) => h[0] = m.subtype.frame_control(),
            Frame::Eapol { source, bssid, .. } => {
                h[0] = FC_DATA;
                h[1] = if source == bssid { FLAG_FROM_DS } else { FLAG_TO_DS };
            }
        }
        h[4..10].copy_from_slice(&self.dest().0);
        h[10..16].copy_from_slice(&self.source().0);
        h[16..22].copy_from_slice(&self.bssid().0);
        h
    }

    /// Full frame as transmitted: MAC header, then body (FCS excluded).
    pub fn to_wire(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = self.header().to_vec();
        match self {
            Frame::Management(m) => out.extend_from_slice(&m.encode_body()?),
            Frame::Eapol { pdu, .. } => {
                out.extend_from_slice(&LLC_SNAP);
                out.extend_from_slice(&pdu.encode()?);
            }
        }
        Ok(out)
    }

    /// Parses a full frame. SOAP Messages are only recognized when the
    /// receiver knows the negotiated `soap_layout`; otherwise an EAPOL
    /// payload with the reserved SOAP version/type is malformed.
    pub fn from_wire(bytes: &[u8], soap_layout: Option<SoapLayout>) -> Result<Frame, CodecError> {
        need("MAC header", bytes, MAC_HEADER_LEN)?;
        let mac_at = |o: usize| MacAddr(bytes[o..o + 6].try_into().unwrap());
        let (dest, source, bssid) = (mac_at(4), mac_at(10), mac_at(16));
        let body = &bytes[MAC_HEADER_LEN..];
        if bytes[0] == FC_DATA {
            need("LLC/SNAP header", body, LLC_SNAP_LEN)?;
            if body[..LLC_SNAP_LEN] != LLC_SNAP {
                return Err(CodecError::Malformed("data frame is not EAPOL"));
            }
            let eapol = &body[LLC_SNAP_LEN..];
            need("EAPOL header", eapol, 4)?;
            let pdu = if eapol[1] == SOAP_PACKET_TYPE {
                let layout = soap_layout.ok_or(CodecError::NotSoap { version: eapol[0], packet_type: eapol[1] })?;
                EapolPdu::Soap(parse_soap_message(eapol, layout)?)
            } else if eapol[1] == EAPOL_KEY_PACKET_TYPE {
                EapolPdu::Key(EapolKeyFrame::parse(eapol)?)
            } else {
                return Err(CodecError::Malformed("unsupported EAPOL packet type"));
            };
            return Ok(Frame::Eapol { dest, source, bssid, pdu });
        }
        let subtype =
            MgmtSubtype::from_frame_control(bytes[0]).ok_or(CodecError::Malformed("unsupported frame control"))?;
        Ok(Frame::Management(ManagementFrame::parse_body(subtype, dest, source, bssid, body)?))
    }
}

/// Which 4-Way Handshake message an EAPOL-Key frame is, from its Key Info.
pub fn eapol_message_number(k: &EapolKeyFrame) -> Option<u8> {
    use key_info::*;
    let ack = k.has(ACK);
    let mic = k.has(MIC);
    match (ack, mic, k.has(INSTALL), k.has(SECURE)) {
        (true, false, false, false) => Some(1),
        (false, true, false, false) => Some(2),
        (true, true, true, _) => Some(3),
        (false, true, false, true) => Some(4),
        _ => None,
    }
}

/// Exact serialized length including the 24-octet MAC header and, for
/// EAPOL-carried bodies, the 8-octet LLC/SNAP header.
pub fn frame_wire_size(frame: &Frame) -> usize {
    match frame {
        Frame::Management(m) => {
            MAC_HEADER_LEN
                + m.fixed.len()
                + m.elements.iter().map(|e| e.wire_len()).sum::<usize>()
                + m.signature.as_ref().map_or(0, |s| 2 + s.len())
        }
        Frame::Eapol { pdu, .. } => {
            MAC_HEADER_LEN
                + LLC_SNAP_LEN
                + match pdu {
                    EapolPdu::Soap(m) => m.layout().encoded_len(),
                    EapolPdu::Key(k) => k.encoded_len(),
                }
        }
    }
}
