//! Wire formats: the SOAP IE, SOAP Messages, EAPOL-Key frames and the
//! 802.11 management/data framing that carries them.
//!
//! All multi-octet integers are big-endian. Size accounting excludes the FCS.

mod eapol;
mod ie;
mod mgmt;
mod soap_msg;
mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eapol::{key_info, EapolKeyFrame, EAPOL_KEY_BODY_PREFIX, EAPOL_KEY_PACKET_TYPE, EAPOL_VERSION};
pub use ie::{
    encode_elements, extract_elements, parse_elements, parse_soap_ie, Element, SoapIe, EID_MGMT_SIGNATURE, EID_RATES,
    EID_SOAP, EID_SOAP_NONCE, EID_SSID,
};
pub use mgmt::{ManagementFrame, MgmtSubtype, REASON_LEAVING, STATUS_REFUSED, STATUS_SUCCESS};
pub use soap_msg::{
    parse_soap_message, SoapLayout, SoapMessage, SESSION_NONCE_LEN, SOAP_PACKET_TYPE, SOAP_PROTOCOL_VERSION,
};
pub use wire::{eapol_message_number, frame_wire_size, EapolPdu, Frame, LLC_SNAP, LLC_SNAP_LEN, MAC_HEADER_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated {what}: need {need} octets, have {have}")]
    Truncated { what: &'static str, need: usize, have: usize },
    #[error("{what} length field says {declared}, actual {actual}")]
    LengthMismatch { what: &'static str, declared: usize, actual: usize },
    #[error("unexpected element id {0}")]
    BadElementId(u8),
    #[error("{what} too large: {len} octets")]
    Oversize { what: &'static str, len: usize },
    #[error("not a SOAP message (version {version:#04x}, type {packet_type:#04x})")]
    NotSoap { version: u8, packet_type: u8 },
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
}

pub(crate) fn need(what: &'static str, bytes: &[u8], n: usize) -> Result<(), CodecError> {
    if bytes.len() < n {
        Err(CodecError::Truncated { what, need: n, have: bytes.len() })
    } else {
        Ok(())
    }
}

/// A 48-bit IEEE MAC address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.0;
        write!(f, "{a:02x}:{b:02x}:{c:02x}:{d:02x}:{e:02x}:{g:02x}")
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MAC address {0:?}")]
pub struct ParseMacError(String);

impl FromStr for MacAddr {
    type Err = ParseMacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(ParseMacError(s.to_owned()));
        }
        let mut out = [0u8; 6];
        for (o, p) in out.iter_mut().zip(parts) {
            if p.len() != 2 {
                return Err(ParseMacError(s.to_owned()));
            }
            *o = u8::from_str_radix(p, 16).map_err(|_| ParseMacError(s.to_owned()))?;
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hex dump, 16 octets per line, each line prefixed with its offset.
///
/// ```text
/// 0000: fb 1f 01 1a 1c ...
/// ```
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(16).enumerate() {
        let line: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&format!("{:04x}: {}\n", i * 16, line.join(" ")));
    }
    out
}

/// Inverse of [`hex_dump`]; offsets are checked.
pub fn parse_hex_dump(text: &str) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (offset, rest) = line.split_once(':').ok_or(CodecError::Malformed("hex dump line without offset"))?;
        let offset =
            usize::from_str_radix(offset.trim(), 16).map_err(|_| CodecError::Malformed("bad hex dump offset"))?;
        if offset != out.len() {
            return Err(CodecError::Malformed("hex dump offset out of sequence"));
        }
        for tok in rest.split_whitespace() {
            out.push(u8::from_str_radix(tok, 16).map_err(|_| CodecError::Malformed("bad hex octet"))?);
        }
    }
    Ok(out)
}
