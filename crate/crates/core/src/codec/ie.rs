use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{need, CodecError};

pub const EID_SSID: u8 = 0;
pub const EID_RATES: u8 = 1;
/// Reserved id carrying the SOAP IE.
pub const EID_SOAP: u8 = 251;
/// Association Response element carrying the 8-octet SOAP session nonce.
pub const EID_SOAP_NONCE: u8 = 252;
/// Trailing element carrying an ECDSA signature over a management frame.
pub const EID_MGMT_SIGNATURE: u8 = 253;

/// One TLV information element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub id: u8,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
}

impl Element {
    pub fn new(id: u8, payload: Vec<u8>) -> Self {
        Self { id, payload }
    }

    pub fn wire_len(&self) -> usize {
        2 + self.payload.len()
    }
}

pub fn encode_elements(elements: &[Element], out: &mut Vec<u8>) -> Result<(), CodecError> {
    for e in elements {
        if e.payload.len() > 255 {
            return Err(CodecError::Oversize { what: "element payload", len: e.payload.len() });
        }
        out.push(e.id);
        out.push(e.payload.len() as u8);
        out.extend_from_slice(&e.payload);
    }
    Ok(())
}

/// Splits a run of TLVs. Fails only on structural truncation.
pub fn parse_elements(mut bytes: &[u8]) -> Result<Vec<Element>, CodecError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        need("element header", bytes, 2)?;
        let len = bytes[1] as usize;
        need("element payload", &bytes[2..], len)?;
        out.push(Element::new(bytes[0], bytes[2..2 + len].to_vec()));
        bytes = &bytes[2 + len..];
    }
    Ok(out)
}

/// Parses a TLV run keeping only elements whose id is in `known_ids`.
///
/// Unknown ids are skipped silently, as a receiver that predates them must.
/// Returns the recognized elements and the number skipped.
pub fn extract_elements(bytes: &[u8], known_ids: &BTreeSet<u8>) -> Result<(Vec<Element>, usize), CodecError> {
    let all = parse_elements(bytes)?;
    let total = all.len();
    let recognized: Vec<Element> = all.into_iter().filter(|e| known_ids.contains(&e.id)).collect();
    let skipped = total - recognized.len();
    Ok((recognized, skipped))
}

/// The SOAP information element.
///
/// ```text
/// | EID=251 | Length | m | group list (m) | s | ECDSA public key (s) |
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapIe {
    pub group_list: Vec<u8>,
    /// x-only ECDSA public key; its length is the IE's `s`.
    #[serde(with = "hex::serde")]
    pub ecdsa_public_key: Vec<u8>,
}

impl SoapIe {
    pub fn new(group_list: Vec<u8>, ecdsa_public_key: Vec<u8>) -> Self {
        Self { group_list, ecdsa_public_key }
    }

    pub fn group_count(&self) -> usize {
        self.group_list.len()
    }

    pub fn key_size(&self) -> usize {
        self.ecdsa_public_key.len()
    }

    /// Value of the Length field: `2 + m + s`.
    pub fn length_field(&self) -> usize {
        2 + self.group_count() + self.key_size()
    }

    pub fn wire_len(&self) -> usize {
        2 + self.length_field()
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let len = self.length_field();
        if len > 255 {
            return Err(CodecError::Oversize { what: "SOAP IE", len: 2 + len });
        }
        let mut out = Vec::with_capacity(2 + len);
        out.push(EID_SOAP);
        out.push(len as u8);
        out.push(self.group_count() as u8);
        out.extend_from_slice(&self.group_list);
        out.push(self.key_size() as u8);
        out.extend_from_slice(&self.ecdsa_public_key);
        Ok(out)
    }

    pub fn to_element(&self) -> Result<Element, CodecError> {
        let bytes = self.encode()?;
        Ok(Element::new(EID_SOAP, bytes[2..].to_vec()))
    }

    /// Parses the Information field of an element already split off a TLV run.
    pub fn from_element(element: &Element) -> Result<Self, CodecError> {
        if element.id != EID_SOAP {
            return Err(CodecError::BadElementId(element.id));
        }
        parse_info(&element.payload)
    }
}

fn parse_info(info: &[u8]) -> Result<SoapIe, CodecError> {
    need("SOAP IE group count", info, 1)?;
    let m = info[0] as usize;
    need("SOAP IE group list", &info[1..], m + 1)?;
    let group_list = info[1..1 + m].to_vec();
    let s = info[1 + m] as usize;
    let key = &info[2 + m..];
    if key.len() != s {
        return Err(CodecError::LengthMismatch { what: "SOAP IE key", declared: s, actual: key.len() });
    }
    Ok(SoapIe { group_list, ecdsa_public_key: key.to_vec() })
}

/// Parses exactly one SOAP IE occupying all of `bytes`.
pub fn parse_soap_ie(bytes: &[u8]) -> Result<SoapIe, CodecError> {
    need("SOAP IE header", bytes, 2)?;
    if bytes[0] != EID_SOAP {
        return Err(CodecError::BadElementId(bytes[0]));
    }
    let len = bytes[1] as usize;
    if bytes.len() != 2 + len {
        return Err(CodecError::LengthMismatch { what: "SOAP IE", declared: len, actual: bytes.len() - 2 });
    }
    parse_info(&bytes[2..])
}
