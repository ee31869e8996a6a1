use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{hex_dump, Frame, MacAddr, SoapLayout};
use crate::crypto::{ecdh_agree, is_on_curve, sha256, CurvePoint, EcdhKeyPair, SharedPsk};
use crate::fourway::PairwiseKeys;

/// Terminal state of a station at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// 4-Way Handshake completed; keys installed.
    Established,
    /// Associated without keys (open legacy association).
    Associated,
    /// Torn down by a Disassociation frame.
    Disconnected,
    /// SOAP or 4-Way Handshake failed on this side.
    Failed,
    /// Still waiting when the run ended.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum Record {
    Send {
        tick: u64,
        from: String,
        label: String,
        dest: MacAddr,
        size: usize,
        #[serde(with = "hex::serde")]
        bytes: Vec<u8>,
    },
    Deliver {
        tick: u64,
        to: String,
        label: String,
    },
    /// Frame lost on the air or intercepted by the adversary.
    Drop {
        tick: u64,
        label: String,
        reason: String,
    },
    /// The adversary put a frame on the air.
    Inject {
        tick: u64,
        label: String,
        note: String,
    },
    /// A receiver ignored a frame.
    Discard {
        tick: u64,
        station: String,
        label: String,
        reason: String,
    },
    /// A mitigation stopped a frame before the state machines saw it.
    Blocked {
        tick: u64,
        station: String,
        label: String,
        reason: String,
    },
    Transition {
        tick: u64,
        station: String,
        machine: String,
        from: String,
        to: String,
    },
    Note {
        tick: u64,
        station: String,
        text: String,
    },
}

impl Record {
    pub fn tick(&self) -> u64 {
        match self {
            Record::Send { tick, .. }
            | Record::Deliver { tick, .. }
            | Record::Drop { tick, .. }
            | Record::Inject { tick, .. }
            | Record::Discard { tick, .. }
            | Record::Blocked { tick, .. }
            | Record::Transition { tick, .. }
            | Record::Note { tick, .. } => *tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationVerdict {
    pub outcome: Outcome,
    /// Station whose ECDSA key this one ended up trusting.
    pub peer: Option<String>,
    pub group: Option<u8>,
    /// First 8 octets of SHA-256 of the PSK, never the PSK itself.
    pub psk_fingerprint: Option<String>,
    pub ptk_fingerprint: Option<String>,
    pub verify_failures: u32,
    pub blacklisted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub records: Vec<Record>,
    pub verdicts: BTreeMap<String, StationVerdict>,
    /// Expectation per station: (expected, actual), only for mismatches.
    pub unmet_expectations: BTreeMap<String, (Outcome, Outcome)>,
}

impl Transcript {
    pub fn expectations_met(&self) -> bool {
        self.unmet_expectations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts always serialize")
    }

    /// Compact human-readable form; `hex` adds a dump of every frame.
    pub fn to_text(&self, hex: bool) -> String {
        let mut out = format!("scenario {} seed {} ({} ticks)\n", self.scenario, self.seed, self.ticks);
        for r in &self.records {
            let line = match r {
                Record::Send { tick, from, label, dest, size, .. } => {
                    format!("{tick:>6} send      {from} -> {dest} {label} ({size} octets)")
                }
                Record::Deliver { tick, to, label } => format!("{tick:>6} deliver   {label} to {to}"),
                Record::Drop { tick, label, reason } => format!("{tick:>6} drop      {label}: {reason}"),
                Record::Inject { tick, label, note } => format!("{tick:>6} inject    {label}: {note}"),
                Record::Discard { tick, station, label, reason } => {
                    format!("{tick:>6} discard   {station} {label}: {reason}")
                }
                Record::Blocked { tick, station, label, reason } => {
                    format!("{tick:>6} blocked   {station} {label}: {reason}")
                }
                Record::Transition { tick, station, machine, from, to } => {
                    format!("{tick:>6} {station}.{machine}: {from} -> {to}")
                }
                Record::Note { tick, station, text } => format!("{tick:>6} note      {station}: {text}"),
            };
            out.push_str(&line);
            out.push('\n');
            if let (true, Record::Send { bytes, .. }) = (hex, r) {
                out.push_str(&hex_dump(bytes));
            }
        }
        for (name, v) in &self.verdicts {
            out.push_str(&format!(
                "verdict {name}: {:?} peer={} group={} psk={}\n",
                v.outcome,
                v.peer.as_deref().unwrap_or("-"),
                v.group.map_or("-".to_owned(), |g| g.to_string()),
                v.psk_fingerprint.as_deref().unwrap_or("-"),
            ));
        }
        for (name, (want, got)) in &self.unmet_expectations {
            out.push_str(&format!("UNMET {name}: expected {want:?}, got {got:?}\n"));
        }
        out
    }

    pub fn frames(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.records.iter().filter_map(|r| match r {
            Record::Send { label, bytes, .. } => Some((label.as_str(), bytes.as_slice())),
            _ => None,
        })
    }
}

pub(crate) fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(&sha256(bytes)[..8])
}

/// Key material held by the stations at the end of a run. Kept out of the
/// transcript on purpose.
#[derive(Debug, Clone, Default)]
pub struct Secrets {
    pub psk: BTreeMap<String, SharedPsk>,
    pub ptk: BTreeMap<String, PairwiseKeys>,
    /// Ephemeral ECDH keys the adversary generated for substitution.
    pub adversary_ephemeral: Vec<EcdhKeyPair>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub transcript: Transcript,
    pub secrets: Secrets,
}

/// What a passive observer of the whole run could learn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EavesdropperReport {
    pub frames_captured: usize,
    pub ecdh_keys_seen: usize,
    /// Occurrences of any station PSK in frame bytes or transcript text.
    pub psk_occurrences: usize,
    /// Whether some ECDH agreement the adversary can compute equals a
    /// station's PSK.
    pub can_derive_psk: bool,
}

fn count_occurrences(haystack: &[u8], needle: &[u8]) -> usize {
    if needle.is_empty() || haystack.len() < needle.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

pub fn eavesdropper_view(run: &Run) -> EavesdropperReport {
    let t = &run.transcript;
    let psks: Vec<&SharedPsk> = run.secrets.psk.values().collect();
    let text = serde_json::to_string(t).expect("transcripts always serialize");

    let mut psk_occurrences = 0;
    let mut frames_captured = 0;
    let mut ecdh_keys: Vec<Vec<u8>> = Vec::new();
    for (label, bytes) in t.frames() {
        frames_captured += 1;
        for psk in &psks {
            psk_occurrences += count_occurrences(bytes, psk.as_bytes());
        }
        if label.starts_with("soap") {
            if let Some(k) = soap_ecdh_key(bytes) {
                if !ecdh_keys.contains(&k) {
                    ecdh_keys.push(k);
                }
            }
        }
    }
    for psk in &psks {
        psk_occurrences += count_occurrences(text.as_bytes(), psk.to_hex().as_bytes());
    }

    // The adversary holds private scalars only for its own ephemeral keys.
    let mut can_derive_psk = false;
    for own in &run.secrets.adversary_ephemeral {
        for k in &ecdh_keys {
            let Ok(point) = CurvePoint::from_bytes(own.group(), k) else { continue };
            if let Ok(derived) = ecdh_agree(own, &point) {
                can_derive_psk |= psks.iter().any(|p| **p == derived);
            }
        }
    }
    EavesdropperReport { frames_captured, ecdh_keys_seen: ecdh_keys.len(), psk_occurrences, can_derive_psk }
}

/// ECDH key of a captured SOAP frame, read with every plausible layout.
fn soap_ecdh_key(bytes: &[u8]) -> Option<Vec<u8>> {
    for g in crate::crypto::registered_groups() {
        for sig in crate::crypto::registered_groups() {
            for nonce in [false, true] {
                let layout = SoapLayout {
                    ecdh_key_len: g.point_len(),
                    signature_len: sig.signature_len(),
                    nonce_extension: nonce,
                };
                if let Ok(Frame::Eapol { pdu: crate::codec::EapolPdu::Soap(m), .. }) =
                    Frame::from_wire(bytes, Some(layout))
                {
                    if CurvePoint::from_bytes(g, &m.ecdh_public_key).is_ok_and(|p| is_on_curve(g, &p)) {
                        return Some(m.ecdh_public_key);
                    }
                }
            }
        }
    }
    None
}
