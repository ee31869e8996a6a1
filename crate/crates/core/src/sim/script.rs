//! Scenario scripts: the JSON documents `run_scenario` consumes.
//!
//! ```json
//! {
//!   "name": "benign",
//!   "stations": [
//!     { "name": "ap", "role": "ap", "mac": "02:00:00:00:00:01", "groups": [19, 26] },
//!     { "name": "client", "role": "client", "mac": "02:00:00:00:00:02", "groups": [26] }
//!   ],
//!   "expect": { "ap": "established", "client": "established" }
//! }
//! ```
//!
//! See `docs/scenario-format.md` in the repository for every field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::MacAddr;
use crate::crypto::{registry_lookup, GROUP_P224};
use crate::negotiation::GroupSet;
use crate::soap::Role;

use super::Outcome;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("invalid scenario JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid scenario at {location}: {message}")]
    Invalid { location: String, message: String },
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> ScriptError {
    ScriptError::Invalid { location: location.into(), message: message.into() }
}

fn default_ssid() -> String {
    "soap-net".to_owned()
}

fn default_group() -> u8 {
    GROUP_P224
}

fn default_true() -> bool {
    true
}

fn default_channel() -> u8 {
    1
}

fn default_max_ticks() -> u64 {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub name: String,
    pub role: Role,
    pub mac: MacAddr,
    #[serde(default = "default_ssid")]
    pub ssid: String,
    #[serde(default = "default_channel")]
    pub channel: u8,
    /// ECDSA identity curve.
    #[serde(default = "default_group")]
    pub ecdsa_group: u8,
    /// ECDH groups this station supports.
    #[serde(default)]
    pub groups: GroupSet,
    #[serde(default = "default_true")]
    pub soap_aware: bool,
    /// A SOAP-aware station that nevertheless uses WPA-PSK.
    #[serde(default)]
    pub force_legacy: bool,
    /// 32-octet PMK for WPA-PSK, hex.
    #[serde(default, with = "opt_hex32")]
    pub legacy_pmk: Option<[u8; 32]>,
    /// Seed of the long-term ECDSA key; defaults to one derived from the MAC
    /// so that identities stay fixed across run seeds.
    #[serde(default)]
    pub key_seed: Option<u64>,
    /// Client only: accept only this AP key (name of the AP station whose
    /// key was learned in an earlier session).
    #[serde(default)]
    pub pin_ap_key: Option<String>,
}

mod opt_hex32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[u8; 32]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_some(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 32]>, D::Error> {
        let Some(text) = Option::<String>::deserialize(d)? else { return Ok(None) };
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| serde::de::Error::custom("legacy_pmk must be 32 octets"))?;
        Ok(Some(arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Eavesdrop,
    Replay,
    Inject,
    Masquerade,
    MitmSubstitute,
    DisassocInject,
    DeleteIntercept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub mac: MacAddr,
    #[serde(default = "default_group")]
    pub ecdsa_group: u8,
    #[serde(default)]
    pub capabilities: Vec<Capability>,
    /// Per-frame drop probability for `delete_intercept`.
    #[serde(default)]
    pub drop_probability: f64,
    /// With `inject`: forge a beacon carrying the attacker's key just ahead
    /// of every genuine beacon.
    #[serde(default)]
    pub beacon_flood: bool,
    /// Channel of the rogue AP run by `masquerade`.
    #[serde(default = "default_rogue_channel")]
    pub channel: u8,
    #[serde(default)]
    pub key_seed: Option<u64>,
}

fn default_rogue_channel() -> u8 {
    6
}

impl AdversarySpec {
    pub fn has(&self, c: Capability) -> bool {
        self.capabilities.contains(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    /// Verification failures from one (MAC, key) pair before it is
    /// blacklisted; `null` disables blacklisting.
    #[serde(default = "default_threshold")]
    pub blacklist_threshold: Option<u32>,
    #[serde(default)]
    pub sign_management_frames: bool,
}

fn default_threshold() -> Option<u32> {
    Some(3)
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self { blacklist_threshold: default_threshold(), sign_management_frames: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trigger {
    /// Fire at this tick, before stations act.
    Tick { tick: u64 },
    /// Fire right after the `nth` (1-based) transmission labelled `after`.
    Frame {
        after: String,
        #[serde(default = "default_nth")]
        nth: u32,
    },
}

fn default_nth() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum Action {
    /// Forged Disassociation to `to`, claiming to come from its peer.
    InjectDisassoc { to: String },
    /// One forged beacon carrying the attacker's key.
    InjectBeacon,
    /// Re-send the latest captured frame with this label.
    Replay { label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAction {
    pub at: Trigger,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Sign bare ECDH keys and omit the session nonce.
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
    pub stations: Vec<StationSpec>,
    #[serde(default)]
    pub adversary: Option<AdversarySpec>,
    #[serde(default)]
    pub mitigations: MitigationConfig,
    #[serde(default)]
    pub schedule: Vec<ScheduledAction>,
    /// Expected outcome per station name.
    #[serde(default)]
    pub expect: BTreeMap<String, Outcome>,
    /// Testing aid: write the agreed PSK into the transcript.
    #[serde(default)]
    pub debug_leak_psk: bool,
    #[doc(hidden)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fault_accept_any_signature: bool,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: ScenarioScript = serde_json::from_str(text).map_err(|e| ScriptError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scripts always serialize")
    }

    pub fn station(&self, name: &str) -> Option<&StationSpec> {
        self.stations.iter().find(|s| s.name == name)
    }

    pub fn ap(&self) -> &StationSpec {
        self.stations.iter().find(|s| s.role == Role::Ap).expect("validated")
    }

    pub fn client(&self) -> &StationSpec {
        self.stations.iter().find(|s| s.role == Role::Client).expect("validated")
    }

    /// Checks everything serde cannot: one AP and one client, unique names
    /// and MACs, registered curves, and capabilities for every action.
    pub fn validate(&self) -> Result<(), ScriptError> {
        let count = |r: Role| self.stations.iter().filter(|s| s.role == r).count();
        if count(Role::Ap) != 1 || count(Role::Client) != 1 {
            return Err(invalid("stations", "exactly one ap and one client are required"));
        }
        for (i, s) in self.stations.iter().enumerate() {
            let at = |f: &str| format!("stations[{i}].{f}");
            if self.stations.iter().filter(|o| o.name == s.name).count() > 1 {
                return Err(invalid(at("name"), format!("duplicate station name {:?}", s.name)));
            }
            if self.stations.iter().filter(|o| o.mac == s.mac).count() > 1 {
                return Err(invalid(at("mac"), format!("duplicate MAC {}", s.mac)));
            }
            if s.mac == MacAddr::BROADCAST {
                return Err(invalid(at("mac"), "broadcast address"));
            }
            registry_lookup(s.ecdsa_group).map_err(|e| invalid(at("ecdsa_group"), e.to_string()))?;
            if s.ssid.len() > 32 {
                return Err(invalid(at("ssid"), "longer than 32 octets"));
            }
            if let Some(pin) = &s.pin_ap_key {
                if s.role != Role::Client {
                    return Err(invalid(at("pin_ap_key"), "only clients pin keys"));
                }
                if self.station(pin).map(|p| p.role) != Some(Role::Ap) {
                    return Err(invalid(at("pin_ap_key"), format!("no AP station named {pin:?}")));
                }
            }
        }
        if let Some(a) = &self.adversary {
            registry_lookup(a.ecdsa_group).map_err(|e| invalid("adversary.ecdsa_group", e.to_string()))?;
            if !(0.0..=1.0).contains(&a.drop_probability) {
                return Err(invalid("adversary.drop_probability", "must lie in [0, 1]"));
            }
            if a.drop_probability > 0.0 && !a.has(Capability::DeleteIntercept) {
                return Err(invalid("adversary.drop_probability", "requires the delete_intercept capability"));
            }
            if a.beacon_flood && !a.has(Capability::Inject) {
                return Err(invalid("adversary.beacon_flood", "requires the inject capability"));
            }
            if self.stations.iter().any(|s| s.mac == a.mac) {
                return Err(invalid("adversary.mac", "collides with a station"));
            }
        }
        if self.mitigations.blacklist_threshold == Some(0) {
            return Err(invalid("mitigations.blacklist_threshold", "must be at least 1 (null disables)"));
        }
        for (i, step) in self.schedule.iter().enumerate() {
            let at = format!("schedule[{i}].action");
            let need = match &step.action {
                Action::InjectDisassoc { to } => {
                    if self.station(to).is_none() {
                        return Err(invalid(at, format!("no station named {to:?}")));
                    }
                    Capability::DisassocInject
                }
                Action::InjectBeacon => Capability::Inject,
                Action::Replay { .. } => Capability::Replay,
            };
            if !self.adversary.as_ref().is_some_and(|a| a.has(need)) {
                return Err(invalid(at, format!("needs an adversary with the {need:?} capability")));
            }
            if let Trigger::Frame { nth: 0, .. } = step.at {
                return Err(invalid(format!("schedule[{i}].at.nth"), "counts from 1"));
            }
        }
        for name in self.expect.keys() {
            if self.station(name).is_none() {
                return Err(invalid(format!("expect.{name}"), "no such station"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "stations": [
            {"name": "ap", "role": "ap", "mac": "02:00:00:00:00:01", "groups": [26]},
            {"name": "client", "role": "client", "mac": "02:00:00:00:00:02", "groups": [26]}
        ]
    }"#;

    #[test]
    fn minimal_script_defaults() {
        let s = ScenarioScript::from_json(MINIMAL).unwrap();
        assert_eq!(s.ap().ecdsa_group, 26);
        assert_eq!(s.mitigations.blacklist_threshold, Some(3));
        assert!(!s.mitigations.sign_management_frames);
        let back = ScenarioScript::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let err = ScenarioScript::from_json("{\n  \"name\": 3\n}").unwrap_err();
        assert!(matches!(err, ScriptError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn semantic_errors_carry_a_path() {
        let bad = MINIMAL.replace("\"groups\": [26]}", "\"groups\": [7]}");
        let err = ScenarioScript::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");

        let bad = MINIMAL.replace("02:00:00:00:00:02", "02:00:00:00:00:01");
        let err = ScenarioScript::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("stations[0].mac"), "{err}");

        let mut s = ScenarioScript::from_json(MINIMAL).unwrap();
        s.schedule.push(ScheduledAction { at: Trigger::Tick { tick: 3 }, action: Action::InjectBeacon });
        assert!(s.validate().unwrap_err().to_string().contains("schedule[0].action"));
    }

    #[test]
    fn trigger_forms() {
        let t: Trigger = serde_json::from_str(r#"{"tick": 4}"#).unwrap();
        assert_eq!(t, Trigger::Tick { tick: 4 });
        let t: Trigger = serde_json::from_str(r#"{"after": "assoc-response"}"#).unwrap();
        assert_eq!(t, Trigger::Frame { after: "assoc-response".into(), nth: 1 });
    }
}
