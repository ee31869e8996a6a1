//! Deterministic discrete-event simulation of an AP, a client and an
//! optional adversary sharing a wireless medium.
//!
//! Time is counted in integer ticks. Delivering a frame takes one tick and
//! cryptography takes none. Events at the same tick run in insertion order,
//! so a run is a pure function of the script and the seed.

mod engine;
mod script;
mod station;
mod suite;
mod transcript;

pub use engine::{frame_label, run_scenario, station_identity, BEACON_INTERVAL};
pub use script::{
    Action, AdversarySpec, Capability, MitigationConfig, ScenarioScript, ScheduledAction, ScriptError, StationSpec,
    Trigger,
};
pub use suite::{attack_suite, builtin_scenarios, SuiteOptions, SuiteReport, SuiteRow, Verdict};
pub use transcript::{
    eavesdropper_view, EavesdropperReport, Outcome, Record, Run, Secrets, StationVerdict, Transcript,
};
