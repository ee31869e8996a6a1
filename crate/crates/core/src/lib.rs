//! Simulator for the SOAP key establishment protocol: ECDH group
//! negotiation, the signed SOAP Handshake, the WPA2 4-Way Handshake it feeds,
//! and a discrete-event wireless medium with an adversary.

pub mod codec;
pub mod crypto;
pub mod fourway;
pub mod metrics;
pub mod negotiation;
pub mod sim;
pub mod soap;
