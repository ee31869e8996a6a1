//! SOAP Handshake state machines for the client and the AP.
//!
//! After negotiation each side generates an ephemeral ECDH key, the AP sends
//! it signed in SOAP Message 1, the client answers with its own in Message 2,
//! and both derive `PSK_SOAP`, which then serves as the PMK of the 4-Way
//! Handshake.
//!
//! Unless the session runs in strict mode, signatures cover a transcript
//! binding (role, both MACs, group, an 8-octet session nonce and the ECDH
//! key) rather than the bare ECDH key, so a Message 1 recorded in one session
//! does not verify in the next. The AP draws the nonce at association and
//! hands it to the client in the Association Response.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{MacAddr, SoapIe, SoapLayout, SoapMessage, SESSION_NONCE_LEN};
use crate::crypto::{
    ecdh_agree, ecdh_generate, ecdsa_verify, point_from_x_only, registered_groups, registry_lookup, CryptoError,
    CurvePoint, EcGroup, EcdhKeyPair, EcdsaKeyPair, SharedPsk, VerifyError,
};
use crate::negotiation::{build_client_response, select_group, GroupSet, NegotiationOutcome};

pub type SessionNonce = [u8; SESSION_NONCE_LEN];

/// Retransmissions of Message 1 before the AP gives up.
pub const MAX_RETRANSMISSIONS: u32 = 3;
/// Simulated ticks between retransmissions.
pub const RETRANSMIT_TIMEOUT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Client,
    Ap,
}

/// A station's address and long-term ECDSA key.
#[derive(Debug, Clone)]
pub struct StationIdentity {
    pub mac: MacAddr,
    pub ecdsa: EcdsaKeyPair,
    pub role: Role,
}

impl StationIdentity {
    pub fn generate<R: RngCore + ?Sized>(mac: MacAddr, role: Role, group: EcGroup, rng: &mut R) -> Self {
        Self { mac, ecdsa: EcdsaKeyPair::generate(group, rng), role }
    }
}

/// The group whose key size is `s`; this is how a receiver learns the curve
/// of a peer's ECDSA key from the IE.
pub fn group_for_key_size(s: usize) -> Option<EcGroup> {
    registered_groups().into_iter().find(|g| g.key_size_octets() == s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    GroupNotOffered,
    Timeout,
    Blacklisted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SoapPhase {
    Idle,
    AdvertisementSeen,
    /// Negotiation ended without a common group; WPA-PSK takes over.
    Fallback,
    Associated,
    AwaitMsg1,
    AwaitMsg2,
    PskAgreed(SharedPsk),
    Aborted(AbortReason),
}

impl SoapPhase {
    pub fn name(&self) -> &'static str {
        match self {
            SoapPhase::Idle => "idle",
            SoapPhase::AdvertisementSeen => "advertisement-seen",
            SoapPhase::Fallback => "fallback",
            SoapPhase::Associated => "associated",
            SoapPhase::AwaitMsg1 => "await-msg1",
            SoapPhase::AwaitMsg2 => "await-msg2",
            SoapPhase::PskAgreed(_) => "psk-agreed",
            SoapPhase::Aborted(_) => "aborted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, SoapPhase::PskAgreed(_) | SoapPhase::Aborted(_) | SoapPhase::Fallback)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SoapError {
    #[error("frame not expected in phase {0}")]
    UnexpectedPhase(&'static str),
    #[error("malformed SOAP IE: {0}")]
    MalformedIe(&'static str),
    #[error("signature rejected: {0}")]
    SignatureInvalid(VerifyError),
    #[error("peer ECDH key rejected: {0}")]
    InvalidPoint(CryptoError),
    #[error("client chose group {0}, which the AP does not offer")]
    GroupNotOffered(u8),
    #[error("duplicate frame after key agreement")]
    Duplicate,
}

impl SoapError {
    /// Errors that count towards the blacklist threshold.
    pub fn is_verification_failure(&self) -> bool {
        matches!(self, SoapError::SignatureInvalid(_) | SoapError::InvalidPoint(_))
    }
}

/// What an AP does when its Message 1 timer fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeoutAction {
    Retransmit(SoapMessage),
    Abort,
    Nothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SoapConfig {
    /// Sign the bare ECDH key and omit the nonce extension, producing frames
    /// that match the minimal message layout exactly.
    pub strict: bool,
    /// Fault injection for mutation testing: accept every signature.
    #[doc(hidden)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accept_any_signature: bool,
}

/// One side of one SOAP Handshake.
#[derive(Debug, Clone)]
pub struct SoapSession {
    role: Role,
    config: SoapConfig,
    phase: SoapPhase,
    negotiated_group: Option<EcGroup>,
    chosen_id: Option<u8>,
    own_ephemeral: Option<EcdhKeyPair>,
    peer_ecdsa_public: Option<(EcGroup, CurvePoint)>,
    peer_mac: Option<MacAddr>,
    session_nonce: Option<SessionNonce>,
    verify_failures: u32,
    retransmissions: u32,
    last_sent: Option<SoapMessage>,
    answered: Option<SoapMessage>,
}

/// Role tag of Message 1 in the signature input.
pub const TAG_MSG1: u8 = 0x01;
pub const TAG_MSG2: u8 = 0x02;

/// The octets a SOAP Message signature covers.
///
/// Strict mode signs the ECDH public key alone. Otherwise the input is
/// `tag || sender MAC || receiver MAC || group id || session nonce || ECDH key`.
pub fn signature_input(
    strict: bool,
    tag: u8,
    sender: MacAddr,
    receiver: MacAddr,
    group_id: u8,
    nonce: &SessionNonce,
    ecdh_key: &[u8],
) -> Vec<u8> {
    if strict {
        return ecdh_key.to_vec();
    }
    let mut m = Vec::with_capacity(1 + 12 + 1 + SESSION_NONCE_LEN + ecdh_key.len());
    m.push(tag);
    m.extend_from_slice(&sender.0);
    m.extend_from_slice(&receiver.0);
    m.push(group_id);
    m.extend_from_slice(nonce);
    m.extend_from_slice(ecdh_key);
    m
}

impl SoapSession {
    pub fn new(role: Role, config: SoapConfig) -> Self {
        Self {
            role,
            config,
            phase: SoapPhase::Idle,
            negotiated_group: None,
            chosen_id: None,
            own_ephemeral: None,
            peer_ecdsa_public: None,
            peer_mac: None,
            session_nonce: None,
            verify_failures: 0,
            retransmissions: 0,
            last_sent: None,
            answered: None,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> &SoapPhase {
        &self.phase
    }

    pub fn negotiated_group(&self) -> Option<EcGroup> {
        self.negotiated_group
    }

    pub fn peer_mac(&self) -> Option<MacAddr> {
        self.peer_mac
    }

    pub fn peer_ecdsa_public(&self) -> Option<&(EcGroup, CurvePoint)> {
        self.peer_ecdsa_public.as_ref()
    }

    pub fn own_ephemeral(&self) -> Option<&EcdhKeyPair> {
        self.own_ephemeral.as_ref()
    }

    pub fn session_nonce(&self) -> Option<SessionNonce> {
        self.session_nonce
    }

    pub fn verify_failures(&self) -> u32 {
        self.verify_failures
    }

    pub fn psk(&self) -> Option<&SharedPsk> {
        match &self.phase {
            SoapPhase::PskAgreed(psk) => Some(psk),
            _ => None,
        }
    }

    /// Field widths of the Message this side expects to receive.
    pub fn inbound_layout(&self) -> Option<SoapLayout> {
        let group = self.negotiated_group?;
        let (peer_group, _) = self.peer_ecdsa_public.as_ref()?;
        Some(SoapLayout {
            ecdh_key_len: group.point_len(),
            signature_len: peer_group.signature_len(),
            nonce_extension: !self.config.strict,
        })
    }

    fn abort(&mut self, reason: AbortReason) {
        self.own_ephemeral = None;
        self.phase = SoapPhase::Aborted(reason);
    }

    fn agree(&mut self, psk: SharedPsk) {
        // The ephemeral private scalar is wiped on drop.
        self.own_ephemeral = None;
        self.phase = SoapPhase::PskAgreed(psk);
    }

    /// Aborts from any non-terminal phase, e.g. when the peer is blacklisted.
    pub fn abandon(&mut self, reason: AbortReason) {
        if !matches!(self.phase, SoapPhase::PskAgreed(_)) {
            self.abort(reason);
        }
    }

    fn store_peer_key(&mut self, ie: &SoapIe) -> Result<(), SoapError> {
        let group = group_for_key_size(ie.key_size()).ok_or(SoapError::MalformedIe("unsupported ECDSA key size"))?;
        let point = point_from_x_only(group, &ie.ecdsa_public_key)
            .map_err(|_| SoapError::MalformedIe("ECDSA key not on curve"))?;
        self.peer_ecdsa_public = Some((group, point));
        Ok(())
    }

    fn binding(&self, tag: u8, sender: MacAddr, receiver: MacAddr, nonce: &SessionNonce, ecdh_key: &[u8]) -> Vec<u8> {
        let group = self.negotiated_group.map_or(0, |g| g.id());
        signature_input(self.config.strict, tag, sender, receiver, group, nonce, ecdh_key)
    }

    fn nonce_or_zero(&self) -> SessionNonce {
        self.session_nonce.unwrap_or([0; SESSION_NONCE_LEN])
    }

    fn verify_peer(&mut self, msg: &SoapMessage, signed: &[u8]) -> Result<(), SoapError> {
        let (group, key) = self.peer_ecdsa_public.as_ref().expect("peer key stored before handshake");
        if self.config.accept_any_signature {
            return Ok(());
        }
        if let Err(e) = ecdsa_verify(key, *group, signed, &msg.ecdsa_signature) {
            self.verify_failures += 1;
            return Err(SoapError::SignatureInvalid(e));
        }
        Ok(())
    }

    fn build_message(&self, identity: &StationIdentity, tag: u8, peer: MacAddr, key: &EcdhKeyPair) -> SoapMessage {
        let ecdh_public_key = key.public_point().to_bytes();
        let nonce = self.nonce_or_zero();
        let signed = self.binding(tag, identity.mac, peer, &nonce, &ecdh_public_key);
        SoapMessage {
            ecdsa_signature: identity.ecdsa.sign(&signed),
            ecdh_public_key,
            session_nonce: (!self.config.strict).then_some(nonce),
        }
    }

    // ---- client side ----

    /// Handles the SOAP IE of a Beacon / Probe Response.
    ///
    /// Returns the IE to put in the Association Request, or `None` when
    /// negotiation fell back to WPA-PSK.
    pub fn client_on_advertisement(
        &mut self,
        ap_mac: MacAddr,
        ie: &SoapIe,
        client_groups: &GroupSet,
        identity: &StationIdentity,
    ) -> Result<Option<SoapIe>, SoapError> {
        if self.phase != SoapPhase::Idle {
            return Err(SoapError::UnexpectedPhase(self.phase.name()));
        }
        self.store_peer_key(ie)?;
        self.peer_mac = Some(ap_mac);
        let outcome = select_group(&GroupSet::from_advertised(&ie.group_list), client_groups);
        match outcome {
            NegotiationOutcome::Soap(g) => {
                self.negotiated_group = Some(registry_lookup(g).expect("GroupSet holds registered ids"));
                self.phase = SoapPhase::AdvertisementSeen;
            }
            NegotiationOutcome::WpaPskFallback => self.phase = SoapPhase::Fallback,
        }
        Ok(build_client_response(outcome, identity))
    }

    /// The AP accepted the association; wait for Message 1.
    pub fn client_on_association(&mut self, session_nonce: Option<SessionNonce>) -> Result<(), SoapError> {
        if self.phase != SoapPhase::AdvertisementSeen {
            return Err(SoapError::UnexpectedPhase(self.phase.name()));
        }
        if !self.config.strict && session_nonce.is_none() {
            return Err(SoapError::MalformedIe("association response lacks a session nonce"));
        }
        self.session_nonce = session_nonce;
        self.phase = SoapPhase::AwaitMsg1;
        Ok(())
    }

    /// Verifies Message 1 and answers with Message 2.
    ///
    /// After agreement, a byte-identical retransmission of the Message 1 that
    /// was already answered gets the same Message 2 again with no state
    /// change; any other Message 1 is a duplicate and is discarded.
    pub fn client_on_message1<R: RngCore + ?Sized>(
        &mut self,
        msg: &SoapMessage,
        identity: &StationIdentity,
        rng: &mut R,
    ) -> Result<SoapMessage, SoapError> {
        match &self.phase {
            SoapPhase::AwaitMsg1 => {}
            SoapPhase::PskAgreed(_) => {
                return match (&self.answered, &self.last_sent) {
                    (Some(seen), Some(reply)) if seen == msg => Ok(reply.clone()),
                    _ => Err(SoapError::Duplicate),
                };
            }
            other => return Err(SoapError::UnexpectedPhase(other.name())),
        }
        let group = self.negotiated_group.expect("set with AdvertisementSeen");
        let ap_mac = self.peer_mac.expect("set with AdvertisementSeen");
        let signed = self.binding(TAG_MSG1, ap_mac, identity.mac, &self.nonce_or_zero(), &msg.ecdh_public_key);
        self.verify_peer(msg, &signed)?;
        let peer_point = CurvePoint::from_bytes(group, &msg.ecdh_public_key).map_err(SoapError::InvalidPoint)?;

        let own = ecdh_generate(group, rng);
        let psk = match ecdh_agree(&own, &peer_point) {
            Ok(psk) => psk,
            Err(e) => {
                self.verify_failures += 1;
                return Err(SoapError::InvalidPoint(e));
            }
        };
        let reply = self.build_message(identity, TAG_MSG2, ap_mac, &own);
        self.own_ephemeral = Some(own);
        self.answered = Some(msg.clone());
        self.last_sent = Some(reply.clone());
        self.agree(psk);
        Ok(reply)
    }

    // ---- AP side ----

    /// Records the client's Association Request IE; validation of the chosen
    /// group happens when Message 1 is due.
    pub fn ap_on_association_request<R: RngCore + ?Sized>(
        &mut self,
        client_mac: MacAddr,
        ie: &SoapIe,
        rng: &mut R,
    ) -> Result<(), SoapError> {
        if self.phase != SoapPhase::Idle {
            return Err(SoapError::UnexpectedPhase(self.phase.name()));
        }
        if ie.group_count() != 1 {
            return Err(SoapError::MalformedIe("association request must carry exactly one group"));
        }
        self.store_peer_key(ie)?;
        self.peer_mac = Some(client_mac);
        // An unregistered id can never be in the AP's set; keep it for the check.
        self.negotiated_group = registry_lookup(ie.group_list[0]).ok();
        self.chosen_id = Some(ie.group_list[0]);
        if !self.config.strict {
            let mut nonce = [0u8; SESSION_NONCE_LEN];
            rng.fill_bytes(&mut nonce);
            self.session_nonce = Some(nonce);
        }
        self.phase = SoapPhase::Associated;
        Ok(())
    }

    /// Checks the client's group choice, then signs and returns Message 1.
    pub fn ap_send_message1<R: RngCore + ?Sized>(
        &mut self,
        identity: &StationIdentity,
        ap_groups: &GroupSet,
        rng: &mut R,
    ) -> Result<SoapMessage, SoapError> {
        if self.phase != SoapPhase::Associated {
            return Err(SoapError::UnexpectedPhase(self.phase.name()));
        }
        let chosen = self.chosen_id.expect("set with Associated");
        let group = match self.negotiated_group {
            Some(g) if ap_groups.contains(chosen) => g,
            _ => {
                self.abort(AbortReason::GroupNotOffered);
                return Err(SoapError::GroupNotOffered(chosen));
            }
        };
        let client = self.peer_mac.expect("set with Associated");
        let own = ecdh_generate(group, rng);
        let msg = self.build_message(identity, TAG_MSG1, client, &own);
        self.own_ephemeral = Some(own);
        self.last_sent = Some(msg.clone());
        self.retransmissions = 0;
        self.phase = SoapPhase::AwaitMsg2;
        Ok(msg)
    }

    /// Verifies Message 2 and derives the PSK.
    pub fn ap_on_message2(&mut self, msg: &SoapMessage, identity: &StationIdentity) -> Result<(), SoapError> {
        match &self.phase {
            SoapPhase::AwaitMsg2 => {}
            SoapPhase::PskAgreed(_) => return Err(SoapError::Duplicate),
            other => return Err(SoapError::UnexpectedPhase(other.name())),
        }
        let group = self.negotiated_group.expect("set with AwaitMsg2");
        let client = self.peer_mac.expect("set with AwaitMsg2");
        let signed = self.binding(TAG_MSG2, client, identity.mac, &self.nonce_or_zero(), &msg.ecdh_public_key);
        self.verify_peer(msg, &signed)?;
        let peer_point = match CurvePoint::from_bytes(group, &msg.ecdh_public_key) {
            Ok(p) => p,
            Err(e) => {
                self.verify_failures += 1;
                return Err(SoapError::InvalidPoint(e));
            }
        };
        let own = self.own_ephemeral.as_ref().expect("generated with Message 1");
        let psk = match ecdh_agree(own, &peer_point) {
            Ok(psk) => psk,
            Err(e) => {
                self.verify_failures += 1;
                return Err(SoapError::InvalidPoint(e));
            }
        };
        self.agree(psk);
        Ok(())
    }

    /// Message 1 timer. Retransmits the identical frame up to
    /// [`MAX_RETRANSMISSIONS`] times, then aborts.
    pub fn on_timeout(&mut self) -> TimeoutAction {
        if self.role != Role::Ap || self.phase != SoapPhase::AwaitMsg2 {
            return TimeoutAction::Nothing;
        }
        if self.retransmissions >= MAX_RETRANSMISSIONS {
            self.abort(AbortReason::Timeout);
            return TimeoutAction::Abort;
        }
        self.retransmissions += 1;
        TimeoutAction::Retransmit(self.last_sent.clone().expect("Message 1 sent"))
    }

    pub fn retransmissions(&self) -> u32 {
        self.retransmissions
    }
}
