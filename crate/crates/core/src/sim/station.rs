//! A simulated station: link state, SOAP session, 4-Way Handshake and the
//! per-station mitigation state, driven by frames and timers.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha20Rng;

use crate::codec::{
    EapolPdu, Element, Frame, MacAddr, ManagementFrame, MgmtSubtype, SoapIe, EID_RATES, EID_SOAP, EID_SOAP_NONCE,
    EID_SSID, REASON_LEAVING, SESSION_NONCE_LEN, STATUS_REFUSED, STATUS_SUCCESS,
};
use crate::crypto::{ecdsa_verify_x_only, SharedPsk};
use crate::fourway::{FourWayPhase, FourWayState, FourWayTimeout, RSN_IE};
use crate::negotiation::{build_ap_advertisement, GroupSet};
use crate::soap::{
    group_for_key_size, AbortReason, Role, SoapConfig, SoapPhase, SoapSession, StationIdentity, TimeoutAction,
    MAX_RETRANSMISSIONS, RETRANSMIT_TIMEOUT,
};

use super::script::{MitigationConfig, StationSpec};
use super::transcript::{Outcome, Record};

pub(crate) const EID_RSN: u8 = 48;
pub(crate) const RATES: [u8; 8] = [0x82, 0x84, 0x8b, 0x96, 0x0c, 0x12, 0x18, 0x24];
/// Elements a SOAP-unaware station understands; everything else is skipped.
pub(crate) const LEGACY_KNOWN_IDS: [u8; 3] = [EID_SSID, EID_RATES, EID_RSN];
const ASSOC_RETRIES: u32 = 3;
/// How long an associated client waits for keys before rescanning: the
/// AP's full retry budget for both handshakes.
const KEY_SETUP_TIMEOUT: u64 = 2 * RETRANSMIT_TIMEOUT * (MAX_RETRANSMISSIONS as u64 + 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Link {
    Idle,
    Associating,
    Associated,
    Disconnected,
}

impl Link {
    fn name(self) -> &'static str {
        match self {
            Link::Idle => "idle",
            Link::Associating => "associating",
            Link::Associated => "associated",
            Link::Disconnected => "disconnected",
        }
    }
}

/// Effects of one station step, collected by the engine.
pub(crate) struct Ctx<'a> {
    pub tick: u64,
    pub rng: &'a mut ChaCha20Rng,
    pub out: Vec<Frame>,
    pub records: Vec<Record>,
    /// (generation, delay) of a timer to arm.
    pub timer: Option<(u64, u64)>,
}

impl<'a> Ctx<'a> {
    pub fn new(tick: u64, rng: &'a mut ChaCha20Rng) -> Self {
        Self { tick, rng, out: Vec::new(), records: Vec::new(), timer: None }
    }
}

/// The octets a management frame signature covers: frame control, the three
/// addresses and the unsigned body.
pub(crate) fn mgmt_signing_input(f: &ManagementFrame) -> Vec<u8> {
    let mut m = vec![f.subtype.frame_control()];
    m.extend_from_slice(&f.dest.0);
    m.extend_from_slice(&f.source.0);
    m.extend_from_slice(&f.bssid.0);
    m.extend_from_slice(&f.encode_body_unsigned().unwrap_or_default());
    m
}

pub(crate) struct Station {
    pub name: String,
    pub identity: StationIdentity,
    pub channel: u8,
    ssid: String,
    groups: GroupSet,
    soap_aware: bool,
    force_legacy: bool,
    legacy_pmk: Option<SharedPsk>,
    pinned: Option<Vec<u8>>,
    mitigations: MitigationConfig,
    soap_config: SoapConfig,
    leak_psk: bool,

    link: Link,
    peer: Option<MacAddr>,
    peer_key_x: Option<Vec<u8>>,
    soap: SoapSession,
    soap_active: bool,
    fourway: Option<FourWayState>,
    cached_assoc: Option<Frame>,
    assoc_retries: u32,
    timer_gen: u64,
    failures: BTreeMap<(MacAddr, Vec<u8>), u32>,
    blacklist: BTreeSet<(MacAddr, Vec<u8>)>,
    verify_failures: u32,
}

impl Station {
    pub fn new(
        spec: &StationSpec,
        identity: StationIdentity,
        mitigations: MitigationConfig,
        soap_config: SoapConfig,
        pinned: Option<Vec<u8>>,
        leak_psk: bool,
    ) -> Self {
        Self {
            name: spec.name.clone(),
            channel: spec.channel,
            ssid: spec.ssid.clone(),
            groups: spec.groups.clone(),
            soap_aware: spec.soap_aware,
            force_legacy: spec.force_legacy,
            legacy_pmk: spec.legacy_pmk.map(SharedPsk::from_bytes),
            pinned,
            mitigations,
            soap_config,
            leak_psk,
            link: Link::Idle,
            peer: None,
            peer_key_x: None,
            soap: SoapSession::new(identity.role, soap_config),
            soap_active: false,
            fourway: None,
            cached_assoc: None,
            assoc_retries: 0,
            timer_gen: 0,
            failures: BTreeMap::new(),
            blacklist: BTreeSet::new(),
            verify_failures: 0,
            identity,
        }
    }

    pub fn role(&self) -> Role {
        self.identity.role
    }

    pub fn mac(&self) -> MacAddr {
        self.identity.mac
    }

    pub fn peer_mac(&self) -> Option<MacAddr> {
        self.peer
    }

    pub fn peer_key_x(&self) -> Option<&[u8]> {
        self.peer_key_x.as_deref()
    }

    pub fn blacklisted(&self) -> impl Iterator<Item = &(MacAddr, Vec<u8>)> {
        self.blacklist.iter()
    }

    pub fn verify_failures(&self) -> u32 {
        self.verify_failures
    }

    pub fn negotiated_group(&self) -> Option<u8> {
        self.soap_active.then(|| self.soap.negotiated_group().map(|g| g.id())).flatten()
    }

    pub fn fourway(&self) -> Option<&FourWayState> {
        self.fourway.as_ref()
    }

    /// PMK in use: `PSK_SOAP` or the legacy key.
    pub fn psk(&self) -> Option<SharedPsk> {
        if self.soap_active {
            self.soap.psk().cloned()
        } else if self.fourway.is_some() {
            self.legacy_pmk.clone()
        } else {
            None
        }
    }

    /// Clients scan on every channel until they pick an AP.
    pub fn listens_on(&self, channel: u8) -> bool {
        (self.role() == Role::Client && self.link == Link::Idle) || self.channel == channel
    }

    /// Whether this station waits only on its own timers or the peer; an idle
    /// client still needs beacons.
    pub fn quiescent(&self) -> bool {
        self.role() == Role::Ap || self.link != Link::Idle
    }

    pub fn is_idle_ap(&self) -> bool {
        self.role() == Role::Ap && self.link == Link::Idle
    }

    pub fn state_names(&self) -> [(&'static str, String); 3] {
        let soap = match self.soap.phase() {
            SoapPhase::Aborted(r) => format!("aborted({})", serde_json::to_value(r).unwrap().as_str().unwrap_or("")),
            p => p.name().to_owned(),
        };
        let fw = self.fourway.as_ref().map_or("none".to_owned(), |f| match f.phase() {
            FourWayPhase::Failed(r) => format!("failed({})", serde_json::to_value(r).unwrap().as_str().unwrap_or("")),
            p => p.name().to_owned(),
        });
        [("link", self.link.name().to_owned()), ("soap", soap), ("4way", fw)]
    }

    pub fn outcome(&self) -> Outcome {
        let fw = self.fourway.as_ref().map(|f| f.phase());
        match (self.link, fw) {
            (Link::Disconnected, _) => Outcome::Disconnected,
            (_, Some(FourWayPhase::Established)) => Outcome::Established,
            (_, Some(FourWayPhase::Failed(_))) => Outcome::Failed,
            _ if matches!(self.soap.phase(), SoapPhase::Aborted(_)) => Outcome::Failed,
            (Link::Associated, None) if !self.soap_active => Outcome::Associated,
            _ => Outcome::Incomplete,
        }
    }

    // ---- helpers ----

    fn arm_timer(&mut self, ctx: &mut Ctx, delay: u64) {
        self.timer_gen += 1;
        ctx.timer = Some((self.timer_gen, delay));
    }

    fn cancel_timer(&mut self, ctx: &mut Ctx) {
        self.timer_gen += 1;
        ctx.timer = None;
    }

    fn discard(&self, ctx: &mut Ctx, label: &str, reason: impl Into<String>) {
        ctx.records.push(Record::Discard {
            tick: ctx.tick,
            station: self.name.clone(),
            label: label.to_owned(),
            reason: reason.into(),
        });
    }

    fn blocked(&self, ctx: &mut Ctx, label: &str, reason: impl Into<String>) {
        ctx.records.push(Record::Blocked {
            tick: ctx.tick,
            station: self.name.clone(),
            label: label.to_owned(),
            reason: reason.into(),
        });
    }

    fn note(&self, ctx: &mut Ctx, text: impl Into<String>) {
        ctx.records.push(Record::Note { tick: ctx.tick, station: self.name.clone(), text: text.into() });
    }

    fn sign_mgmt(&self, mut f: ManagementFrame) -> ManagementFrame {
        if self.mitigations.sign_management_frames && self.soap_aware && !self.force_legacy {
            f.signature = Some(self.identity.ecdsa.sign(&mgmt_signing_input(&f)));
        }
        f
    }

    /// Signature check of a management frame against the key `x`.
    fn mgmt_signature_ok(&self, f: &ManagementFrame, x: &[u8]) -> bool {
        if self.soap_config.accept_any_signature {
            return true;
        }
        let (Some(sig), Some(g)) = (&f.signature, group_for_key_size(x.len())) else { return false };
        ecdsa_verify_x_only(x, g, &mgmt_signing_input(f), sig).is_ok()
    }

    /// Applies the signed-management-frame mitigation; `key` is the key the
    /// frame must verify under, when one is known.
    fn mgmt_frame_passes(&self, ctx: &mut Ctx, f: &ManagementFrame, label: &str, key: Option<&[u8]>) -> bool {
        if !self.mitigations.sign_management_frames || !self.soap_aware || self.force_legacy {
            return true;
        }
        let Some(key) = key else { return true };
        if self.mgmt_signature_ok(f, key) {
            return true;
        }
        let reason =
            if f.signature.is_some() { "management frame signature invalid" } else { "unsigned management frame" };
        self.blocked(ctx, label, reason);
        false
    }

    fn is_blacklisted(&self, mac: MacAddr, key: &[u8]) -> bool {
        self.blacklist.contains(&(mac, key.to_vec()))
    }

    /// Counts a verification failure against (mac, key); returns true when
    /// the pair has just been blacklisted.
    fn record_failure(&mut self, ctx: &mut Ctx, mac: MacAddr) -> bool {
        self.verify_failures += 1;
        let Some(key) = self.peer_key_x.clone() else { return false };
        let n = {
            let n = self.failures.entry((mac, key.clone())).or_insert(0);
            *n += 1;
            *n
        };
        match self.mitigations.blacklist_threshold {
            Some(t) if n >= t => {
                self.note(ctx, format!("blacklisting {mac} after {n} verification failures"));
                self.blacklist.insert((mac, key));
                true
            }
            _ => false,
        }
    }

    fn reset(&mut self, ctx: &mut Ctx) {
        self.link = Link::Idle;
        self.peer = None;
        self.peer_key_x = None;
        self.soap = SoapSession::new(self.role(), self.soap_config);
        self.soap_active = false;
        self.fourway = None;
        self.cached_assoc = None;
        self.assoc_retries = 0;
        self.cancel_timer(ctx);
    }

    fn leak(&self, ctx: &mut Ctx) {
        if self.leak_psk {
            if let Some(psk) = self.soap.psk() {
                self.note(ctx, format!("debug psk {}", psk.to_hex()));
            }
        }
    }

    fn elements(&self, soap_ie: Option<&SoapIe>) -> Vec<Element> {
        let mut e =
            vec![Element::new(EID_SSID, self.ssid.as_bytes().to_vec()), Element::new(EID_RATES, RATES.to_vec())];
        if let Some(ie) = soap_ie {
            e.push(ie.to_element().expect("advertisement fits an element"));
        }
        e
    }

    // ---- AP ----

    /// Periodic beacon, sent while no client is associated.
    pub fn beacon(&mut self, ctx: &mut Ctx) {
        if !self.is_idle_ap() {
            return;
        }
        let soap_ie = (self.soap_aware && !self.force_legacy)
            .then(|| build_ap_advertisement(&self.identity, &self.groups).ok())
            .flatten();
        let mut elements = self.elements(soap_ie.as_ref());
        elements.push(Element::new(EID_RSN, RSN_IE[2..].to_vec()));
        let f = ManagementFrame::new(MgmtSubtype::Beacon, MacAddr::BROADCAST, self.mac(), self.mac(), elements);
        ctx.out.push(Frame::Management(self.sign_mgmt(f)));
    }

    fn ap_on_assoc_request(&mut self, ctx: &mut Ctx, f: &ManagementFrame) {
        let label = "assoc-request";
        let client = f.source;
        if self.link != Link::Idle {
            if Some(client) == self.peer {
                match &self.cached_assoc {
                    Some(resp) => {
                        self.discard(ctx, label, "duplicate association request; response re-sent");
                        ctx.out.push(resp.clone());
                    }
                    None => self.discard(ctx, label, "duplicate association request"),
                }
            } else {
                self.discard(ctx, label, "AP already serving a client");
                let resp = ManagementFrame::association_response(client, self.mac(), STATUS_REFUSED, vec![]);
                ctx.out.push(Frame::Management(self.sign_mgmt(resp)));
            }
            return;
        }
        let soap_ie = match f.element(EID_SOAP).map(SoapIe::from_element) {
            Some(Ok(ie)) if self.soap_aware && !self.force_legacy => Some(ie),
            Some(Err(e)) if self.soap_aware => {
                self.discard(ctx, label, format!("malformed SOAP IE: {e}"));
                return;
            }
            _ => None,
        };
        let Some(ie) = soap_ie else {
            self.ap_accept_legacy(ctx, client);
            return;
        };
        if self.is_blacklisted(client, &ie.ecdsa_public_key) {
            self.blocked(ctx, label, "source blacklisted");
            return;
        }
        if !self.mgmt_frame_passes(ctx, f, label, Some(&ie.ecdsa_public_key)) {
            return;
        }
        if let Err(e) = self.soap.ap_on_association_request(client, &ie, ctx.rng) {
            self.discard(ctx, label, e.to_string());
            self.soap = SoapSession::new(Role::Ap, self.soap_config);
            return;
        }
        self.link = Link::Associated;
        self.peer = Some(client);
        self.peer_key_x = Some(ie.ecdsa_public_key.clone());
        self.soap_active = true;
        let mut elements = Vec::new();
        if let Some(nonce) = self.soap.session_nonce() {
            elements.push(Element::new(EID_SOAP_NONCE, nonce.to_vec()));
        }
        let resp = ManagementFrame::association_response(client, self.mac(), STATUS_SUCCESS, elements);
        let resp = Frame::Management(self.sign_mgmt(resp));
        self.cached_assoc = Some(resp.clone());
        ctx.out.push(resp);
        match self.soap.ap_send_message1(&self.identity, &self.groups, ctx.rng) {
            Ok(m1) => {
                ctx.out.push(self.eapol(client, EapolPdu::Soap(m1)));
                self.arm_timer(ctx, RETRANSMIT_TIMEOUT);
            }
            Err(e) => {
                self.note(ctx, format!("SOAP handshake aborted: {e}"));
                let d = ManagementFrame::disassociation(client, self.mac(), self.mac(), REASON_LEAVING);
                ctx.out.push(Frame::Management(self.sign_mgmt(d)));
            }
        }
    }

    fn ap_accept_legacy(&mut self, ctx: &mut Ctx, client: MacAddr) {
        self.link = Link::Associated;
        self.peer = Some(client);
        let resp = Frame::Management(ManagementFrame::association_response(client, self.mac(), STATUS_SUCCESS, vec![]));
        self.cached_assoc = Some(resp.clone());
        ctx.out.push(resp);
        if let Some(pmk) = self.legacy_pmk.clone() {
            self.start_fourway(ctx, pmk, client);
        }
    }

    fn start_fourway(&mut self, ctx: &mut Ctx, pmk: SharedPsk, client: MacAddr) {
        let mut fw = FourWayState::new(Role::Ap, pmk, self.mac(), client);
        let m1 = fw.ap_start(ctx.rng).expect("fresh state");
        self.fourway = Some(fw);
        ctx.out.push(self.eapol(client, EapolPdu::Key(m1)));
        self.arm_timer(ctx, crate::fourway::RETRANSMIT_TIMEOUT);
    }

    fn eapol(&self, dest: MacAddr, pdu: EapolPdu) -> Frame {
        let bssid = if self.role() == Role::Ap { self.mac() } else { dest };
        Frame::Eapol { dest, source: self.mac(), bssid, pdu }
    }

    fn ap_on_soap(&mut self, ctx: &mut Ctx, source: MacAddr, msg: &crate::codec::SoapMessage) {
        let label = "soap-m2";
        if Some(source) != self.peer || !self.soap_active {
            self.discard(ctx, label, "no SOAP handshake with this station");
            return;
        }
        match self.soap.ap_on_message2(msg, &self.identity) {
            Ok(()) => {
                self.leak(ctx);
                let psk = self.soap.psk().cloned().expect("agreed");
                self.start_fourway(ctx, psk, source);
            }
            Err(e) => {
                self.discard(ctx, label, e.to_string());
                if e.is_verification_failure() && self.record_failure(ctx, source) {
                    self.soap.abandon(AbortReason::Blacklisted);
                    self.reset(ctx);
                }
            }
        }
    }

    fn ap_on_timer(&mut self, ctx: &mut Ctx) {
        if let Some(fw) = self.fourway.as_mut() {
            match fw.on_timeout() {
                FourWayTimeout::Retransmit(k) => {
                    let peer = self.peer.expect("4-Way runs with a peer");
                    ctx.out.push(self.eapol(peer, EapolPdu::Key(k)));
                    self.arm_timer(ctx, crate::fourway::RETRANSMIT_TIMEOUT);
                }
                FourWayTimeout::Fail => self.note(ctx, "4-Way Handshake timed out"),
                FourWayTimeout::Nothing => {}
            }
            return;
        }
        match self.soap.on_timeout() {
            TimeoutAction::Retransmit(m1) => {
                let peer = self.peer.expect("SOAP runs with a peer");
                ctx.out.push(self.eapol(peer, EapolPdu::Soap(m1)));
                self.arm_timer(ctx, RETRANSMIT_TIMEOUT);
            }
            TimeoutAction::Abort => {
                self.note(ctx, "SOAP handshake timed out; association dropped");
                self.reset(ctx);
            }
            TimeoutAction::Nothing => {}
        }
    }

    // ---- client ----

    fn client_on_beacon(&mut self, ctx: &mut Ctx, f: &ManagementFrame, channel: u8, label: &str) {
        if self.link != Link::Idle {
            return;
        }
        let ap = f.source;
        let use_soap = self.soap_aware && !self.force_legacy;
        let soap_ie = if use_soap {
            match f.element(EID_SOAP).map(SoapIe::from_element) {
                Some(Ok(ie)) => Some(ie),
                Some(Err(e)) => {
                    self.discard(ctx, label, format!("malformed SOAP IE: {e}"));
                    return;
                }
                None => None,
            }
        } else {
            None
        };
        let mut response = None;
        if let Some(ie) = &soap_ie {
            let key = &ie.ecdsa_public_key;
            if self.pinned.as_ref().is_some_and(|p| p != key) {
                self.discard(ctx, label, "ECDSA key differs from the pinned AP key");
                return;
            }
            if self.is_blacklisted(ap, key) {
                self.blocked(ctx, label, "source blacklisted");
                return;
            }
            if !self.mgmt_frame_passes(ctx, f, label, Some(key)) {
                return;
            }
            match self.soap.client_on_advertisement(ap, ie, &self.groups, &self.identity) {
                Ok(r) => response = r,
                Err(e) => {
                    self.discard(ctx, label, e.to_string());
                    self.soap = SoapSession::new(Role::Client, self.soap_config);
                    return;
                }
            }
            if response.is_some() {
                self.peer_key_x = Some(key.clone());
                self.soap_active = true;
            } else {
                self.note(ctx, "no common ECDH group; falling back to WPA-PSK");
            }
        }
        self.peer = Some(ap);
        self.channel = channel;
        self.link = Link::Associating;
        self.assoc_retries = 0;
        let req =
            ManagementFrame::new(MgmtSubtype::AssociationRequest, ap, self.mac(), ap, self.elements(response.as_ref()));
        let req = Frame::Management(if self.soap_active { self.sign_mgmt(req) } else { req });
        self.cached_assoc = Some(req.clone());
        ctx.out.push(req);
        self.arm_timer(ctx, RETRANSMIT_TIMEOUT);
    }

    fn client_on_assoc_response(&mut self, ctx: &mut Ctx, f: &ManagementFrame) {
        let label = "assoc-response";
        if self.link != Link::Associating || Some(f.source) != self.peer {
            self.discard(ctx, label, "not waiting for this association response");
            return;
        }
        let key = if self.soap_active { self.peer_key_x.clone() } else { None };
        if !self.mgmt_frame_passes(ctx, f, label, key.as_deref()) {
            return;
        }
        if f.status_code() != Some(STATUS_SUCCESS) {
            self.note(ctx, "association refused");
            self.reset(ctx);
            return;
        }
        self.cancel_timer(ctx);
        self.link = Link::Associated;
        if self.soap_active {
            let nonce =
                f.element(EID_SOAP_NONCE).and_then(|e| <[u8; SESSION_NONCE_LEN]>::try_from(e.payload.as_slice()).ok());
            if let Err(e) = self.soap.client_on_association(nonce) {
                self.discard(ctx, label, e.to_string());
            }
        } else if let Some(pmk) = self.legacy_pmk.clone() {
            self.fourway = Some(FourWayState::new(Role::Client, pmk, f.source, self.mac()));
        }
        if self.soap_active || self.fourway.is_some() {
            self.arm_timer(ctx, KEY_SETUP_TIMEOUT);
        }
    }

    fn client_on_soap(&mut self, ctx: &mut Ctx, source: MacAddr, msg: &crate::codec::SoapMessage) {
        let label = "soap-m1";
        if self.link != Link::Associated || Some(source) != self.peer || !self.soap_active {
            self.discard(ctx, label, "no SOAP handshake with this station");
            return;
        }
        if self.fourway.as_ref().is_some_and(|f| f.phase() != FourWayPhase::Idle) {
            self.discard(ctx, label, "replayed Message 1 after the 4-Way Handshake began");
            return;
        }
        let agreed_before = self.soap.psk().is_some();
        match self.soap.client_on_message1(msg, &self.identity, ctx.rng) {
            Ok(m2) => {
                if agreed_before {
                    self.discard(ctx, label, "retransmitted Message 1; cached Message 2 re-sent");
                } else {
                    self.leak(ctx);
                    let psk = self.soap.psk().cloned().expect("agreed");
                    self.fourway = Some(FourWayState::new(Role::Client, psk, source, self.mac()));
                }
                ctx.out.push(self.eapol(source, EapolPdu::Soap(m2)));
            }
            Err(e) => {
                self.discard(ctx, label, e.to_string());
                if e.is_verification_failure() && self.record_failure(ctx, source) {
                    self.soap.abandon(AbortReason::Blacklisted);
                    self.reset(ctx);
                }
            }
        }
    }

    fn client_on_timer(&mut self, ctx: &mut Ctx) {
        if self.link == Link::Associated {
            self.note(ctx, "no keys installed in time; rescanning");
            self.soap.abandon(AbortReason::Timeout);
            self.reset(ctx);
            return;
        }
        if self.link != Link::Associating {
            return;
        }
        if self.assoc_retries >= ASSOC_RETRIES {
            self.note(ctx, "association timed out");
            self.reset(ctx);
            return;
        }
        self.assoc_retries += 1;
        if let Some(req) = self.cached_assoc.clone() {
            ctx.out.push(req);
        }
        self.arm_timer(ctx, RETRANSMIT_TIMEOUT);
    }

    // ---- common ----

    fn on_disassoc(&mut self, ctx: &mut Ctx, f: &ManagementFrame) {
        let label = "disassoc";
        if Some(f.source) != self.peer || matches!(self.link, Link::Idle | Link::Disconnected) {
            self.discard(ctx, label, "not associated with the sender");
            return;
        }
        let key = if self.soap_active { self.peer_key_x.clone() } else { None };
        if !self.mgmt_frame_passes(ctx, f, label, key.as_deref()) {
            return;
        }
        self.cancel_timer(ctx);
        match self.role() {
            Role::Client => {
                self.note(ctx, "disassociated by peer");
                self.soap = SoapSession::new(Role::Client, self.soap_config);
                self.fourway = None;
                self.link = Link::Disconnected;
            }
            Role::Ap => self.reset(ctx),
        }
    }

    fn on_eapol_key(&mut self, ctx: &mut Ctx, source: MacAddr, k: &crate::codec::EapolKeyFrame, label: &str) {
        if Some(source) != self.peer {
            self.discard(ctx, label, "not associated with the sender");
            return;
        }
        let Some(fw) = self.fourway.as_mut() else {
            self.discard(ctx, label, "no 4-Way Handshake in progress");
            return;
        };
        match fw.handle(k, ctx.rng) {
            Ok(reply) => {
                let done = matches!(fw.phase(), FourWayPhase::Established);
                if let Some(r) = reply {
                    ctx.out.push(self.eapol(source, EapolPdu::Key(r)));
                }
                if self.role() == Role::Ap && !done {
                    self.arm_timer(ctx, crate::fourway::RETRANSMIT_TIMEOUT);
                } else if done {
                    self.cancel_timer(ctx);
                }
            }
            Err(e) => {
                let failed = matches!(fw.phase(), FourWayPhase::Failed(_));
                self.discard(ctx, label, e.to_string());
                if failed {
                    self.cancel_timer(ctx);
                }
            }
        }
    }

    /// Handles a frame already addressed to this station (or broadcast).
    pub fn receive(&mut self, ctx: &mut Ctx, frame: &Frame, label: &str, channel: u8) {
        match frame {
            Frame::Management(f) => match (self.role(), f.subtype) {
                (Role::Client, MgmtSubtype::Beacon | MgmtSubtype::ProbeResponse) => {
                    let f = if self.soap_aware { f.clone() } else { legacy_view(f) };
                    self.client_on_beacon(ctx, &f, channel, label)
                }
                (Role::Client, MgmtSubtype::AssociationResponse) => self.client_on_assoc_response(ctx, f),
                (Role::Ap, MgmtSubtype::AssociationRequest) => {
                    let f = if self.soap_aware { f.clone() } else { legacy_view(f) };
                    self.ap_on_assoc_request(ctx, &f)
                }
                (_, MgmtSubtype::Disassociation) => self.on_disassoc(ctx, f),
                _ => {}
            },
            Frame::Eapol { source, pdu: EapolPdu::Soap(m), .. } => match self.role() {
                Role::Client => self.client_on_soap(ctx, *source, m),
                Role::Ap => self.ap_on_soap(ctx, *source, m),
            },
            Frame::Eapol { source, pdu: EapolPdu::Key(k), .. } => self.on_eapol_key(ctx, *source, k, label),
        }
    }

    /// Parse failure of a frame addressed to this station.
    pub fn reject(&self, ctx: &mut Ctx, label: &str, reason: &str) {
        self.discard(ctx, label, reason.to_owned());
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, gen: u64) {
        if gen != self.timer_gen {
            return;
        }
        match self.role() {
            Role::Ap => self.ap_on_timer(ctx),
            Role::Client => self.client_on_timer(ctx),
        }
    }

    /// SOAP layout for parsing inbound frames; `None` for unaware stations.
    pub fn inbound_layout(&self) -> Option<crate::codec::SoapLayout> {
        if self.soap_aware {
            self.soap.inbound_layout()
        } else {
            None
        }
    }
}

/// What a SOAP-unaware parser keeps of a management frame.
pub(crate) fn legacy_view(f: &ManagementFrame) -> ManagementFrame {
    let mut g = f.clone();
    g.elements.retain(|e| LEGACY_KNOWN_IDS.contains(&e.id));
    g.signature = None;
    g
}
