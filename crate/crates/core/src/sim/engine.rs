use std::collections::BTreeMap;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::codec::{
    EapolPdu, Element, Frame, MacAddr, ManagementFrame, MgmtSubtype, SoapIe, SoapLayout, SoapMessage, EID_RATES,
    EID_SOAP, EID_SSID,
};
use crate::crypto::{ecdh_generate, registry_lookup, sha256, EcdsaKeyPair};
use crate::fourway::RSN_IE;
use crate::soap::{group_for_key_size, signature_input, Role, SoapConfig, StationIdentity, TAG_MSG1, TAG_MSG2};

use super::script::{Action, AdversarySpec, Capability, ScenarioScript, ScriptError, StationSpec, Trigger};
use super::station::{mgmt_signing_input, Ctx, Station, EID_RSN, RATES};
use super::transcript::{fingerprint, Record, Run, Secrets, StationVerdict, Transcript};

/// Ticks between beacons.
pub const BEACON_INTERVAL: u64 = 100;
const ADVERSARY: usize = usize::MAX;

fn key_seed(mac: MacAddr, explicit: Option<u64>) -> u64 {
    explicit.unwrap_or_else(|| {
        let h = sha256(&mac.0);
        u64::from_be_bytes(h[..8].try_into().unwrap())
    })
}

/// Long-term identity of a station; depends only on the script, never on
/// the run seed.
pub fn station_identity(spec: &StationSpec) -> StationIdentity {
    let group = registry_lookup(spec.ecdsa_group).expect("validated script");
    let mut rng = ChaCha20Rng::seed_from_u64(key_seed(spec.mac, spec.key_seed));
    StationIdentity::generate(spec.mac, spec.role, group, &mut rng)
}

fn adversary_key(spec: &AdversarySpec, group_id: u8) -> EcdsaKeyPair {
    let group = registry_lookup(group_id).expect("registered");
    let mut rng = ChaCha20Rng::seed_from_u64(key_seed(spec.mac, spec.key_seed) ^ group_id as u64);
    EcdsaKeyPair::generate(group, &mut rng)
}

#[derive(Debug, Clone)]
enum Event {
    BeaconTick,
    Scheduled(usize),
    Timer { station: usize, gen: u64 },
    Deliver { to: usize, bytes: Vec<u8>, label: String, channel: u8 },
}

struct Adversary {
    spec: AdversarySpec,
    rng: ChaCha20Rng,
    keys: BTreeMap<u8, EcdsaKeyPair>,
    captured: BTreeMap<String, (Vec<u8>, u8)>,
    seen: BTreeMap<String, u32>,
    ap_ie: Option<SoapIe>,
    client_ie: Option<SoapIe>,
    nonce_extension: bool,
}

impl Adversary {
    fn key(&mut self, group_id: u8) -> &EcdsaKeyPair {
        let spec = &self.spec;
        self.keys.entry(group_id).or_insert_with(|| adversary_key(spec, group_id))
    }
}

struct Sim<'a> {
    script: &'a ScenarioScript,
    tick: u64,
    seq: u64,
    queue: BTreeMap<(u64, u8, u64), Event>,
    /// Pending events other than beacon ticks.
    busy: usize,
    stations: Vec<Station>,
    rngs: Vec<ChaCha20Rng>,
    adversary: Option<Adversary>,
    records: Vec<Record>,
    fired: Vec<bool>,
    secrets: Secrets,
}

/// SOAP frames are labelled by direction: the AP sends Message 1.
pub fn frame_label(frame: &Frame) -> String {
    match frame {
        Frame::Eapol { source, bssid, pdu: EapolPdu::Soap(_), .. } => {
            if source == bssid { "soap-m1" } else { "soap-m2" }.to_owned()
        }
        f => f.label().to_owned(),
    }
}

impl<'a> Sim<'a> {
    fn push(&mut self, tick: u64, prio: u8, ev: Event) {
        if !matches!(ev, Event::BeaconTick) {
            self.busy += 1;
        }
        self.seq += 1;
        self.queue.insert((tick, prio, self.seq), ev);
    }

    fn name_of(&self, idx: usize) -> String {
        if idx == ADVERSARY {
            "adversary".to_owned()
        } else {
            self.stations[idx].name.clone()
        }
    }

    fn step<F: FnOnce(&mut Station, &mut Ctx)>(&mut self, idx: usize, f: F) {
        let before = self.stations[idx].state_names();
        let mut ctx = Ctx::new(self.tick, &mut self.rngs[idx]);
        f(&mut self.stations[idx], &mut ctx);
        let Ctx { out, records, timer, .. } = ctx;
        self.records.extend(records);
        let after = self.stations[idx].state_names();
        for ((machine, from), (_, to)) in before.into_iter().zip(after) {
            if from != to {
                self.records.push(Record::Transition {
                    tick: self.tick,
                    station: self.stations[idx].name.clone(),
                    machine: machine.to_owned(),
                    from,
                    to,
                });
            }
        }
        if let Some((gen, delay)) = timer {
            self.push(self.tick + delay, 1, Event::Timer { station: idx, gen });
        }
        let channel = self.stations[idx].channel;
        for frame in out {
            self.transmit(idx, frame, channel);
        }
    }

    /// Puts a frame on the air: the adversary sees it first, then every
    /// station on the channel whose address matches gets it one tick later.
    fn transmit(&mut self, from: usize, frame: Frame, channel: u8) {
        let bytes = match frame.to_wire() {
            Ok(b) => b,
            Err(e) => {
                self.records.push(Record::Note {
                    tick: self.tick,
                    station: self.name_of(from),
                    text: format!("frame not encodable: {e}"),
                });
                return;
            }
        };
        let label = frame_label(&frame);
        self.records.push(Record::Send {
            tick: self.tick,
            from: self.name_of(from),
            label: label.clone(),
            dest: frame.dest(),
            size: bytes.len(),
            bytes: bytes.clone(),
        });
        if from != ADVERSARY && self.adversary.is_some() && self.adversary_observes(&frame, &bytes, &label, channel) {
            return;
        }
        self.deliver(from, &frame, bytes, &label, channel);
        if from != ADVERSARY {
            self.run_frame_triggers(&label);
        }
    }

    fn deliver(&mut self, from: usize, frame: &Frame, bytes: Vec<u8>, label: &str, channel: u8) {
        let dest = frame.dest();
        for to in 0..self.stations.len() {
            let s = &self.stations[to];
            if to == from || !(dest == s.mac() || dest == MacAddr::BROADCAST) || !s.listens_on(channel) {
                continue;
            }
            self.push(self.tick + 1, 1, Event::Deliver { to, bytes: bytes.clone(), label: label.to_owned(), channel });
        }
    }

    /// Returns true when the adversary keeps the frame off the air.
    fn adversary_observes(&mut self, frame: &Frame, bytes: &[u8], label: &str, channel: u8) -> bool {
        let script = self.script;
        let adv = self.adversary.as_mut().expect("checked by caller");
        adv.captured.insert(label.to_owned(), (bytes.to_vec(), channel));
        if let Frame::Management(m) = frame {
            if let Some(Ok(ie)) = m.element(EID_SOAP).map(SoapIe::from_element) {
                match m.subtype {
                    MgmtSubtype::Beacon | MgmtSubtype::ProbeResponse if m.source == script.ap().mac => {
                        adv.ap_ie = Some(ie)
                    }
                    MgmtSubtype::AssociationRequest => adv.client_ie = Some(ie),
                    _ => {}
                }
            }
        }
        if adv.spec.has(Capability::DeleteIntercept) && adv.spec.drop_probability > 0.0 {
            let roll = (adv.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            if roll < adv.spec.drop_probability {
                self.records.push(Record::Drop { tick: self.tick, label: label.to_owned(), reason: "deleted".into() });
                return true;
            }
        }
        if adv.spec.has(Capability::MitmSubstitute) && label.starts_with("soap") {
            if let Some(forged) = self.substitute(frame, bytes, label) {
                self.records.push(Record::Drop {
                    tick: self.tick,
                    label: label.to_owned(),
                    reason: "intercepted".into(),
                });
                self.records.push(Record::Inject {
                    tick: self.tick,
                    label: label.to_owned(),
                    note: "ECDH key substituted and re-signed with the attacker key".into(),
                });
                self.transmit(ADVERSARY, forged, channel);
                return true;
            }
        }
        false
    }

    /// Rebuilds a SOAP Message around an attacker ECDH key. The signature is
    /// made with an attacker key on the sender's curve so the frame parses.
    fn substitute(&mut self, frame: &Frame, bytes: &[u8], label: &str) -> Option<Frame> {
        let strict = self.script.strict;
        let adv = self.adversary.as_mut()?;
        let (ap_ie, client_ie) = (adv.ap_ie.clone()?, adv.client_ie.clone()?);
        let group = registry_lookup(*client_ie.group_list.first()?).ok()?;
        let (tag, sender_ie) = if label == "soap-m1" { (TAG_MSG1, &ap_ie) } else { (TAG_MSG2, &client_ie) };
        let sig_group = group_for_key_size(sender_ie.key_size())?;
        let mut msg = None;
        for nonce_extension in [!strict, strict] {
            let layout = SoapLayout {
                ecdh_key_len: group.point_len(),
                signature_len: sig_group.signature_len(),
                nonce_extension,
            };
            if let Ok(Frame::Eapol { pdu: EapolPdu::Soap(m), .. }) = Frame::from_wire(bytes, Some(layout)) {
                adv.nonce_extension = nonce_extension;
                msg = Some(m);
                break;
            }
        }
        let msg = msg?;
        let eph = ecdh_generate(group, &mut adv.rng);
        let ecdh_public_key = eph.public_point().to_bytes();
        let nonce = msg.session_nonce.unwrap_or_default();
        let signed = signature_input(
            !adv.nonce_extension,
            tag,
            frame.source(),
            frame.dest(),
            group.id(),
            &nonce,
            &ecdh_public_key,
        );
        let ecdsa_signature = adv.key(sig_group.id()).sign(&signed);
        self.secrets.adversary_ephemeral.push(eph);
        let forged = SoapMessage { ecdh_public_key, ecdsa_signature, session_nonce: msg.session_nonce };
        match frame {
            Frame::Eapol { dest, source, bssid, .. } => {
                Some(Frame::Eapol { dest: *dest, source: *source, bssid: *bssid, pdu: EapolPdu::Soap(forged) })
            }
            _ => None,
        }
    }

    fn run_frame_triggers(&mut self, label: &str) {
        let Some(adv) = self.adversary.as_mut() else { return };
        let n = adv.seen.entry(label.to_owned()).or_insert(0);
        *n += 1;
        let n = *n;
        let due: Vec<usize> = (0..self.script.schedule.len())
            .filter(|&i| {
                !self.fired[i]
                    && matches!(&self.script.schedule[i].at, Trigger::Frame { after, nth } if after == label && *nth == n)
            })
            .collect();
        for i in due {
            self.fire(i);
        }
    }

    fn forged_beacon(&mut self) -> (Frame, u8) {
        let ap = self.script.ap();
        let adv = self.adversary.as_mut().expect("inject needs an adversary");
        let group = adv.spec.ecdsa_group;
        let key = adv.key(group).public_key_x().to_vec();
        let ie = SoapIe::new(ap.groups.ids(), key);
        let elements = vec![
            Element::new(EID_SSID, ap.ssid.as_bytes().to_vec()),
            Element::new(EID_RATES, RATES.to_vec()),
            ie.to_element().expect("advertisement fits an element"),
            Element::new(EID_RSN, RSN_IE[2..].to_vec()),
        ];
        let mut f = ManagementFrame::new(MgmtSubtype::Beacon, MacAddr::BROADCAST, ap.mac, ap.mac, elements);
        f.signature = Some(adv.key(group).sign(&mgmt_signing_input(&f)));
        (Frame::Management(f), ap.channel)
    }

    fn fire(&mut self, i: usize) {
        self.fired[i] = true;
        let action = self.script.schedule[i].action.clone();
        match action {
            Action::InjectBeacon => {
                let (f, ch) = self.forged_beacon();
                self.inject(f, ch, "beacon with the attacker's ECDSA key");
            }
            Action::InjectDisassoc { to } => {
                let target = self.script.station(&to).expect("validated");
                let ap = self.script.ap();
                let claimed = if target.role == Role::Client { ap.mac } else { self.script.client().mac };
                let f = ManagementFrame::disassociation(target.mac, claimed, ap.mac, crate::codec::REASON_LEAVING);
                self.inject(Frame::Management(f), ap.channel, &format!("disassociation to {to} spoofing {claimed}"));
            }
            Action::Replay { label } => {
                let captured = self.adversary.as_ref().and_then(|a| a.captured.get(&label).cloned());
                match captured {
                    Some((bytes, ch)) => {
                        self.records.push(Record::Inject {
                            tick: self.tick,
                            label: label.clone(),
                            note: "replay of a captured frame".into(),
                        });
                        self.records.push(Record::Send {
                            tick: self.tick,
                            from: "adversary".into(),
                            label: label.clone(),
                            dest: MacAddr(bytes[4..10].try_into().unwrap()),
                            size: bytes.len(),
                            bytes: bytes.clone(),
                        });
                        let dest = MacAddr(bytes[4..10].try_into().unwrap());
                        for to in 0..self.stations.len() {
                            let s = &self.stations[to];
                            if (dest == s.mac() || dest == MacAddr::BROADCAST) && s.listens_on(ch) {
                                self.push(
                                    self.tick + 1,
                                    1,
                                    Event::Deliver { to, bytes: bytes.clone(), label: label.clone(), channel: ch },
                                );
                            }
                        }
                    }
                    None => self.records.push(Record::Note {
                        tick: self.tick,
                        station: "adversary".into(),
                        text: format!("nothing captured with label {label}"),
                    }),
                }
            }
        }
    }

    fn inject(&mut self, frame: Frame, channel: u8, note: &str) {
        self.records.push(Record::Inject { tick: self.tick, label: frame_label(&frame), note: note.to_owned() });
        self.transmit(ADVERSARY, frame, channel);
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::BeaconTick => {
                let flood = self.adversary.as_ref().is_some_and(|a| a.spec.beacon_flood);
                if flood && self.stations.iter().any(|s| s.is_idle_ap()) {
                    let (f, ch) = self.forged_beacon();
                    self.inject(f, ch, "beacon with the attacker's ECDSA key");
                }
                // The evil twin, pushed last, is the stronger signal: its
                // beacon goes out first.
                for idx in (0..self.stations.len()).rev() {
                    if self.stations[idx].is_idle_ap() {
                        self.step(idx, |s, ctx| s.beacon(ctx));
                    }
                }
                if self.tick + BEACON_INTERVAL <= self.script.max_ticks {
                    self.push(self.tick + BEACON_INTERVAL, 0, Event::BeaconTick);
                }
            }
            Event::Scheduled(i) => {
                if !self.fired[i] {
                    self.fire(i);
                }
            }
            Event::Timer { station, gen } => self.step(station, |s, ctx| s.on_timer(ctx, gen)),
            Event::Deliver { to, bytes, label, channel } => {
                if !self.stations[to].listens_on(channel) {
                    return;
                }
                self.records.push(Record::Deliver {
                    tick: self.tick,
                    to: self.stations[to].name.clone(),
                    label: label.clone(),
                });
                let layout = self.stations[to].inbound_layout();
                match Frame::from_wire(&bytes, layout) {
                    Ok(frame) => self.step(to, |s, ctx| s.receive(ctx, &frame, &label, channel)),
                    Err(e) => self.step(to, |s, ctx| s.reject(ctx, &label, &e.to_string())),
                }
            }
        }
    }

    fn all_quiescent(&self) -> bool {
        self.stations.iter().all(|s| s.quiescent())
    }

    fn run(&mut self) {
        while let Some((&key, _)) = self.queue.iter().next() {
            if key.0 > self.script.max_ticks || (self.busy == 0 && self.all_quiescent()) {
                break;
            }
            let ev = self.queue.remove(&key).expect("present");
            if !matches!(ev, Event::BeaconTick) {
                self.busy -= 1;
            }
            self.tick = key.0;
            self.handle(ev);
        }
    }
}

/// Runs a scenario to completion. The transcript is a pure function of
/// `(script, seed)`.
pub fn run_scenario(script: &ScenarioScript, seed: u64) -> Result<Run, ScriptError> {
    script.validate()?;
    let soap_config = SoapConfig { strict: script.strict, accept_any_signature: script.fault_accept_any_signature };
    let ap_spec = script.ap();
    let mut stations = Vec::new();
    let mut identities: Vec<(String, Vec<u8>)> = Vec::new();
    for spec in [ap_spec, script.client()] {
        let identity = station_identity(spec);
        let pinned = spec
            .pin_ap_key
            .as_ref()
            .map(|n| station_identity(script.station(n).expect("validated")).ecdsa.public_key_x().to_vec());
        identities.push((spec.name.clone(), identity.ecdsa.public_key_x().to_vec()));
        stations.push(Station::new(spec, identity, script.mitigations, soap_config, pinned, script.debug_leak_psk));
    }
    let adversary = script.adversary.as_ref().map(|spec| Adversary {
        spec: spec.clone(),
        rng: ChaCha20Rng::seed_from_u64(seed).tap_stream(1000),
        keys: BTreeMap::new(),
        captured: BTreeMap::new(),
        seen: BTreeMap::new(),
        ap_ie: None,
        client_ie: None,
        nonce_extension: !script.strict,
    });
    if let Some(spec) = script.adversary.as_ref().filter(|a| a.has(Capability::Masquerade)) {
        // Evil twin: the AP's MAC and SSID, the attacker's own key and channel.
        let rogue_spec = StationSpec {
            name: "rogue".into(),
            channel: spec.channel,
            ecdsa_group: spec.ecdsa_group,
            legacy_pmk: None,
            ..ap_spec.clone()
        };
        let identity =
            StationIdentity { mac: ap_spec.mac, ecdsa: adversary_key(spec, spec.ecdsa_group), role: Role::Ap };
        identities.push(("rogue".into(), identity.ecdsa.public_key_x().to_vec()));
        stations.push(Station::new(&rogue_spec, identity, script.mitigations, soap_config, None, false));
    }
    for g in crate::crypto::registered_groups() {
        if let Some(a) = &script.adversary {
            identities.push(("adversary".into(), adversary_key(a, g.id()).public_key_x().to_vec()));
        }
    }
    let rngs = (0..stations.len()).map(|i| ChaCha20Rng::seed_from_u64(seed).tap_stream(i as u64 + 1)).collect();

    let mut sim = Sim {
        script,
        tick: 0,
        seq: 0,
        queue: BTreeMap::new(),
        busy: 0,
        stations,
        rngs,
        adversary,
        records: Vec::new(),
        fired: vec![false; script.schedule.len()],
        secrets: Secrets::default(),
    };
    for (i, step) in script.schedule.iter().enumerate() {
        if let Trigger::Tick { tick } = step.at {
            sim.push(tick, 0, Event::Scheduled(i));
        }
    }
    sim.push(0, 0, Event::BeaconTick);
    sim.run();

    let mut verdicts = BTreeMap::new();
    let mut unmet = BTreeMap::new();
    for s in &sim.stations {
        let peer = match s.peer_key_x() {
            Some(k) => identities.iter().find(|(_, x)| x == k).map(|(n, _)| n.clone()),
            None => s.peer_mac().and_then(|m| {
                sim.stations.iter().find(|o| o.mac() == m && o.channel == s.channel).map(|o| o.name.clone())
            }),
        };
        let psk = s.psk();
        let ptk = s.fourway().and_then(|f| f.ptk().cloned());
        let blacklisted = s
            .blacklisted()
            .map(|(m, k)| {
                let who = identities.iter().find(|(_, x)| x == k).map_or("unknown", |(n, _)| n.as_str());
                format!("{m}/{who}")
            })
            .collect();
        let outcome = s.outcome();
        verdicts.insert(
            s.name.clone(),
            StationVerdict {
                outcome,
                peer,
                group: s.negotiated_group(),
                psk_fingerprint: psk.as_ref().map(|p| fingerprint(p.as_bytes())),
                ptk_fingerprint: ptk.as_ref().map(|p| fingerprint(&p.to_bytes())),
                verify_failures: s.verify_failures(),
                blacklisted,
            },
        );
        if let Some(want) = script.expect.get(&s.name) {
            if *want != outcome {
                unmet.insert(s.name.clone(), (*want, outcome));
            }
        }
        if let Some(p) = psk {
            sim.secrets.psk.insert(s.name.clone(), p);
        }
        if let Some(p) = ptk {
            sim.secrets.ptk.insert(s.name.clone(), p);
        }
    }
    let transcript = Transcript {
        scenario: script.name.clone(),
        seed,
        ticks: sim.tick,
        records: sim.records,
        verdicts,
        unmet_expectations: unmet,
    };
    Ok(Run { transcript, secrets: sim.secrets })
}

trait TapStream {
    fn tap_stream(self, stream: u64) -> Self;
}

impl TapStream for ChaCha20Rng {
    fn tap_stream(mut self, stream: u64) -> Self {
        self.set_stream(stream);
        self
    }
}
