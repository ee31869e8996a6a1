//! Frame-size accounting, handshake message counts and crypto timings.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    frame_wire_size, CodecError, EapolPdu, Element, Frame, MacAddr, ManagementFrame, MgmtSubtype, SoapIe, EID_RATES,
    EID_SOAP_NONCE, EID_SSID, STATUS_SUCCESS,
};
use crate::crypto::{ecdh_agree, ecdh_generate, ecdsa_sign, ecdsa_verify, registered_groups, EcGroup};
use crate::fourway::{derive_ptk, FourWayState, RSN_IE};
use crate::negotiation::{build_ap_advertisement, GroupSet};
use crate::sim::{builtin_scenarios, run_scenario, Record};
use crate::soap::{Role, SoapConfig, SoapError, SoapSession, StationIdentity};

/// Fewest samples a timing row may be based on.
pub const MIN_ITERATIONS: usize = 100;

const EID_RSN: u8 = 48;
const SSID: &[u8] = b"soap-net";
const RATES: [u8; 8] = [0x82, 0x84, 0x8b, 0x96, 0x0c, 0x12, 0x18, 0x24];
const AP_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 0x01]);
const CLIENT_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 0x02]);

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("at least {MIN_ITERATIONS} iterations are required, got {0}")]
    TooFewIterations(usize),
    #[error("{0} groups do not fit a SOAP IE with a {1}-octet key")]
    TooManyGroups(usize, usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("reference handshake failed: {0}")]
    Handshake(String),
}

impl From<SoapError> for MetricsError {
    fn from(e: SoapError) -> Self {
        MetricsError::Handshake(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub frame: String,
    pub baseline: usize,
    pub with_soap: usize,
    /// `(with_soap - baseline) / with_soap`.
    pub overhead: f64,
}

impl SizeRow {
    fn new(frame: &str, baseline: usize, with_soap: usize) -> Self {
        let overhead = if with_soap == 0 { 0.0 } else { (with_soap - baseline) as f64 / with_soap as f64 };
        Self { frame: frame.to_owned(), baseline, with_soap, overhead }
    }
}

/// A frame SOAP adds outright.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddedFrame {
    pub frame: String,
    pub octets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenFrame {
    pub name: String,
    #[serde(with = "hex::serde")]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub group: u8,
    pub curve: String,
    /// Octets per coordinate, `s`.
    pub key_size: usize,
    /// Groups listed in the IE, `m`.
    pub groups_listed: usize,
    pub strict: bool,
    pub ie_octets: usize,
    /// Share of the IE taken by the ECDSA key.
    pub ie_key_fraction: f64,
    pub soap_message_octets: usize,
    /// Management frames with and without the SOAP additions.
    pub management: Vec<SizeRow>,
    /// SOAP Messages 1 and 2 as transmitted.
    pub soap_messages: Vec<AddedFrame>,
    /// 4-Way Handshake messages 1 to 4, unchanged by SOAP.
    pub eapol: Vec<SizeRow>,
    /// Encoded frames of a reference exchange, seed 0.
    pub frames: Vec<GoldenFrame>,
}

impl SizeReport {
    pub fn rows(&self) -> impl Iterator<Item = &SizeRow> {
        self.management.iter().chain(&self.eapol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self, hex: bool) -> String {
        let mut out = format!(
            "group {} ({}), s = {}, m = {}, {}\n",
            self.group,
            self.curve,
            self.key_size,
            self.groups_listed,
            if self.strict { "strict" } else { "nonce extension" }
        );
        out.push_str(&format!(
            "SOAP IE {} octets (key {:.1}%), SOAP Message {} octets\n\n",
            self.ie_octets,
            self.ie_key_fraction * 100.0,
            self.soap_message_octets
        ));
        out.push_str(&format!("{:<20} {:>8} {:>9} {:>8}\n", "frame", "baseline", "with SOAP", "overhead"));
        for r in self.rows() {
            out.push_str(&format!(
                "{:<20} {:>8} {:>9} {:>7.1}%\n",
                r.frame,
                r.baseline,
                r.with_soap,
                r.overhead * 100.0
            ));
        }
        for f in &self.soap_messages {
            out.push_str(&format!("{:<20} {:>8} {:>9}    added\n", f.frame, "-", f.octets));
        }
        if hex {
            for f in &self.frames {
                out.push_str(&format!("\n{} ({} octets)\n", f.name, f.bytes.len()));
                out.push_str(&crate::codec::hex_dump(&f.bytes));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.rows() {
            w.serialize(r).expect("rows always serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
    }
}

/// The IE's group list: `group` first, then other registered groups, then
/// unassigned ids, `m` entries in total.
fn group_list(group: EcGroup, m: usize) -> Vec<u8> {
    let others = registered_groups().into_iter().map(|g| g.id()).filter(|id| *id != group.id());
    let filler = (0xe0u8..=0xff).rev();
    std::iter::once(group.id()).chain(others).chain(filler).take(m).collect()
}

fn mgmt(subtype: MgmtSubtype, dest: MacAddr, source: MacAddr, elements: Vec<Element>) -> Frame {
    Frame::Management(ManagementFrame::new(subtype, dest, source, AP_MAC, elements))
}

fn base_elements(soap_ie: Option<&SoapIe>) -> Result<Vec<Element>, CodecError> {
    let mut e = vec![Element::new(EID_SSID, SSID.to_vec()), Element::new(EID_RATES, RATES.to_vec())];
    if let Some(ie) = soap_ie {
        e.push(ie.to_element()?);
    }
    Ok(e)
}

fn ap_elements(soap_ie: Option<&SoapIe>) -> Result<Vec<Element>, CodecError> {
    let mut e = base_elements(soap_ie)?;
    e.push(Element::new(EID_RSN, RSN_IE[2..].to_vec()));
    Ok(e)
}

fn sized(name: &str, frame: &Frame, golden: &mut Vec<GoldenFrame>) -> Result<usize, CodecError> {
    let bytes = frame.to_wire()?;
    debug_assert_eq!(bytes.len(), frame_wire_size(frame));
    golden.push(GoldenFrame { name: name.to_owned(), bytes });
    Ok(frame_wire_size(frame))
}

/// Frame sizes for one group with `m` groups advertised, measured on frames
/// from a reference exchange run at seed 0.
pub fn size_report(group: EcGroup, m: usize, strict: bool) -> Result<SizeReport, MetricsError> {
    let s = group.key_size_octets();
    if m == 0 || 2 + m + s > 255 {
        return Err(MetricsError::TooManyGroups(m, s));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let ap = StationIdentity::generate(AP_MAC, Role::Ap, group, &mut rng);
    let client = StationIdentity::generate(CLIENT_MAC, Role::Client, group, &mut rng);
    let listed = group_list(group, m);
    let ap_groups = GroupSet::from_advertised(&listed);
    let client_groups = GroupSet::from_advertised(&[group.id()]);

    let config = SoapConfig { strict, ..Default::default() };
    let mut ap_s = SoapSession::new(Role::Ap, config);
    let mut cl_s = SoapSession::new(Role::Client, config);
    // Unassigned ids would be dropped by a GroupSet, so the IE is built
    // from the raw list.
    let mut ascending = listed.clone();
    ascending.sort_unstable();
    let adv = SoapIe::new(ascending, ap.ecdsa.public_key_x().to_vec());
    adv.encode()?;
    let resp = cl_s
        .client_on_advertisement(AP_MAC, &adv, &client_groups, &client)?
        .ok_or_else(|| MetricsError::Handshake("no common group".into()))?;
    ap_s.ap_on_association_request(CLIENT_MAC, &resp, &mut rng)?;
    cl_s.client_on_association(ap_s.session_nonce())?;
    let m1 = ap_s.ap_send_message1(&ap, &ap_groups, &mut rng)?;
    let m2 = cl_s.client_on_message1(&m1, &client, &mut rng)?;
    ap_s.ap_on_message2(&m2, &ap)?;
    let psk = ap_s.psk().cloned().ok_or_else(|| MetricsError::Handshake("AP holds no PSK".into()))?;

    let mut golden = Vec::new();
    let mut management = Vec::new();
    let mut row = |name: &str, plain: Frame, soap: Frame, golden: &mut Vec<GoldenFrame>| -> Result<(), CodecError> {
        let base = frame_wire_size(&plain);
        let with = sized(name, &soap, golden)?;
        management.push(SizeRow::new(name, base, with));
        Ok(())
    };
    let bcast = MacAddr::BROADCAST;
    row(
        "beacon",
        mgmt(MgmtSubtype::Beacon, bcast, AP_MAC, ap_elements(None)?),
        mgmt(MgmtSubtype::Beacon, bcast, AP_MAC, ap_elements(Some(&adv))?),
        &mut golden,
    )?;
    row(
        "probe-response",
        mgmt(MgmtSubtype::ProbeResponse, CLIENT_MAC, AP_MAC, ap_elements(None)?),
        mgmt(MgmtSubtype::ProbeResponse, CLIENT_MAC, AP_MAC, ap_elements(Some(&adv))?),
        &mut golden,
    )?;
    row(
        "assoc-request",
        mgmt(MgmtSubtype::AssociationRequest, AP_MAC, CLIENT_MAC, base_elements(None)?),
        mgmt(MgmtSubtype::AssociationRequest, AP_MAC, CLIENT_MAC, base_elements(Some(&resp))?),
        &mut golden,
    )?;
    let nonce_elements =
        ap_s.session_nonce().map(|n| vec![Element::new(EID_SOAP_NONCE, n.to_vec())]).unwrap_or_default();
    row(
        "assoc-response",
        Frame::Management(ManagementFrame::association_response(CLIENT_MAC, AP_MAC, STATUS_SUCCESS, vec![])),
        Frame::Management(ManagementFrame::association_response(CLIENT_MAC, AP_MAC, STATUS_SUCCESS, nonce_elements)),
        &mut golden,
    )?;
    golden.insert(0, GoldenFrame { name: "soap-ie".into(), bytes: adv.encode()? });

    let eapol = |dest: MacAddr, source: MacAddr, pdu: EapolPdu| Frame::Eapol { dest, source, bssid: AP_MAC, pdu };
    let mut soap_messages = Vec::new();
    for (name, dest, source, msg) in [("soap-m1", CLIENT_MAC, AP_MAC, m1), ("soap-m2", AP_MAC, CLIENT_MAC, m2)] {
        let size = sized(name, &eapol(dest, source, EapolPdu::Soap(msg)), &mut golden)?;
        soap_messages.push(AddedFrame { frame: name.to_owned(), octets: size });
    }

    let mut ap_fw = FourWayState::new(Role::Ap, psk.clone(), AP_MAC, CLIENT_MAC);
    let mut cl_fw = FourWayState::new(Role::Client, psk, AP_MAC, CLIENT_MAC);
    let fail = |e: crate::fourway::FourWayError| MetricsError::Handshake(e.to_string());
    let k1 = ap_fw.ap_start(&mut rng).map_err(fail)?;
    let k2 = cl_fw.handle(&k1, &mut rng).map_err(fail)?.expect("M1 is answered");
    let k3 = ap_fw.handle(&k2, &mut rng).map_err(fail)?.expect("M2 is answered");
    let k4 = cl_fw.handle(&k3, &mut rng).map_err(fail)?.expect("M3 is answered");
    ap_fw.handle(&k4, &mut rng).map_err(fail)?;
    let mut eapol_rows = Vec::new();
    for (i, k) in [k1, k2, k3, k4].into_iter().enumerate() {
        let (dest, source) = if i % 2 == 0 { (CLIENT_MAC, AP_MAC) } else { (AP_MAC, CLIENT_MAC) };
        let name = format!("eapol-m{}", i + 1);
        let size = sized(&name, &eapol(dest, source, EapolPdu::Key(k)), &mut golden)?;
        eapol_rows.push(SizeRow::new(&name, size, size));
    }

    let ie_octets = adv.wire_len();
    Ok(SizeReport {
        group: group.id(),
        curve: group.name().to_owned(),
        key_size: s,
        groups_listed: m,
        strict,
        ie_octets,
        ie_key_fraction: s as f64 / ie_octets as f64,
        soap_message_octets: soap_messages[0].octets,
        management,
        soap_messages,
        eapol: eapol_rows,
        frames: golden,
    })
}

/// Frames a SOAP association sends before the 4-Way Handshake completes,
/// minus those of a WPA-PSK association, both counted in simulated runs.
pub fn message_count_delta() -> usize {
    let scenarios = builtin_scenarios();
    let count = |name: &str| {
        let script = &scenarios.iter().find(|(n, _)| *n == name).expect("built-in scenario").1;
        let run = run_scenario(script, 0).expect("built-in scenarios are valid");
        let mut n = 0;
        for r in &run.transcript.records {
            if let Record::Send { label, .. } = r {
                n += 1;
                if label == "eapol-m4" {
                    break;
                }
            }
        }
        n
    };
    count("benign") - count("legacy-mode")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub operation: String,
    pub mean_us: f64,
    pub std_dev_us: f64,
    pub samples: usize,
}

impl TimingRow {
    fn from_samples(operation: &str, samples: &[Duration]) -> Self {
        let us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        let n = us.len() as f64;
        let mean = us.iter().sum::<f64>() / n;
        let var = if us.len() > 1 { us.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { operation: operation.to_owned(), mean_us: mean, std_dev_us: var.sqrt(), samples: us.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl MachineInfo {
    fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_owned(),
            arch: std::env::consts::ARCH.to_owned(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub group: u8,
    pub curve: String,
    pub machine: MachineInfo,
    /// ecdh_generate, ecdh_agree, ecdsa_sign, ecdsa_verify, derive_ptk.
    pub operations: Vec<TimingRow>,
    /// generate + agree + sign + 2 verify, from the rows above.
    pub soap_total_per_side_us: f64,
    /// A complete in-memory SOAP Handshake, both sides, timed end to end.
    pub handshake: TimingRow,
    /// Frames SOAP adds ahead of the 4-Way Handshake.
    pub extra_frames: usize,
}

impl BenchReport {
    pub fn operation(&self, name: &str) -> Option<&TimingRow> {
        self.operations.iter().find(|r| r.operation == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "group {} ({}) on {}/{}, {} threads\n",
            self.group, self.curve, self.machine.os, self.machine.arch, self.machine.threads
        );
        out.push_str(&format!("{:<24} {:>12} {:>12} {:>8}\n", "operation", "mean (us)", "std dev", "samples"));
        for r in self.operations.iter().chain(std::iter::once(&self.handshake)) {
            out.push_str(&format!("{:<24} {:>12.2} {:>12.2} {:>8}\n", r.operation, r.mean_us, r.std_dev_us, r.samples));
        }
        out.push_str(&format!("{:<24} {:>12.2}\n", "soap total per side", self.soap_total_per_side_us));
        out.push_str(&format!("extra frames before the 4-Way Handshake: {}\n", self.extra_frames));
        out
    }
}

fn time<T>(iterations: usize, mut f: impl FnMut(usize) -> T) -> Vec<Duration> {
    (0..iterations)
        .map(|i| {
            let start = Instant::now();
            std::hint::black_box(f(i));
            start.elapsed()
        })
        .collect()
}

/// Wall-clock timings of the operations SOAP adds, `iterations` samples each.
pub fn bench_crypto(group: EcGroup, iterations: usize) -> Result<BenchReport, MetricsError> {
    if iterations < MIN_ITERATIONS {
        return Err(MetricsError::TooFewIterations(iterations));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let a: Vec<_> = (0..iterations).map(|_| ecdh_generate(group, &mut rng)).collect();
    let b: Vec<_> = (0..iterations).map(|_| ecdh_generate(group, &mut rng)).collect();
    let identity = StationIdentity::generate(AP_MAC, Role::Ap, group, &mut rng);
    let message = a[0].public_point().to_bytes();
    let signature = ecdsa_sign(&identity.ecdsa, &message);
    let psk = ecdh_agree(&a[0], b[0].public_point()).expect("valid points");

    let generate = time(iterations, |_| ecdh_generate(group, &mut rng));
    let agree = time(iterations, |i| ecdh_agree(&a[i], b[i].public_point()));
    let sign = time(iterations, |i| ecdsa_sign(&identity.ecdsa, a[i].public_point().x()));
    let verify = time(iterations, |_| ecdsa_verify(identity.ecdsa.public_key(), group, &message, &signature));
    let ptk = time(iterations, |i| derive_ptk(&psk, AP_MAC, CLIENT_MAC, &[i as u8; 32], &[0x5a; 32]));
    let operations = vec![
        TimingRow::from_samples("ecdh_generate", &generate),
        TimingRow::from_samples("ecdh_agree", &agree),
        TimingRow::from_samples("ecdsa_sign", &sign),
        TimingRow::from_samples("ecdsa_verify", &verify),
        TimingRow::from_samples("derive_ptk", &ptk),
    ];
    let mean = |i: usize| operations[i].mean_us;
    let soap_total_per_side_us = mean(0) + mean(1) + mean(2) + 2.0 * mean(3);

    let client = StationIdentity::generate(CLIENT_MAC, Role::Client, group, &mut rng);
    let groups = GroupSet::from_advertised(&[group.id()]);
    let adv = build_ap_advertisement(&identity, &groups)?;
    let mut failure = None;
    let handshake = time(iterations, |_| {
        let mut run = || -> Result<(), SoapError> {
            let mut ap_s = SoapSession::new(Role::Ap, SoapConfig::default());
            let mut cl_s = SoapSession::new(Role::Client, SoapConfig::default());
            let resp = cl_s.client_on_advertisement(AP_MAC, &adv, &groups, &client)?.expect("common group");
            ap_s.ap_on_association_request(CLIENT_MAC, &resp, &mut rng)?;
            cl_s.client_on_association(ap_s.session_nonce())?;
            let m1 = ap_s.ap_send_message1(&identity, &groups, &mut rng)?;
            let m2 = cl_s.client_on_message1(&m1, &client, &mut rng)?;
            ap_s.ap_on_message2(&m2, &identity)
        };
        if let Err(e) = run() {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }

    Ok(BenchReport {
        group: group.id(),
        curve: group.name().to_owned(),
        machine: MachineInfo::current(),
        operations,
        soap_total_per_side_us,
        handshake: TimingRow::from_samples("soap handshake (both)", &handshake),
        extra_frames: message_count_delta(),
    })
}
