//! WPA2-PSK 4-Way Handshake (HMAC-SHA-1 AKM, 384-bit PTK).
//!
//! The PMK is `PSK_SOAP` after a SOAP Handshake, or a pre-shared 32-octet
//! key in legacy mode. The AP is the authenticator (`aa`), the client the
//! supplicant (`spa`).

use hmac::{Hmac, Mac};
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::codec::{eapol_message_number, key_info, EapolKeyFrame, MacAddr};
use crate::crypto::SharedPsk;
use crate::soap::Role;

pub const NONCE_LEN: usize = 32;
pub const MAX_RETRANSMISSIONS: u32 = 3;
pub const RETRANSMIT_TIMEOUT: u64 = 100;

/// Key data of Message 2: the supplicant's RSN IE (CCMP pairwise and group,
/// PSK AKM).
pub const RSN_IE: [u8; 22] = [
    0x30, 0x14, 0x01, 0x00, 0x00, 0x0f, 0xac, 0x04, 0x01, 0x00, 0x00, 0x0f, 0xac, 0x04, 0x01, 0x00, 0x00, 0x0f, 0xac,
    0x02, 0x00, 0x00,
];
/// Length of the Message 3 key data: RSN IE plus a padding element standing
/// in for the wrapped group key.
pub const M3_KEY_DATA_LEN: usize = 64;

pub type Nonce = [u8; NONCE_LEN];

fn m3_key_data() -> Vec<u8> {
    let mut kd = RSN_IE.to_vec();
    let pad = M3_KEY_DATA_LEN - RSN_IE.len() - 2;
    kd.push(0xdd);
    kd.push(pad as u8);
    kd.resize(M3_KEY_DATA_LEN, 0);
    kd
}

/// The PTK split into its three 128-bit keys.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct PairwiseKeys {
    pub kck: [u8; 16],
    pub kek: [u8; 16],
    pub tk: [u8; 16],
}

impl PairwiseKeys {
    pub fn to_bytes(&self) -> [u8; 48] {
        let mut out = [0u8; 48];
        out[..16].copy_from_slice(&self.kck);
        out[16..32].copy_from_slice(&self.kek);
        out[32..].copy_from_slice(&self.tk);
        out
    }
}

impl std::fmt::Debug for PairwiseKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PairwiseKeys(..)")
    }
}

/// The 802.11 PRF: HMAC-SHA-1(K, A ‖ 0 ‖ B ‖ i) for i = 0, 1, ...,
/// concatenated and cut to `out.len()` octets.
pub fn prf(key: &[u8], label: &[u8], data: &[u8], out: &mut [u8]) {
    for (i, chunk) in out.chunks_mut(20).enumerate() {
        let mut mac = Hmac::<Sha1>::new_from_slice(key).expect("HMAC takes any key length");
        mac.update(label);
        mac.update(&[0]);
        mac.update(data);
        mac.update(&[i as u8]);
        let block = mac.finalize().into_bytes();
        chunk.copy_from_slice(&block[..chunk.len()]);
    }
}

pub fn derive_ptk(pmk: &SharedPsk, aa: MacAddr, spa: MacAddr, anonce: &Nonce, snonce: &Nonce) -> PairwiseKeys {
    let mut data = Vec::with_capacity(12 + 2 * NONCE_LEN);
    data.extend_from_slice(&aa.min(spa).0);
    data.extend_from_slice(&aa.max(spa).0);
    data.extend_from_slice(anonce.min(snonce));
    data.extend_from_slice(anonce.max(snonce));
    let mut ptk = [0u8; 48];
    prf(pmk.as_bytes(), b"Pairwise key expansion", &data, &mut ptk);
    let mut keys = PairwiseKeys { kck: [0; 16], kek: [0; 16], tk: [0; 16] };
    keys.kck.copy_from_slice(&ptk[..16]);
    keys.kek.copy_from_slice(&ptk[16..32]);
    keys.tk.copy_from_slice(&ptk[32..]);
    ptk.zeroize();
    keys
}

fn mic_hmac(kck: &[u8; 16], frame: &EapolKeyFrame) -> Hmac<Sha1> {
    let bytes = frame.encode_for_mic().expect("key data length fits the frame");
    let mut mac = Hmac::<Sha1>::new_from_slice(kck).expect("HMAC takes any key length");
    mac.update(&bytes);
    mac
}

/// HMAC-SHA-1 over the EAPOL frame with its MIC field zeroed, first 16 octets.
pub fn compute_mic(kck: &[u8; 16], frame: &EapolKeyFrame) -> [u8; 16] {
    let mut out = [0u8; 16];
    out.copy_from_slice(&mic_hmac(kck, frame).finalize().into_bytes()[..16]);
    out
}

/// Constant-time check of `frame.key_mic`.
pub fn verify_mic(kck: &[u8; 16], frame: &EapolKeyFrame) -> bool {
    mic_hmac(kck, frame).verify_truncated_left(&frame.key_mic).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourWayFailure {
    MicMismatch,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourWayPhase {
    Idle,
    SentM1,
    SentM2,
    SentM3,
    Established,
    Failed(FourWayFailure),
}

impl FourWayPhase {
    pub fn name(&self) -> &'static str {
        match self {
            FourWayPhase::Idle => "idle",
            FourWayPhase::SentM1 => "sent-m1",
            FourWayPhase::SentM2 => "sent-m2",
            FourWayPhase::SentM3 => "sent-m3",
            FourWayPhase::Established => "established",
            FourWayPhase::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FourWayError {
    #[error("EAPOL-Key message not expected in phase {0}")]
    UnexpectedMessage(&'static str),
    #[error("stale replay counter {got} (last {last})")]
    Replay { got: u64, last: u64 },
    #[error("MIC check failed")]
    MicMismatch,
    #[error("ANonce differs from Message 1")]
    NonceMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FourWayTimeout {
    Retransmit(EapolKeyFrame),
    Fail,
    Nothing,
}

/// One side of a 4-Way Handshake.
#[derive(Debug, Clone)]
pub struct FourWayState {
    role: Role,
    phase: FourWayPhase,
    pmk: SharedPsk,
    aa: MacAddr,
    spa: MacAddr,
    anonce: Option<Nonce>,
    snonce: Option<Nonce>,
    ptk: Option<PairwiseKeys>,
    /// AP: counter of the last frame sent. Client: last accepted counter.
    replay_counter: u64,
    retransmissions: u32,
    last_sent: Option<EapolKeyFrame>,
}

impl FourWayState {
    pub fn new(role: Role, pmk: SharedPsk, aa: MacAddr, spa: MacAddr) -> Self {
        Self {
            role,
            phase: FourWayPhase::Idle,
            pmk,
            aa,
            spa,
            anonce: None,
            snonce: None,
            ptk: None,
            replay_counter: 0,
            retransmissions: 0,
            last_sent: None,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> FourWayPhase {
        self.phase
    }

    pub fn ptk(&self) -> Option<&PairwiseKeys> {
        self.ptk.as_ref()
    }

    pub fn replay_counter(&self) -> u64 {
        self.replay_counter
    }

    pub fn anonce(&self) -> Option<&Nonce> {
        self.anonce.as_ref()
    }

    pub fn snonce(&self) -> Option<&Nonce> {
        self.snonce.as_ref()
    }

    fn fail(&mut self, why: FourWayFailure) {
        self.ptk = None;
        self.phase = FourWayPhase::Failed(why);
    }

    fn kck(&self) -> &[u8; 16] {
        &self.ptk.as_ref().expect("PTK derived").kck
    }

    fn sign(&self, mut frame: EapolKeyFrame) -> EapolKeyFrame {
        frame.key_mic = compute_mic(self.kck(), &frame);
        frame
    }

    fn sent(&mut self, frame: EapolKeyFrame, phase: FourWayPhase) -> EapolKeyFrame {
        self.retransmissions = 0;
        self.last_sent = Some(frame.clone());
        self.phase = phase;
        frame
    }

    // ---- AP ----

    /// Draws the ANonce and builds Message 1.
    pub fn ap_start<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<EapolKeyFrame, FourWayError> {
        if self.phase != FourWayPhase::Idle {
            return Err(FourWayError::UnexpectedMessage(self.phase.name()));
        }
        let mut anonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut anonce);
        self.anonce = Some(anonce);
        self.replay_counter += 1;
        let m1 = EapolKeyFrame {
            key_info: key_info::VERSION_HMAC_SHA1 | key_info::PAIRWISE | key_info::ACK,
            key_length: 16,
            replay_counter: self.replay_counter,
            key_nonce: anonce,
            ..Default::default()
        };
        Ok(self.sent(m1, FourWayPhase::SentM1))
    }

    fn build_m3(&self) -> EapolKeyFrame {
        use key_info::*;
        self.sign(EapolKeyFrame {
            key_info: VERSION_HMAC_SHA1 | PAIRWISE | INSTALL | ACK | MIC | SECURE | ENCRYPTED_KEY_DATA,
            key_length: 16,
            replay_counter: self.replay_counter,
            key_nonce: self.anonce.expect("drawn for Message 1"),
            key_data: m3_key_data(),
            ..Default::default()
        })
    }

    /// Verifies Message 2; a MIC failure here means the PMKs differ and the
    /// handshake fails.
    pub fn ap_on_m2(&mut self, m2: &EapolKeyFrame) -> Result<EapolKeyFrame, FourWayError> {
        if self.phase != FourWayPhase::SentM1 {
            return Err(FourWayError::UnexpectedMessage(self.phase.name()));
        }
        if m2.replay_counter != self.replay_counter {
            return Err(FourWayError::Replay { got: m2.replay_counter, last: self.replay_counter });
        }
        let anonce = self.anonce.expect("drawn for Message 1");
        let ptk = derive_ptk(&self.pmk, self.aa, self.spa, &anonce, &m2.key_nonce);
        if !verify_mic(&ptk.kck, m2) {
            self.fail(FourWayFailure::MicMismatch);
            return Err(FourWayError::MicMismatch);
        }
        self.snonce = Some(m2.key_nonce);
        self.ptk = Some(ptk);
        self.replay_counter += 1;
        let m3 = self.build_m3();
        Ok(self.sent(m3, FourWayPhase::SentM3))
    }

    pub fn ap_on_m4(&mut self, m4: &EapolKeyFrame) -> Result<(), FourWayError> {
        if self.phase != FourWayPhase::SentM3 {
            return Err(FourWayError::UnexpectedMessage(self.phase.name()));
        }
        if m4.replay_counter != self.replay_counter {
            return Err(FourWayError::Replay { got: m4.replay_counter, last: self.replay_counter });
        }
        if !verify_mic(self.kck(), m4) {
            return Err(FourWayError::MicMismatch);
        }
        self.last_sent = None;
        self.phase = FourWayPhase::Established;
        Ok(())
    }

    /// Retransmits Message 1 or 3 with a fresh replay counter, up to
    /// [`MAX_RETRANSMISSIONS`] times.
    pub fn on_timeout(&mut self) -> FourWayTimeout {
        if self.role != Role::Ap || !matches!(self.phase, FourWayPhase::SentM1 | FourWayPhase::SentM3) {
            return FourWayTimeout::Nothing;
        }
        if self.retransmissions >= MAX_RETRANSMISSIONS {
            self.fail(FourWayFailure::Timeout);
            return FourWayTimeout::Fail;
        }
        self.retransmissions += 1;
        self.replay_counter += 1;
        let frame = if self.phase == FourWayPhase::SentM3 {
            self.build_m3()
        } else {
            let mut m1 = self.last_sent.clone().expect("Message 1 sent");
            m1.replay_counter = self.replay_counter;
            m1
        };
        self.last_sent = Some(frame.clone());
        FourWayTimeout::Retransmit(frame)
    }

    // ---- client ----

    fn check_fresh(&self, counter: u64) -> Result<(), FourWayError> {
        if self.last_sent.is_some() && counter <= self.replay_counter {
            return Err(FourWayError::Replay { got: counter, last: self.replay_counter });
        }
        Ok(())
    }

    /// Answers Message 1 with Message 2. A retransmitted Message 1 with the
    /// same ANonce is answered again with the same SNonce.
    pub fn client_on_m1<R: RngCore + ?Sized>(
        &mut self,
        m1: &EapolKeyFrame,
        rng: &mut R,
    ) -> Result<EapolKeyFrame, FourWayError> {
        match self.phase {
            FourWayPhase::Idle => {}
            FourWayPhase::SentM2 if self.anonce == Some(m1.key_nonce) => {}
            other => return Err(FourWayError::UnexpectedMessage(other.name())),
        }
        self.check_fresh(m1.replay_counter)?;
        let snonce = match self.snonce {
            Some(s) => s,
            None => {
                let mut s = [0u8; NONCE_LEN];
                rng.fill_bytes(&mut s);
                s
            }
        };
        self.anonce = Some(m1.key_nonce);
        self.snonce = Some(snonce);
        self.ptk = Some(derive_ptk(&self.pmk, self.aa, self.spa, &m1.key_nonce, &snonce));
        self.replay_counter = m1.replay_counter;
        let m2 = self.sign(EapolKeyFrame {
            key_info: key_info::VERSION_HMAC_SHA1 | key_info::PAIRWISE | key_info::MIC,
            replay_counter: m1.replay_counter,
            key_nonce: snonce,
            key_data: RSN_IE.to_vec(),
            ..Default::default()
        });
        Ok(self.sent(m2, FourWayPhase::SentM2))
    }

    /// Verifies Message 3, installs the keys and confirms with Message 4.
    /// Message 3 with a counter already seen is discarded.
    pub fn client_on_m3(&mut self, m3: &EapolKeyFrame) -> Result<EapolKeyFrame, FourWayError> {
        if !matches!(self.phase, FourWayPhase::SentM2 | FourWayPhase::Established) {
            return Err(FourWayError::UnexpectedMessage(self.phase.name()));
        }
        self.check_fresh(m3.replay_counter)?;
        if self.anonce != Some(m3.key_nonce) {
            return Err(FourWayError::NonceMismatch);
        }
        if !verify_mic(self.kck(), m3) {
            return Err(FourWayError::MicMismatch);
        }
        self.replay_counter = m3.replay_counter;
        let m4 = self.sign(EapolKeyFrame {
            key_info: key_info::VERSION_HMAC_SHA1 | key_info::PAIRWISE | key_info::MIC | key_info::SECURE,
            replay_counter: m3.replay_counter,
            ..Default::default()
        });
        Ok(self.sent(m4, FourWayPhase::Established))
    }

    /// Dispatches an incoming EAPOL-Key frame by message number. Returns the
    /// reply, if any.
    pub fn handle<R: RngCore + ?Sized>(
        &mut self,
        frame: &EapolKeyFrame,
        rng: &mut R,
    ) -> Result<Option<EapolKeyFrame>, FourWayError> {
        match (self.role, eapol_message_number(frame)) {
            (Role::Client, Some(1)) => self.client_on_m1(frame, rng).map(Some),
            (Role::Client, Some(3)) => self.client_on_m3(frame).map(Some),
            (Role::Ap, Some(2)) => self.ap_on_m2(frame).map(Some),
            (Role::Ap, Some(4)) => self.ap_on_m4(frame).map(|()| None),
            _ => Err(FourWayError::UnexpectedMessage(self.phase.name())),
        }
    }
}
