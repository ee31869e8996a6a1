//! The built-in attack suite: one row per threat, each run under several
//! seeds with mitigations switched on or off.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::registry_lookup;

use super::{eavesdropper_view, run_scenario, Outcome, Record, Run, ScenarioScript};

const SCENARIOS: &[(&str, &str)] = &[
    ("benign", include_str!("../../../../scenarios/benign.json")),
    ("strict", include_str!("../../../../scenarios/strict.json")),
    ("legacy-client", include_str!("../../../../scenarios/legacy-client.json")),
    ("legacy-mode", include_str!("../../../../scenarios/legacy-mode.json")),
    ("fallback", include_str!("../../../../scenarios/fallback.json")),
    ("replay", include_str!("../../../../scenarios/replay.json")),
    ("deletion", include_str!("../../../../scenarios/deletion.json")),
    ("injection", include_str!("../../../../scenarios/injection.json")),
    ("masquerade", include_str!("../../../../scenarios/masquerade.json")),
    ("disassoc", include_str!("../../../../scenarios/disassoc.json")),
    ("mitm", include_str!("../../../../scenarios/mitm.json")),
];

/// The scenario scripts shipped with the crate, by name.
pub fn builtin_scenarios() -> Vec<(&'static str, ScenarioScript)> {
    SCENARIOS
        .iter()
        .map(|(name, text)| (*name, ScenarioScript::from_json(text).expect("built-in scenarios are valid")))
        .collect()
}

fn builtin(name: &str) -> ScenarioScript {
    builtin_scenarios().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s).expect("known built-in scenario")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The attack has no effect.
    Secure,
    /// The attack works.
    Vulnerable,
    /// The attack works only without the mitigation, which is enabled.
    Solved,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Secure => "✓",
            Verdict::Vulnerable => "✗",
            Verdict::Solved => "s",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seeds: Vec<u64>,
    pub blacklist: bool,
    pub mgmt_signing: bool,
    pub pinning: bool,
    /// Mutation switch: every station accepts any signature.
    #[doc(hidden)]
    pub fault_accept_any_signature: bool,
}

impl SuiteOptions {
    /// Three consecutive seeds starting at `seed`, all mitigations on.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seeds: vec![seed, seed.wrapping_add(1), seed.wrapping_add(2)],
            blacklist: true,
            mgmt_signing: true,
            pinning: true,
            fault_accept_any_signature: false,
        }
    }
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub threat: String,
    pub scenario: String,
    pub expected: Verdict,
    /// One observed verdict per seed.
    pub observed: Vec<Verdict>,
    /// What happened under the first seed.
    pub detail: String,
}

impl SuiteRow {
    pub fn matches(&self) -> bool {
        !self.observed.is_empty() && self.observed.iter().all(|v| *v == self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(SuiteRow::matches)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.options.seeds.iter().map(u64::to_string).collect();
        let mut out = format!("attack suite, seeds {}\n", seeds.join(", "));
        let width = self.rows.iter().map(|r| r.threat.len()).max().unwrap_or(0).max(6);
        out.push_str(&format!("{:<width$}  expected  observed  match  detail\n", "threat"));
        for r in &self.rows {
            let observed: Vec<&str> = r.observed.iter().map(|v| v.symbol()).collect();
            out.push_str(&format!(
                "{:<width$}  {:<8}  {:<8}  {:<5}  {}\n",
                r.threat,
                r.expected.symbol(),
                observed.join(" "),
                if r.matches() { "yes" } else { "NO" },
                r.detail,
            ));
        }
        let matched = self.rows.iter().filter(|r| r.matches()).count();
        out.push_str(&format!("{matched}/{} rows match\n", self.rows.len()));
        out
    }
}

struct Check {
    verdict: Verdict,
    detail: String,
}

fn run(script: &ScenarioScript, seed: u64) -> Run {
    run_scenario(script, seed).expect("built-in scenarios are valid")
}

fn outcome(run: &Run, station: &str) -> Option<Outcome> {
    run.transcript.verdicts.get(station).map(|v| v.outcome)
}

fn both_established(run: &Run) -> bool {
    outcome(run, "ap") == Some(Outcome::Established) && outcome(run, "client") == Some(Outcome::Established)
}

fn same_keys(run: &Run) -> bool {
    let v = &run.transcript.verdicts;
    match (v.get("ap"), v.get("client")) {
        (Some(a), Some(c)) => a.psk_fingerprint == c.psk_fingerprint && a.ptk_fingerprint == c.ptk_fingerprint,
        _ => false,
    }
}

fn outcomes(run: &Run) -> String {
    let fmt = |o: Option<Outcome>| o.map_or("-".to_owned(), |o| format!("{o:?}").to_lowercase());
    format!("ap {}, client {}", fmt(outcome(run, "ap")), fmt(outcome(run, "client")))
}

fn secure_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Secure
    } else {
        Verdict::Vulnerable
    }
}

/// Verdict of an attack that the mitigation is supposed to stop.
fn mitigable(attack_worked: bool, mitigation_on: bool) -> Verdict {
    match (attack_worked, mitigation_on) {
        (true, _) => Verdict::Vulnerable,
        (false, true) => Verdict::Solved,
        (false, false) => Verdict::Secure,
    }
}

fn expected_for(mitigation_on: bool) -> Verdict {
    if mitigation_on {
        Verdict::Solved
    } else {
        Verdict::Vulnerable
    }
}

fn ephemeral(script: &ScenarioScript, seed: u64) -> Check {
    const SESSIONS: u64 = 5;
    let mut psks = Vec::new();
    let mut established = 0;
    for i in 0..SESSIONS {
        let r = run(script, seed ^ (i << 32));
        if both_established(&r) && same_keys(&r) {
            established += 1;
        }
        if let Some(p) = r.secrets.psk.get("client") {
            psks.push(p.as_bytes().to_vec());
        }
    }
    psks.sort();
    psks.dedup();
    Check {
        verdict: secure_if(established == SESSIONS && psks.len() as u64 == SESSIONS),
        detail: format!("{established}/{SESSIONS} sessions established, {} distinct PSKs", psks.len()),
    }
}

fn key_size(script: &ScenarioScript, seed: u64) -> Check {
    let r = run(script, seed);
    let bits = r
        .transcript
        .verdicts
        .get("client")
        .and_then(|v| v.group)
        .and_then(|g| registry_lookup(g).ok())
        .map(|g| g.key_size_octets() * 8);
    Check {
        verdict: secure_if(both_established(&r) && bits.is_some_and(|b| b >= 224)),
        detail: match bits {
            Some(b) => format!("negotiated a {b}-bit curve"),
            None => "no group negotiated".to_owned(),
        },
    }
}

fn eavesdropping(script: &ScenarioScript, seed: u64) -> Check {
    let r = run(script, seed);
    let view = eavesdropper_view(&r);
    Check {
        verdict: secure_if(both_established(&r) && view.psk_occurrences == 0 && !view.can_derive_psk),
        detail: format!(
            "{} frames captured, {} ECDH keys seen, PSK found {} times, derivable: {}",
            view.frames_captured, view.ecdh_keys_seen, view.psk_occurrences, view.can_derive_psk
        ),
    }
}

fn replaying(script: &ScenarioScript, seed: u64) -> Check {
    let r = run(script, seed);
    let mut baseline = script.clone();
    baseline.schedule.clear();
    let b = run(&baseline, seed);
    let injected = r.transcript.records.iter().filter(|x| matches!(x, Record::Inject { .. })).count();
    let first_inject = r.transcript.records.iter().position(|x| matches!(x, Record::Inject { .. }));
    let discarded = first_inject
        .map_or(0, |i| r.transcript.records[i..].iter().filter(|x| matches!(x, Record::Discard { .. })).count());
    let unchanged = r.transcript.verdicts == b.transcript.verdicts;
    Check {
        verdict: secure_if(injected > 0 && discarded >= injected && unchanged && both_established(&r)),
        detail: format!("{injected} frames replayed, {discarded} discarded, keys unchanged: {unchanged}"),
    }
}

fn deletion(script: &ScenarioScript, seed: u64) -> Check {
    let r = run(script, seed);
    let view = eavesdropper_view(&r);
    let drops = r.transcript.records.iter().filter(|x| matches!(x, Record::Drop { .. })).count();
    // Deletion may stall the handshake but must never split or leak keys.
    let consistent = !both_established(&r) || same_keys(&r);
    Check {
        verdict: secure_if(consistent && view.psk_occurrences == 0 && !view.can_derive_psk),
        detail: format!("{drops} frames dropped, {}", outcomes(&r)),
    }
}

fn injection(script: &ScenarioScript, seed: u64, on: bool) -> Check {
    let r = run(script, seed);
    let blocked = r.transcript.records.iter().filter(|x| matches!(x, Record::Blocked { .. })).count();
    let worked = outcome(&r, "client") != Some(Outcome::Established);
    Check { verdict: mitigable(worked, on), detail: format!("{}, {blocked} frames blocked", outcomes(&r)) }
}

fn masquerading(script: &ScenarioScript, seed: u64, on: bool) -> Check {
    let r = run(script, seed);
    let peer = r.transcript.verdicts.get("client").and_then(|v| v.peer.clone());
    let worked = peer.as_deref() != Some("ap") || outcome(&r, "client") != Some(Outcome::Established);
    Check {
        verdict: mitigable(worked, on),
        detail: format!("client trusts {}, {}", peer.as_deref().unwrap_or("nobody"), outcomes(&r)),
    }
}

fn disassociation(script: &ScenarioScript, seed: u64, on: bool) -> Check {
    let r = run(script, seed);
    let worked = outcome(&r, "client") != Some(Outcome::Established);
    Check { verdict: mitigable(worked, on), detail: outcomes(&r) }
}

fn hijacking(script: &ScenarioScript, seed: u64) -> Check {
    let r = run(script, seed);
    let view = eavesdropper_view(&r);
    let foreign_peer = r
        .transcript
        .verdicts
        .values()
        .any(|v| v.psk_fingerprint.is_some() && v.peer.as_deref().is_some_and(|p| p == "adversary"));
    let worked = view.can_derive_psk || foreign_peer;
    Check {
        verdict: mitigable(worked, true),
        detail: format!("{}, attacker can derive PSK: {}", outcomes(&r), view.can_derive_psk),
    }
}

/// Runs every row under every seed in `options`.
pub fn attack_suite(options: &SuiteOptions) -> SuiteReport {
    let prepare = |name: &str| {
        let mut s = builtin(name);
        s.fault_accept_any_signature = options.fault_accept_any_signature;
        s
    };

    let benign = prepare("benign");
    let replay = prepare("replay");
    let del = prepare("deletion");
    let mut inject = prepare("injection");
    if !options.blacklist {
        inject.mitigations.blacklist_threshold = None;
    }
    let mut masq = prepare("masquerade");
    if !options.pinning {
        for st in &mut masq.stations {
            st.pin_ap_key = None;
        }
    }
    let mut disassoc = prepare("disassoc");
    disassoc.mitigations.sign_management_frames = options.mgmt_signing;
    let mitm = prepare("mitm");

    type RowFn<'a> = Box<dyn Fn(u64) -> Check + Sync + 'a>;
    let rows: Vec<(&str, &str, Verdict, RowFn)> = vec![
        ("ephemeral PSK", "benign", Verdict::Secure, Box::new(|s| ephemeral(&benign, s))),
        ("key size", "benign", Verdict::Secure, Box::new(|s| key_size(&benign, s))),
        ("eavesdropping", "benign", Verdict::Secure, Box::new(|s| eavesdropping(&benign, s))),
        ("replaying", "replay", Verdict::Secure, Box::new(|s| replaying(&replay, s))),
        ("deletion", "deletion", Verdict::Secure, Box::new(|s| deletion(&del, s))),
        (
            "injection",
            "injection",
            expected_for(options.blacklist),
            Box::new(|s| injection(&inject, s, options.blacklist)),
        ),
        (
            "masquerading",
            "masquerade",
            expected_for(options.pinning),
            Box::new(|s| masquerading(&masq, s, options.pinning)),
        ),
        (
            "hijack: disassociation",
            "disassoc",
            expected_for(options.mgmt_signing),
            Box::new(|s| disassociation(&disassoc, s, options.mgmt_signing)),
        ),
        ("hijack: key substitution", "mitm", Verdict::Solved, Box::new(|s| hijacking(&mitm, s))),
    ];

    // Rows share nothing mutable, so they run on separate threads; the
    // report keeps the table order.
    let results: Vec<SuiteRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .iter()
            .map(|(threat, scenario, expected, f)| {
                scope.spawn(move || {
                    let checks: Vec<Check> = options.seeds.iter().map(|s| f(*s)).collect();
                    SuiteRow {
                        threat: (*threat).to_owned(),
                        scenario: (*scenario).to_owned(),
                        expected: *expected,
                        observed: checks.iter().map(|c| c.verdict).collect(),
                        detail: checks.first().map(|c| c.detail.clone()).unwrap_or_default(),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite row panicked")).collect()
    });

    SuiteReport { options: options.clone(), rows: results }
}
