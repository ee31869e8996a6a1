use soap_core::sim::{
    builtin_scenarios, eavesdropper_view, run_scenario, Outcome, Record, Run, ScenarioScript, ScriptError,
};

fn scenario(name: &str) -> ScenarioScript {
    builtin_scenarios().into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn outcome(run: &Run, station: &str) -> Outcome {
    run.transcript.verdicts[station].outcome
}

fn reached(run: &Run, station: &str, machine: &str, state: &str) -> bool {
    run.transcript.records.iter().any(|r| {
        matches!(r, Record::Transition { station: s, machine: m, to, .. } if s == station && m == machine && to == state)
    })
}

#[test]
fn every_builtin_scenario_meets_its_expectations() {
    for (name, script) in builtin_scenarios() {
        for seed in [0, 1, 2] {
            let run = run_scenario(&script, seed).unwrap();
            assert!(run.transcript.expectations_met(), "{name} seed {seed}: {:?}", run.transcript.unmet_expectations);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    for (name, script) in builtin_scenarios() {
        let a = run_scenario(&script, 42).unwrap().transcript.to_json();
        let b = run_scenario(&script, 42).unwrap().transcript.to_json();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_changes_the_session_not_the_identities() {
    let s = scenario("benign");
    let a = run_scenario(&s, 1).unwrap();
    let b = run_scenario(&s, 2).unwrap();
    assert_ne!(a.transcript.verdicts["ap"].psk_fingerprint, b.transcript.verdicts["ap"].psk_fingerprint);
    assert_eq!(a.transcript.verdicts["client"].peer.as_deref(), Some("ap"));
    assert_eq!(b.transcript.verdicts["ap"].peer.as_deref(), Some("client"));
}

#[test]
fn benign_stations_share_keys() {
    let run = run_scenario(&scenario("benign"), 3).unwrap();
    let v = &run.transcript.verdicts;
    assert_eq!(outcome(&run, "ap"), Outcome::Established);
    assert_eq!(v["ap"].psk_fingerprint, v["client"].psk_fingerprint);
    assert_eq!(v["ap"].ptk_fingerprint, v["client"].ptk_fingerprint);
    assert_eq!(run.secrets.ptk["ap"].to_bytes(), run.secrets.ptk["client"].to_bytes());
}

#[test]
fn eavesdropper_never_sees_the_psk() {
    for name in ["benign", "strict", "replay", "deletion", "mitm"] {
        let run = run_scenario(&scenario(name), 0).unwrap();
        let view = eavesdropper_view(&run);
        assert_eq!(view.psk_occurrences, 0, "{name}");
        assert!(!view.can_derive_psk, "{name}");
    }
    let view = eavesdropper_view(&run_scenario(&scenario("benign"), 0).unwrap());
    assert_eq!(view.ecdh_keys_seen, 2);
}

#[test]
fn leak_detector_finds_a_leaked_psk() {
    let mut s = scenario("benign");
    s.debug_leak_psk = true;
    let view = eavesdropper_view(&run_scenario(&s, 0).unwrap());
    assert!(view.psk_occurrences >= 1);
}

#[test]
fn leak_detector_reports_nothing_for_wpa_psk() {
    for name in ["fallback", "legacy-mode"] {
        let run = run_scenario(&scenario(name), 0).unwrap();
        assert_eq!(outcome(&run, "client"), Outcome::Established);
        let view = eavesdropper_view(&run);
        assert_eq!(view.psk_occurrences, 0, "{name}");
        assert_eq!(view.ecdh_keys_seen, 0, "{name}");
        assert!(run.transcript.frames().all(|(l, _)| !l.starts_with("soap")), "{name}");
    }
}

#[test]
fn soap_unaware_client_associates_silently() {
    let run = run_scenario(&scenario("legacy-client"), 0).unwrap();
    assert_eq!(outcome(&run, "client"), Outcome::Associated);
    assert!(run.transcript.frames().all(|(l, _)| !l.starts_with("soap") && !l.starts_with("eapol")));
    let complaints = run.transcript.records.iter().filter(
        |r| matches!(r, Record::Discard { station, .. } | Record::Blocked { station, .. } if station == "client"),
    );
    assert_eq!(complaints.count(), 0);
}

#[test]
fn replays_are_discarded_without_state_change() {
    let s = scenario("replay");
    let run = run_scenario(&s, 0).unwrap();
    let mut quiet = s.clone();
    quiet.schedule.clear();
    let baseline = run_scenario(&quiet, 0).unwrap();
    assert_eq!(run.transcript.verdicts, baseline.transcript.verdicts);

    let start = run.transcript.records.iter().position(|r| matches!(r, Record::Inject { .. })).unwrap();
    let after = &run.transcript.records[start..];
    let discards = after.iter().filter(|r| matches!(r, Record::Discard { .. })).count();
    assert_eq!(discards, 4);
}

#[test]
fn mitm_never_yields_mutual_psk_agreement() {
    for seed in 0..3 {
        let run = run_scenario(&scenario("mitm"), seed).unwrap();
        assert!(!(reached(&run, "ap", "soap", "psk-agreed") && reached(&run, "client", "soap", "psk-agreed")));
        assert!(!eavesdropper_view(&run).can_derive_psk);
        assert!(run.transcript.verdicts["client"].verify_failures > 0);
    }
}

#[test]
fn unsigned_disassociation_disconnects_the_client() {
    let mut s = scenario("disassoc");
    s.mitigations.sign_management_frames = false;
    let run = run_scenario(&s, 0).unwrap();
    assert_eq!(outcome(&run, "client"), Outcome::Disconnected);

    let run = run_scenario(&scenario("disassoc"), 0).unwrap();
    assert_eq!(outcome(&run, "client"), Outcome::Established);
    assert!(run.transcript.records.iter().any(|r| matches!(r, Record::Blocked { label, .. } if label == "disassoc")));
}

#[test]
fn blacklist_engages_at_the_threshold() {
    for threshold in [1, 2, 3, 5] {
        let mut s = scenario("injection");
        s.mitigations.blacklist_threshold = Some(threshold);
        let run = run_scenario(&s, 0).unwrap();
        let note = run
            .transcript
            .records
            .iter()
            .find_map(|r| match r {
                Record::Note { station, text, .. } if station == "client" && text.starts_with("blacklisting") => {
                    Some(text.clone())
                }
                _ => None,
            })
            .unwrap();
        assert!(note.ends_with(&format!("after {threshold} verification failures")), "{note}");
        assert_eq!(outcome(&run, "client"), Outcome::Established);
        assert_eq!(run.transcript.verdicts["client"].blacklisted.len(), 1);
    }
}

#[test]
fn injection_without_blacklist_is_a_dos() {
    let mut s = scenario("injection");
    s.mitigations.blacklist_threshold = None;
    let run = run_scenario(&s, 0).unwrap();
    assert_ne!(outcome(&run, "client"), Outcome::Established);
    assert!(run.transcript.verdicts["client"].verify_failures >= 3);
    assert!(!run.transcript.records.iter().any(|r| matches!(r, Record::Blocked { .. })));
}

#[test]
fn evil_twin_wins_without_pinning() {
    let mut s = scenario("masquerade");
    for st in &mut s.stations {
        st.pin_ap_key = None;
    }
    let run = run_scenario(&s, 0).unwrap();
    assert_eq!(run.transcript.verdicts["client"].peer.as_deref(), Some("rogue"));

    let run = run_scenario(&scenario("masquerade"), 0).unwrap();
    assert_eq!(run.transcript.verdicts["client"].peer.as_deref(), Some("ap"));
}

#[test]
fn invalid_scripts_report_a_location() {
    let err = ScenarioScript::from_json("{\"name\": \"x\",\n \"stations\": 3}").unwrap_err();
    assert!(matches!(err, ScriptError::Syntax { line: 2, .. }), "{err}");

    let mut s = scenario("benign");
    s.stations[0].groups = Default::default();
    s.stations.pop();
    let err = run_scenario(&s, 0).unwrap_err();
    assert!(matches!(err, ScriptError::Invalid { .. }), "{err}");
}

#[test]
fn transcripts_round_trip_through_json() {
    let t = run_scenario(&scenario("replay"), 0).unwrap().transcript;
    let back: soap_core::sim::Transcript = serde_json::from_str(&t.to_json()).unwrap();
    assert_eq!(back, t);
    assert!(t.to_text(true).contains("verdict client: Established"));
}
