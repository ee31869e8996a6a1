//! Acceptance run: one pass/fail line per criterion, non-zero exit on any
//! failure.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};
use soap_core::codec::{encode_elements, extract_elements, parse_elements, MacAddr, EID_RATES, EID_SOAP, EID_SSID};
use soap_core::crypto::{
    ecdh_agree, ecdh_generate, ecdsa_sign, ecdsa_verify, registered_groups, registry_lookup, EcGroup, EcdsaKeyPair,
    SharedPsk, GROUP_P224,
};
use soap_core::fourway::derive_ptk;
use soap_core::metrics::{bench_crypto, message_count_delta, size_report, MIN_ITERATIONS};
use soap_core::negotiation::{select_group, GroupSet, NegotiationOutcome};
use soap_core::sim::{
    attack_suite, builtin_scenarios, eavesdropper_view, run_scenario, Outcome, Record, ScenarioScript, SuiteOptions,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn scenario(name: &str) -> ScenarioScript {
    builtin_scenarios().into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn frame_sizes() -> Check {
    let start = Instant::now();
    let p224 = registry_lookup(GROUP_P224).unwrap();
    let one = size_report(p224, 1, true).map_err(|e| e.to_string())?;
    let two = size_report(p224, 2, true).map_err(|e| e.to_string())?;
    let m3 = one.eapol.iter().find(|r| r.frame == "eapol-m3").unwrap().with_soap;
    let took = start.elapsed();
    ensure(one.ie_octets == 33, format!("IE is {} octets", one.ie_octets))?;
    ensure(one.soap_message_octets == 148, format!("SOAP Message is {} octets", one.soap_message_octets))?;
    ensure(two.ie_octets == 34, format!("IE with two groups is {} octets", two.ie_octets))?;
    ensure(m3 == 195, format!("4-Way message 3 is {m3} octets"))?;
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("IE 33, SOAP Message 148, IE(m=2) 34, M3 195 in {took:.2?}"))
}

fn key_agreement() -> Check {
    let start = Instant::now();
    let results: Vec<Result<usize, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = registered_groups()
            .into_iter()
            .map(|g| {
                scope.spawn(move || {
                    let mut script = scenario("benign");
                    for st in &mut script.stations {
                        st.groups = GroupSet::new([g.id()]).unwrap();
                        st.ecdsa_group = g.id();
                    }
                    let mut ok = 0;
                    for seed in 0..100 {
                        let run = run_scenario(&script, seed).map_err(|e| e.to_string())?;
                        let v = &run.transcript.verdicts;
                        let established = v.values().all(|v| v.outcome == Outcome::Established);
                        let same = match (run.secrets.ptk.get("ap"), run.secrets.ptk.get("client")) {
                            (Some(a), Some(c)) => a.to_bytes() == c.to_bytes(),
                            _ => false,
                        };
                        if established && same && v["client"].group == Some(g.id()) {
                            ok += 1;
                        }
                    }
                    ensure(ok == 100, format!("group {}: {ok}/100", g.id()))?;
                    Ok(ok)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for r in &results {
        r.clone()?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(30), format!("took {took:?}"))?;
    Ok(format!("100/100 runs with identical PTKs for each of {} groups in {took:.1?}", results.len()))
}

fn ephemerality() -> Check {
    let script = scenario("benign");
    let mut psks = BTreeSet::new();
    let mut identities = BTreeSet::new();
    for seed in 0..100 {
        let run = run_scenario(&script, seed).map_err(|e| e.to_string())?;
        let psk = run.secrets.psk.get("client").ok_or(format!("seed {seed}: no PSK"))?;
        psks.insert(psk.as_bytes().to_vec());
        identities.insert(run.transcript.verdicts["client"].peer.clone());
    }
    ensure(identities.len() == 1, "identities changed between sessions")?;
    ensure(psks.len() == 100, format!("{} distinct PSKs", psks.len()))?;
    Ok("100 sessions, 100 distinct PSKs".into())
}

fn security_table() -> Check {
    let seeds = [0u64, 1, 2];
    let on = attack_suite(&SuiteOptions::with_seed(0));
    let off = attack_suite(&SuiteOptions {
        blacklist: false,
        mgmt_signing: false,
        pinning: false,
        ..SuiteOptions::with_seed(0)
    });
    for (label, report) in [("mitigations on", &on), ("mitigations off", &off)] {
        let bad: Vec<&str> = report.rows.iter().filter(|r| !r.matches()).map(|r| r.threat.as_str()).collect();
        ensure(bad.is_empty(), format!("{label}: mismatched rows {bad:?}"))?;
    }
    for seed in seeds {
        let run = run_scenario(&scenario("benign"), seed).unwrap();
        let view = eavesdropper_view(&run);
        ensure(view.psk_occurrences == 0 && !view.can_derive_psk, format!("seed {seed}: PSK exposed"))?;

        let run = run_scenario(&scenario("mitm"), seed).unwrap();
        let agreed = |st: &str| {
            run.transcript.records.iter().any(|r| {
                matches!(r, Record::Transition { station, machine, to, .. }
                    if station == st && machine == "soap" && to == "psk-agreed")
            })
        };
        ensure(!(agreed("ap") && agreed("client")), format!("seed {seed}: MITM reached mutual PskAgreed"))?;

        let mut threshold = scenario("injection");
        threshold.mitigations.blacklist_threshold = Some(2);
        let run = run_scenario(&threshold, seed).unwrap();
        let engaged = run
            .transcript
            .records
            .iter()
            .any(|r| matches!(r, Record::Note { text, .. } if text.ends_with("after 2 verification failures")));
        ensure(engaged, format!("seed {seed}: blacklist did not engage at threshold 2"))?;
    }
    Ok(format!("{} rows match with mitigations on and off under seeds {seeds:?}", on.rows.len()))
}

fn legacy() -> Check {
    let known: BTreeSet<u8> = [EID_SSID, EID_RATES, 48].into();
    let mut frames = 0;
    for g in registered_groups() {
        for m in 1..=4 {
            let report = size_report(g, m, false).map_err(|e| e.to_string())?;
            for f in report.frames.iter().filter(|f| f.name == "beacon" || f.name == "probe-response") {
                let body = &f.bytes[24 + 12..];
                let all = parse_elements(body).map_err(|e| e.to_string())?;
                let mut stripped = Vec::new();
                let without: Vec<_> = all.into_iter().filter(|e| e.id != EID_SOAP).collect();
                encode_elements(&without, &mut stripped).unwrap();
                let (seen, skipped) = extract_elements(body, &known).map_err(|e| e.to_string())?;
                let (plain, none) = extract_elements(&stripped, &known).map_err(|e| e.to_string())?;
                ensure(seen == plain && skipped == 1 && none == 0, format!("group {} m {m}: {}", g.id(), f.name))?;
                frames += 1;
            }
        }
    }
    let run = run_scenario(&scenario("legacy-mode"), 0).unwrap();
    ensure(
        run.transcript.verdicts.values().all(|v| v.outcome == Outcome::Established),
        "legacy-mode pair did not reach Established",
    )?;
    let run = run_scenario(&scenario("legacy-client"), 0).unwrap();
    ensure(run.transcript.expectations_met(), "SOAP-unaware client did not associate")?;
    ensure(run.transcript.frames().all(|(l, _)| !l.starts_with("soap")), "SOAP frames sent to an unaware client")?;
    Ok(format!("{frames} SOAP-bearing frames parse like their stripped copies; legacy pair Established"))
}

fn negotiation() -> Check {
    let registry = registered_groups();
    ensure(registry.len() == 4, "registry does not hold 4 groups")?;
    let subset = |mask: u32| -> GroupSet {
        GroupSet::new(registry.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, g)| g.id())).unwrap()
    };
    let mut pairs = 0;
    for a in 0..16 {
        for c in 0..16 {
            let (ap, client) = (subset(a), subset(c));
            let common: Vec<_> = registry.iter().filter(|g| ap.contains(g.id()) && client.contains(g.id())).collect();
            // Largest key wins; equal sizes go to the lower id.
            let mut best: Option<&EcGroup> = None;
            for &g in &common {
                let better = match best {
                    None => true,
                    Some(b) => {
                        g.key_size_octets() > b.key_size_octets()
                            || (g.key_size_octets() == b.key_size_octets() && g.id() < b.id())
                    }
                };
                if better {
                    best = Some(g);
                }
            }
            let expected = best.map_or(NegotiationOutcome::WpaPskFallback, |g| NegotiationOutcome::Soap(g.id()));
            let got = select_group(&ap, &client);
            ensure(got == expected, format!("ap {:?} client {:?}: got {got:?}", ap.ids(), client.ids()))?;
            ensure(select_group(&client, &ap) == got, "selection is not symmetric")?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} ordered pairs agree with the brute-force oracle"))
}

fn crypto() -> Check {
    let mut cases = 0;
    for c in support::curves() {
        let group = registry_lookup(c.id).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7000 + c.id as u64);
        for _ in 0..10 {
            let a = ecdh_generate(group, &mut rng);
            let b = ecdh_generate(group, &mut rng);
            let da = BigUint::from_bytes_be(a.private_scalar().as_bytes());
            let qb = Some((BigUint::from_bytes_be(b.public_point().x()), BigUint::from_bytes_be(b.public_point().y())));
            let (x, _) = c.mul(&da, &qb).ok_or("oracle hit infinity")?;
            let expected = SharedPsk::from_bytes(Sha256::digest(c.encode(&x)).into());
            ensure(ecdh_agree(&a, b.public_point()).ok() == Some(expected), format!("group {} ECDH differs", c.id))?;
            cases += 1;
        }
    }

    let mut rejected = 0;
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let groups = registered_groups();
    for i in 0..1000 {
        let g = groups[i % groups.len()];
        let key = EcdsaKeyPair::generate(g, &mut rng);
        let mut msg = vec![0u8; 64];
        rng.fill_bytes(&mut msg);
        let mut sig = ecdsa_sign(&key, &msg);
        ensure(ecdsa_verify(key.public_key(), g, &msg, &sig).is_ok(), "valid signature rejected")?;
        let target = rng.next_u32() as usize;
        if i % 2 == 0 {
            let bit = target % (sig.len() * 8);
            sig[bit / 8] ^= 1 << (bit % 8);
        } else {
            let bit = target % (msg.len() * 8);
            msg[bit / 8] ^= 1 << (bit % 8);
        }
        if ecdsa_verify(key.public_key(), g, &msg, &sig).is_err() {
            rejected += 1;
        }
    }
    ensure(rejected == 1000, format!("{rejected}/1000 perturbations rejected"))?;

    let pmk = SharedPsk::from_bytes(core::array::from_fn(|i| i as u8));
    let ptk = derive_ptk(
        &pmk,
        MacAddr([0x02, 0, 0, 0, 0, 0x01]),
        MacAddr([0x0a, 0, 0, 0, 0, 0x02]),
        &[0x11; 32],
        &core::array::from_fn(|i| 0x40 + i as u8),
    );
    ensure(
        hex::encode(ptk.to_bytes())
            == "2353cbd239178dc97e6e0b12a24862817cf4967ae489e02bd01640c2b5c42a65c91216dcb29f390b6f993cc69d9a1f26",
        "PTK vector differs",
    )?;
    Ok(format!("{cases} ECDH cases match, 1000/1000 perturbations rejected, PTK vector matches"))
}

fn overhead() -> Check {
    let delta = message_count_delta();
    ensure(delta == 2, format!("SOAP adds {delta} frames"))?;
    let report = bench_crypto(registry_lookup(GROUP_P224).unwrap(), MIN_ITERATIONS).map_err(|e| e.to_string())?;
    let names: Vec<&str> = report.operations.iter().map(|r| r.operation.as_str()).collect();
    ensure(
        names == ["ecdh_generate", "ecdh_agree", "ecdsa_sign", "ecdsa_verify", "derive_ptk"],
        format!("operations {names:?}"),
    )?;
    ensure(report.operations.iter().all(|r| r.samples >= MIN_ITERATIONS), "a row has too few samples")?;
    ensure(report.extra_frames == 2, "report carries the wrong frame delta")?;
    Ok(format!("2 extra frames; 5 operations timed with {MIN_ITERATIONS} samples each"))
}

fn determinism() -> Check {
    let exe = env!("CARGO_BIN_EXE_soap-sim");
    let dir = std::env::temp_dir().join(format!("soap-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let benign = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/replay.json");
    let mut outputs: BTreeMap<&str, Vec<Vec<u8>>> = BTreeMap::new();
    for round in 0..2 {
        for (name, args) in [
            ("run", vec!["run", "--seed", "5", "--format", "json", benign]),
            ("attack-suite", vec!["attack-suite", "--seed", "5"]),
        ] {
            let path = dir.join(format!("{name}-{round}"));
            let status = Command::new(exe)
                .args(&args)
                .arg("--output")
                .arg(&path)
                .env_remove("SOAP_SIM_SEED")
                .status()
                .map_err(|e| e.to_string())?;
            ensure(status.success(), format!("{name} exited with {status}"))?;
            outputs.entry(name).or_default().push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    for (name, outs) in &outputs {
        ensure(outs[0] == outs[1], format!("{name} output differs between invocations"))?;
    }
    Ok("run and attack-suite outputs byte-identical across two invocations".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("frame-size constants", frame_sizes),
        ("end-to-end key agreement", key_agreement),
        ("ephemerality", ephemerality),
        ("security-table conformance", security_table),
        ("legacy coexistence", legacy),
        ("negotiation algebra", negotiation),
        ("crypto correctness", crypto),
        ("message-count overhead and timing report", overhead),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
