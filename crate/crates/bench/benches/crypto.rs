use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use soap_core::codec::MacAddr;
use soap_core::crypto::{ecdh_agree, ecdh_generate, ecdsa_sign, ecdsa_verify, registered_groups, EcdsaKeyPair};
use soap_core::fourway::derive_ptk;

fn ecdh(c: &mut Criterion) {
    let mut group = c.benchmark_group("ecdh");
    for g in registered_groups() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        group.bench_function(BenchmarkId::new("generate", g.name()), |b| b.iter(|| ecdh_generate(g, &mut rng)));
        let own = ecdh_generate(g, &mut rng);
        let peer = ecdh_generate(g, &mut rng);
        group.bench_function(BenchmarkId::new("agree", g.name()), |b| {
            b.iter(|| ecdh_agree(black_box(&own), black_box(peer.public_point())))
        });
    }
    group.finish();
}

fn ecdsa(c: &mut Criterion) {
    let mut group = c.benchmark_group("ecdsa");
    for g in registered_groups() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = EcdsaKeyPair::generate(g, &mut rng);
        let msg = ecdh_generate(g, &mut rng).public_point().to_bytes();
        let sig = ecdsa_sign(&key, &msg);
        group.bench_function(BenchmarkId::new("sign", g.name()), |b| b.iter(|| ecdsa_sign(&key, black_box(&msg))));
        group.bench_function(BenchmarkId::new("verify", g.name()), |b| {
            b.iter(|| ecdsa_verify(key.public_key(), g, black_box(&msg), black_box(&sig)))
        });
    }
    group.finish();
}

fn ptk(c: &mut Criterion) {
    let g = registered_groups()[0];
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let psk = ecdh_agree(&ecdh_generate(g, &mut rng), ecdh_generate(g, &mut rng).public_point()).unwrap();
    let (aa, spa) = (MacAddr([2, 0, 0, 0, 0, 1]), MacAddr([2, 0, 0, 0, 0, 2]));
    c.bench_function("derive_ptk", |b| b.iter(|| derive_ptk(&psk, aa, spa, black_box(&[0x11; 32]), &[0x22; 32])));
}

criterion_group!(benches, ecdh, ecdsa, ptk);
criterion_main!(benches);
