use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use isogauss::channel::{decompose_modes, DEFAULT_TOL_UNIT};
use isogauss::models::{cut_spectrum_momentum, pip_ground_state, PipLattice};
use isogauss::momentum::{build_brickwall, bulk_spectrum, classify_bands, realspace_decay, steady_state_k};
use isogauss::sampling::{random_channel_with_preserved, random_dilated_channel};
use isogauss::topology::{chern_number, SpectralProjector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn channels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ch = random_channel_with_preserved(16, 4, 0.9, &mut rng);
    c.bench_function("decompose_modes n=16", |b| b.iter(|| decompose_modes(black_box(&ch), DEFAULT_TOL_UNIT).unwrap()));
}

fn momentum(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gate = random_dilated_channel(4, 4, &mut rng);
    c.bench_function("brickwall spectrum L=256", |b| {
        b.iter(|| {
            let mc = build_brickwall(&gate, 256).unwrap();
            let bands = classify_bands(&mc, DEFAULT_TOL_UNIT).unwrap();
            bulk_spectrum(&steady_state_k(&mc, &bands).unwrap(), None).unwrap()
        })
    });
    let mc = build_brickwall(&gate, 1024).unwrap();
    let ss = steady_state_k(&mc, &classify_bands(&mc, DEFAULT_TOL_UNIT).unwrap()).unwrap();
    c.bench_function("realspace decay L=1024", |b| b.iter(|| realspace_decay(black_box(&ss)).unwrap()));
}

fn models(c: &mut Criterion) {
    let lat = PipLattice::new(24, 24).unwrap();
    let gs = pip_ground_state(&lat).unwrap();
    c.bench_function("p+ip cut spectrum 24x24", |b| b.iter(|| cut_spectrum_momentum(&gs.momentum, 2, 12).unwrap()));
    let p = SpectralProjector::from_model(&lat.model().unwrap(), 24, 1e-3).unwrap();
    c.bench_function("chern number 24x24", |b| b.iter(|| chern_number(black_box(&p)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = channels, momentum, models
}
criterion_main!(benches);
