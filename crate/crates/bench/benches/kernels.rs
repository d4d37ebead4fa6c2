use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphalign_core::cnn::POSE_TAP;
use sphalign_core::mesh::synth::{random_shape, Shape};
use sphalign_core::sht::synthesize;
use sphalign_core::{
    correlate, estimate_relative_pose, forward_sht, random_rotation, ray_cast, rotate_coeffs,
    AlignOptions, Architecture, HarmonicCoeffs, SphericalGrid,
};

fn coeffs(b: usize, k: usize) -> HarmonicCoeffs {
    HarmonicCoeffs::random_real(&mut ChaCha8Rng::seed_from_u64(1), b, k, b, 1.0)
}

fn sht(c: &mut Criterion) {
    let mut g = c.benchmark_group("sht");
    for b in [16, 32, 64] {
        let x = coeffs(b, 1);
        let f = synthesize(&x).unwrap();
        g.bench_with_input(BenchmarkId::new("forward", b), &f, |bch, f| {
            bch.iter(|| forward_sht(black_box(f)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("inverse", b), &x, |bch, x| {
            bch.iter(|| synthesize(black_box(x)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("rotate", b), &x, |bch, x| {
            let r = random_rotation(2);
            bch.iter(|| rotate_coeffs(black_box(x), &r))
        });
    }
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlation");
    g.sample_size(10);
    for b in [16, 32] {
        let f1 = synthesize(&coeffs(b, 1)).unwrap();
        let f2 = synthesize(&rotate_coeffs(&coeffs(b, 1), &random_rotation(3))).unwrap();
        g.bench_function(BenchmarkId::new("correlate", b), |bch| {
            bch.iter(|| correlate(black_box(&f1), black_box(&f2)).unwrap())
        });
    }
    let f1 = synthesize(&coeffs(8, 8)).unwrap();
    let f2 = synthesize(&rotate_coeffs(&coeffs(8, 8), &random_rotation(4))).unwrap();
    g.bench_function("align_b8_x4", |bch| {
        bch.iter(|| estimate_relative_pose(&f1, &f2, &AlignOptions::default()).unwrap())
    });
    g.finish();
}

fn raycast(c: &mut Criterion) {
    let mut g = c.benchmark_group("ray_cast");
    let mesh = random_shape(Shape::Box, &mut ChaCha8Rng::seed_from_u64(5), 4);
    for b in [16, 32] {
        let grid = SphericalGrid::shared(b).unwrap();
        g.bench_function(BenchmarkId::new("box_5120", b), |bch| {
            bch.iter(|| ray_cast(black_box(&mesh), &grid).unwrap())
        });
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    let net = Architecture::Full.random(6).unwrap();
    let x = synthesize(&coeffs(32, 1)).unwrap();
    g.bench_function("full_forward", |bch| {
        bch.iter(|| net.forward(black_box(&x), None).unwrap())
    });
    g.bench_function("full_pose_tap", |bch| {
        bch.iter(|| net.forward(black_box(&x), Some(POSE_TAP)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, sht, correlation, raycast, network);
criterion_main!(benches);
