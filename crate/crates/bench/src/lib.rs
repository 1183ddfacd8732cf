//! Benchmarks for the hot kernels: transforms, the right-hand side, one
//! integrator step, cone integrals and the bilinear probe.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use monopole_core::cone::{i_value, j_value, ConeProbe, QuadratureOptions};
use monopole_core::norms::{key_bilinear_probe, NormParams, ProbeSweep, SparseSpectrum};
use monopole_core::spectral::random_lie_field;
use monopole_core::{
    rng_from_seed, DiagonalState, DiagonalSystem, GridSpec, MatrixField, MonopoleConfig, Sign,
    Spectral,
};

pub const GRID_SIZES: [usize; 3] = [16, 32, 64];

/// A random su(2) field on an `n x n` grid of period `2 pi`.
pub fn field(n: usize) -> (Spectral, MatrixField) {
    let sp = Spectral::new(GridSpec::new(n, 2.0 * std::f64::consts::PI, 1e-3).unwrap());
    let f = random_lie_field(&sp, 2, n / 8, 1.0, &mut rng_from_seed(1));
    (sp, f)
}

/// A nonlinear system with random band-limited initial data.
pub fn system(n: usize) -> (DiagonalSystem, DiagonalState) {
    let sys = DiagonalSystem::new(GridSpec::new(n, 2.0 * std::f64::consts::PI, 1e-3).unwrap());
    let cfg = MonopoleConfig::random(sys.spectral(), 2, n / 8, 0.2, &mut rng_from_seed(2));
    let state = sys.state_from_config(&cfg, 0.0).unwrap();
    (sys, state)
}

/// A plus-cone probe and a minus-branch probe at moderate `tau / |xi|`.
pub fn probes() -> (ConeProbe, ConeProbe) {
    let xi = [0.8, 0.6];
    (
        ConeProbe::new(2.0, xi, 1.5).unwrap(),
        ConeProbe::new(0.5, xi, 1.5).unwrap(),
    )
}

/// Two sparse spectra drawn as in the default probe sweep.
pub fn spectra(sign: Sign) -> (SparseSpectrum, SparseSpectrum, ProbeSweep) {
    let s = ProbeSweep::default();
    let mut rng = rng_from_seed(3);
    let phi = SparseSpectrum::random(&mut rng, &s.lattice, s.modes, s.band, s.spread, Sign::Plus)
        .unwrap();
    let psi =
        SparseSpectrum::random(&mut rng, &s.lattice, s.modes, s.band, s.spread, sign).unwrap();
    (phi, psi, s)
}

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft");
    for n in GRID_SIZES {
        let (sp, f) = field(n);
        let hat = sp.forward(&f).unwrap();
        g.bench_with_input(BenchmarkId::new("forward", n), &f, |b, f| {
            b.iter(|| sp.forward(black_box(f)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("inverse", n), &hat, |b, h| {
            b.iter(|| sp.inverse(black_box(h)).unwrap())
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solver");
    for n in GRID_SIZES {
        let (sys, state) = system(n);
        g.bench_with_input(BenchmarkId::new("rhs", n), &state, |b, s| {
            b.iter(|| sys.time_derivatives(black_box(s)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("step", n), &state, |b, s| {
            b.iter(|| sys.step(black_box(s), 1e-3).unwrap())
        });
    }
    g.finish();
}

fn cone(c: &mut Criterion) {
    let (plus, minus) = probes();
    let opts = QuadratureOptions::default();
    let mut g = c.benchmark_group("cone");
    g.bench_function("i_value", |b| {
        b.iter(|| i_value(black_box(&plus), &opts).unwrap())
    });
    g.bench_function("j_value", |b| {
        b.iter(|| j_value(black_box(&minus), &opts).unwrap())
    });
    g.finish();
}

fn probe(c: &mut Criterion) {
    let params = NormParams::estimate(0.1).unwrap();
    let mut g = c.benchmark_group("probe");
    for sign in Sign::BOTH {
        let (phi, psi, s) = spectra(sign);
        let name = match sign {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        };
        g.bench_function(name, |b| {
            b.iter(|| key_bilinear_probe(black_box(&phi), &psi, &s.lattice, &params, sign))
        });
    }
    g.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    fft(c);
    solver(c);
    cone(c);
    probe(c);
}
