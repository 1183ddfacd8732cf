//! Property tests for the invariants each module promises.

use std::f64::consts::PI;

use monopole_core::cone::{i_value, j_value, ConeProbe, QuadratureOptions};
use monopole_core::diagonal::DiagonalSystem;
use monopole_core::gauge::{conjugate_field, monopole_residual};
use monopole_core::lie::{bracket, conjugate, frobenius_norm, GroupElement, LieElement};
use monopole_core::norms::{
    hsp_norm, key_bilinear_probe_with, scaling_check, scaling_exponent, NormParams, ProbeKernel,
    ProbeSweep, SparseSpectrum,
};
use monopole_core::null_geometry::{
    angle, angle_ratio_minus, angle_ratio_plus, symbol_bound_ratio,
};
use monopole_core::spectral::{alpha_dot, beta, projection_matrix, random_lie_field};
use monopole_core::{
    rng_from_seed, GridSpec, MonopoleConfig, Sign, Spectral, SpectralPair, TimeDerivatives,
};
use proptest::prelude::*;

fn spectral(n: usize) -> Spectral {
    Spectral::new(GridSpec::new(n, 2.0 * PI, 1e-3).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn freq() -> impl Strategy<Value = [f64; 2]> {
    (0.05..20.0f64, -PI..PI).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobi_identity_and_closure(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = rng_from_seed(seed);
        let (x, y, z) = (
            LieElement::random(n, &mut rng),
            LieElement::random(n, &mut rng),
            LieElement::random(n, &mut rng),
        );
        let b = |a: &LieElement, c: &LieElement| bracket(a, c).unwrap();
        let sum = b(&x, &b(&y, &z)).entries() + b(&y, &b(&z, &x)).entries()
            + b(&z, &b(&x, &y)).entries();
        let scale = frobenius_norm(&x) * frobenius_norm(&y) * frobenius_norm(&z);
        prop_assert!(sum.norm() <= 1e-12 * scale);
        prop_assert!(b(&x, &y).is_valid(1e-12));
    }

    #[test]
    fn conjugation_is_an_isometry(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = rng_from_seed(seed);
        let o = GroupElement::exp(&LieElement::random(n, &mut rng));
        let x = LieElement::random(n, &mut rng);
        let y = conjugate(&o, &x).unwrap();
        prop_assert!(rel(frobenius_norm(&y), frobenius_norm(&x)) <= 1e-12);
    }

    #[test]
    fn dirac_symbol_splits_into_projections(xi in freq(), lambda in 0.01..100.0f64) {
        let r = xi[0].hypot(xi[1]);
        let (pp, pm) = (projection_matrix(Sign::Plus, xi), projection_matrix(Sign::Minus, xi));
        prop_assert!(alpha_dot(xi).max_abs_diff(&pp.sub(&pm).scale(r)) <= 1e-12 * r);
        prop_assert!(beta().mul(&pp).max_abs_diff(&pm.mul(&beta())) <= 1e-12);
        prop_assert!(beta().mul(&pm).max_abs_diff(&pp.mul(&beta())) <= 1e-12);
        let scaled = projection_matrix(Sign::Plus, [lambda * xi[0], lambda * xi[1]]);
        prop_assert!(scaled.max_abs_diff(&pp) <= 1e-15);
    }

    #[test]
    fn null_ratios_are_scale_invariant(xi in freq(), eta in freq(), lambda in 0.01..100.0f64) {
        let s = |v: [f64; 2]| [lambda * v[0], lambda * v[1]];
        let pairs: [(fn([f64; 2], [f64; 2]) -> _, &str); 2] =
            [(angle_ratio_plus, "plus"), (angle_ratio_minus, "minus")];
        for (f, name) in pairs {
            if let (Ok(a), Ok(b)) = (f(xi, eta), f(s(xi), s(eta))) {
                prop_assert!(rel(a, b) <= 1e-12, "{name}: {a} vs {b}");
            }
        }
        if let (Ok(a), Ok(b)) = (
            symbol_bound_ratio(Sign::Minus, xi, eta),
            symbol_bound_ratio(Sign::Minus, s(xi), s(eta)),
        ) {
            prop_assert!(rel(a, b) <= 1e-12);
        }
        prop_assert_eq!(angle(xi, eta).unwrap(), angle(eta, xi).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projections_commute_with_abs_d(seed in any::<u64>(), power in -1.0..2.0f64) {
        let sp = spectral(16);
        let mut rng = rng_from_seed(seed);
        // Negative powers need a vanishing zero mode.
        let mut hat = || {
            let mut h = sp.forward(&random_lie_field(&sp, 2, 5, 1.0, &mut rng)).unwrap();
            h.entries_mut().for_each(|e| e[0] = 0.0.into());
            h
        };
        let f = SpectralPair::new(hat(), hat());
        for sign in Sign::BOTH {
            let a = sp.apply_abs_d(&sp.apply_projection(sign, &f).unwrap(), power).unwrap();
            let b = sp.apply_projection(sign, &sp.apply_abs_d(&f, power).unwrap()).unwrap();
            prop_assert!(a.sub(&b).max_abs() <= 1e-12 * a.max_abs().max(1.0));
        }
    }

    #[test]
    fn residual_conjugates_under_constant_gauge(seed in any::<u64>()) {
        let sys = DiagonalSystem::new(GridSpec::new(16, 2.0 * PI, 1e-3).unwrap());
        let sp = sys.spectral();
        let mut rng = rng_from_seed(seed);
        let cfg = MonopoleConfig::random(sp, 2, 3, 0.5, &mut rng);
        // Arbitrary time derivatives: the identity holds off-shell too.
        let mut f = || random_lie_field(sp, 2, 3, 0.5, &mut rng);
        let dts = TimeDerivatives { a0: f(), a1: f(), a2: f(), phi: f() };
        let o = GroupElement::exp(&LieElement::random(2, &mut rng));
        let c = |m: &_| conjugate_field(&o, m);
        let cfg2 = MonopoleConfig::new(cfg.grid, c(&cfg.a0), c(&cfg.a1), c(&cfg.a2), c(&cfg.phi))
            .unwrap();
        let dts2 = TimeDerivatives {
            a0: c(&dts.a0),
            a1: c(&dts.a1),
            a2: c(&dts.a2),
            phi: c(&dts.phi),
        };
        let r = monopole_residual(sp, &cfg, &dts).unwrap();
        let r2 = monopole_residual(sp, &cfg2, &dts2).unwrap();
        for (a, b) in r.rows.iter().zip(&r2.rows) {
            prop_assert!(c(a).sub(b).max_abs() <= 1e-12 * a.max_abs().max(1.0));
            prop_assert!(b.lie_defect() <= 1e-10);
        }
    }

    #[test]
    fn hsp_norm_is_parseval_at_p2_and_homogeneous(seed in any::<u64>(), c in 0.1..10.0f64,
                                                  p in 1.05..2.0f64, s in -1.0..2.0f64) {
        let sp = spectral(16);
        let g = sp.grid();
        let f = random_lie_field(&sp, 2, 5, 1.0, &mut rng_from_seed(seed));
        let l2 = (f.data().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx() * g.dx()).sqrt();
        prop_assert!(rel(hsp_norm(&sp, &[&f], 0.0, 2.0).unwrap(), l2) <= 1e-12);
        let a = hsp_norm(&sp, &[&f], s, p).unwrap();
        let b = hsp_norm(&sp, &[&f.scale(c)], s, p).unwrap();
        prop_assert!(rel(b, c * a) <= 1e-12);
    }

    #[test]
    fn scaling_exponent_holds_for_dyadic_factors(seed in any::<u64>(), p in 1.05..2.0f64,
                                                 s in 0.0..1.5f64, k in 1i32..=2) {
        let sp = spectral(32);
        let f = random_lie_field(&sp, 2, 6, 1.0, &mut rng_from_seed(seed));
        let e = scaling_check(&sp, &[&f], 2f64.powi(k), s, p).unwrap();
        prop_assert!((e - scaling_exponent(s, p)).abs() <= 1e-3);
    }

    #[test]
    fn constant_kernel_dominates_the_angle_kernel(seed in any::<u64>(), p in 1.1..2.0f64) {
        let st = ProbeSweep::default();
        let l = &st.lattice;
        let params = NormParams::new(p, 1.0 / p, 1.0).unwrap();
        let mut rng = rng_from_seed(seed);
        for sign in Sign::BOTH {
            let phi = SparseSpectrum::random(&mut rng, l, 16, 4, 1, Sign::Plus).unwrap();
            let psi = SparseSpectrum::random(&mut rng, l, 16, 4, 1, sign).unwrap();
            let theta = key_bilinear_probe_with(&phi, &psi, l, &params, sign, ProbeKernel::Angle);
            let pi = key_bilinear_probe_with(&phi, &psi, l, &params, sign, ProbeKernel::Constant(PI));
            prop_assert!(theta.lhs <= pi.lhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cone_integrals_are_rotation_invariant(ratio in 1.05..20.0f64, r in 0.1..10.0f64,
                                            p in 1.05..2.0f64, rot in -PI..PI) {
        let opts = QuadratureOptions::default();
        let xi = [0.6 * r, 0.8 * r];
        let plus = ConeProbe::new(ratio * r, xi, p).unwrap();
        let a = i_value(&plus, &opts).unwrap().value;
        let b = i_value(&plus.rotated(rot), &opts).unwrap().value;
        prop_assert!(rel(a, b) <= 1e-10);
        let minus = ConeProbe::new(r / ratio, xi, p).unwrap();
        let a = j_value(&minus, &opts).unwrap().value;
        let b = j_value(&minus.rotated(rot), &opts).unwrap().value;
        prop_assert!(rel(a, b) <= 1e-10);
    }
}
