use monopole_bench::{field, probes, spectra, system, GRID_SIZES};
use monopole_core::cone::{i_value, j_value, QuadratureOptions};
use monopole_core::norms::{key_bilinear_probe, NormParams};
use monopole_core::Sign;

#[test]
fn fields_round_trip() {
    for n in GRID_SIZES {
        let (sp, f) = field(n);
        assert!(f.max_abs() > 0.0);
        let back = sp.inverse(&sp.forward(&f).unwrap()).unwrap();
        assert!(back.sub(&f).max_abs() < 1e-12 * f.max_abs());
    }
}

#[test]
fn systems_step() {
    let (sys, s) = system(16);
    let next = sys.step(&s, 1e-3).unwrap();
    assert!(next.max_abs().is_finite() && next.max_abs() > 0.0);
}

#[test]
fn probes_sit_on_their_branches() {
    let (plus, minus) = probes();
    assert!(plus.on_plus_cone() && minus.on_minus_branch());
    let opts = QuadratureOptions::default();
    assert!(i_value(&plus, &opts).unwrap().value.is_finite());
    assert!(j_value(&minus, &opts).unwrap().value.is_finite());
}

#[test]
fn probe_ratios_are_finite() {
    let params = NormParams::estimate(0.1).unwrap();
    for sign in Sign::BOTH {
        let (phi, psi, s) = spectra(sign);
        let r = key_bilinear_probe(&phi, &psi, &s.lattice, &params, sign);
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
    }
}
