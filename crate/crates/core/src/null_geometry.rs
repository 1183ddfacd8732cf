//! Angles between interacting frequencies, the weights `r_+-`, and the
//! ratios that measure the null structure of the projected product.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::spectral::{projection_matrix, Sign};
use crate::CsvFloat;

pub type Vec2 = [f64; 2];

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn neg(a: Vec2) -> Vec2 {
    [-a[0], -a[1]]
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Angle in `[0, pi]` between two nonzero vectors.
pub fn angle(a: Vec2, b: Vec2) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return invalid("angle with a zero vector");
    }
    Ok(cross(a, b).abs().atan2(dot(a, b)))
}

/// [`angle`], with `0` when either vector vanishes.
pub(crate) fn angle_or_zero(a: Vec2, b: Vec2) -> f64 {
    angle(a, b).unwrap_or(0.0)
}

/// `|a||b| - a.b`, accurate also for nearly parallel vectors.
fn one_minus_cos_scaled(a: Vec2, b: Vec2) -> f64 {
    let d = dot(a, b);
    let p = norm(a) * norm(b);
    if d > 0.0 {
        let c = cross(a, b);
        c * c / (p + d)
    } else {
        p - d
    }
}

/// `r_+ = |eta| + |xi - eta| - |xi|`.
pub fn r_plus(xi: Vec2, eta: Vec2) -> f64 {
    let zeta = sub(xi, eta);
    let denom = norm(eta) + norm(zeta) + norm(xi);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * one_minus_cos_scaled(eta, zeta) / denom
}

/// `r_- = |xi| - ||eta| - |xi - eta||`.
pub fn r_minus(xi: Vec2, eta: Vec2) -> f64 {
    let w = neg(sub(xi, eta));
    let gap = (norm(eta) - norm(w)).abs();
    let denom = norm(xi) + gap;
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * one_minus_cos_scaled(eta, w) / denom
}

/// Input frequency `eta`, output frequency `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPair {
    pub eta: Vec2,
    pub xi: Vec2,
}

impl FreqPair {
    pub fn new(eta: Vec2, xi: Vec2) -> Self {
        Self { eta, xi }
    }

    /// From the two interacting frequencies `eta` and `zeta = xi - eta`.
    pub fn from_parts(eta: Vec2, zeta: Vec2) -> Self {
        Self {
            eta,
            xi: [eta[0] + zeta[0], eta[1] + zeta[1]],
        }
    }

    pub fn xi_minus_eta(&self) -> Vec2 {
        sub(self.xi, self.eta)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let s = |v: Vec2| [lambda * v[0], lambda * v[1]];
        Self {
            eta: s(self.eta),
            xi: s(self.xi),
        }
    }
}

fn check_parts(eta: Vec2, zeta: Vec2) -> Result<()> {
    if norm(eta) == 0.0 || norm(zeta) == 0.0 {
        return invalid("eta and xi - eta must be nonzero");
    }
    Ok(())
}

/// `theta(eta, xi - eta) / (r_+ / min(|eta|, |xi - eta|))^(1/2)`.
pub fn angle_ratio_plus(xi: Vec2, eta: Vec2) -> Result<f64> {
    let zeta = sub(xi, eta);
    check_parts(eta, zeta)?;
    let theta = angle(eta, zeta)?;
    let r = r_plus(xi, eta);
    if theta == 0.0 || r == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "collinear configuration (theta = {theta}, r_+ = {r})"
        )));
    }
    Ok(theta / (r / norm(eta).min(norm(zeta))).sqrt())
}

/// `theta(eta, -(xi - eta)) / (|xi| r_- / (|eta| |xi - eta|))^(1/2)`.
pub fn angle_ratio_minus(xi: Vec2, eta: Vec2) -> Result<f64> {
    let zeta = sub(xi, eta);
    check_parts(eta, zeta)?;
    let theta = angle(eta, neg(zeta))?;
    let r = r_minus(xi, eta);
    let rhs = (norm(xi) * r / (norm(eta) * norm(zeta))).sqrt();
    if theta == 0.0 || rhs == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "antiparallel configuration (theta = {theta}, r_- = {r})"
        )));
    }
    Ok(theta / rhs)
}

/// `||P_sign(xi - eta) P_+(eta)||_2`.
pub fn symbol_norm(sign: Sign, xi: Vec2, eta: Vec2) -> f64 {
    let zeta = sub(xi, eta);
    projection_matrix(sign, zeta)
        .mul(&projection_matrix(Sign::Plus, eta))
        .operator_norm()
}

/// The angle paired with `P_sign(xi - eta) P_+(eta)`:
/// `theta(eta, -+(xi - eta))`.
pub fn symbol_angle(sign: Sign, xi: Vec2, eta: Vec2) -> Result<f64> {
    let zeta = sub(xi, eta);
    check_parts(eta, zeta)?;
    match sign {
        Sign::Plus => angle(eta, neg(zeta)),
        Sign::Minus => angle(eta, zeta),
    }
}

/// `symbol_norm / symbol_angle`.
pub fn symbol_bound_ratio(sign: Sign, xi: Vec2, eta: Vec2) -> Result<f64> {
    let theta = symbol_angle(sign, xi, eta)?;
    if theta == 0.0 {
        return Err(Error::DegenerateInput(
            "zero angle: symbol and angle vanish together".into(),
        ));
    }
    Ok(symbol_norm(sign, xi, eta) / theta)
}

/// Log-uniform magnitude in `[lo, hi]` times a uniform direction.
pub fn sample_frequency<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Vec2 {
    let r = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    [r * a.cos(), r * a.sin()]
}

/// `eta` and `xi - eta` drawn independently by [`sample_frequency`] on
/// `[1e-2, 1e2]`.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R) -> FreqPair {
    let eta = sample_frequency(rng, 1e-2, 1e2);
    let zeta = sample_frequency(rng, 1e-2, 1e2);
    FreqPair::from_parts(eta, zeta)
}

/// Running extrema of a ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Samples excluded as degenerate.
    pub skipped: usize,
}

impl Default for Envelope {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
            skipped: 0,
        }
    }
}

impl Envelope {
    pub fn push(&mut self, r: Result<f64>) {
        match r {
            Ok(v) if v.is_finite() => {
                self.min = self.min.min(v);
                self.max = self.max.max(v);
                self.count += 1;
            }
            _ => self.skipped += 1,
        }
    }
}

/// One sweep sample with its four ratios (`NaN` when degenerate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSample {
    pub pair: FreqPair,
    pub ratio_plus: f64,
    pub ratio_minus: f64,
    pub symbol_plus: f64,
    pub symbol_minus: f64,
}

/// Envelopes of the four ratios over a seeded sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSweep {
    pub samples: Vec<NullSample>,
    pub angle_plus: Envelope,
    pub angle_minus: Envelope,
    pub symbol_plus: Envelope,
    pub symbol_minus: Envelope,
}

pub fn null_sweep<R: Rng + ?Sized>(rng: &mut R, count: usize, keep_samples: bool) -> NullSweep {
    let mut sweep = NullSweep {
        samples: Vec::new(),
        angle_plus: Envelope::default(),
        angle_minus: Envelope::default(),
        symbol_plus: Envelope::default(),
        symbol_minus: Envelope::default(),
    };
    for _ in 0..count {
        let pair = sample_pair(rng);
        let (xi, eta) = (pair.xi, pair.eta);
        let rp = angle_ratio_plus(xi, eta);
        let rm = angle_ratio_minus(xi, eta);
        let sp = symbol_bound_ratio(Sign::Plus, xi, eta);
        let sm = symbol_bound_ratio(Sign::Minus, xi, eta);
        let val = |r: &Result<f64>| *r.as_ref().unwrap_or(&f64::NAN);
        if keep_samples {
            sweep.samples.push(NullSample {
                pair,
                ratio_plus: val(&rp),
                ratio_minus: val(&rm),
                symbol_plus: val(&sp),
                symbol_minus: val(&sm),
            });
        }
        sweep.angle_plus.push(rp);
        sweep.angle_minus.push(rm);
        sweep.symbol_plus.push(sp);
        sweep.symbol_minus.push(sm);
    }
    sweep
}

impl NullSweep {
    pub const CSV_HEADER: &'static str = "eta1,eta2,xi1,xi2,angle_ratio_plus,angle_ratio_minus,\
symbol_ratio_plus,symbol_ratio_minus,run_min_plus,run_max_plus,run_min_minus,run_max_minus";

    /// Rows with running extrema of the two angle ratios.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut ep = Envelope::default();
        let mut em = Envelope::default();
        self.samples
            .iter()
            .map(|s| {
                let ok = |v: f64| if v.is_nan() { invalid("") } else { Ok(v) };
                ep.push(ok(s.ratio_plus));
                em.push(ok(s.ratio_minus));
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    CsvFloat(s.pair.eta[0]),
                    CsvFloat(s.pair.eta[1]),
                    CsvFloat(s.pair.xi[0]),
                    CsvFloat(s.pair.xi[1]),
                    CsvFloat(s.ratio_plus),
                    CsvFloat(s.ratio_minus),
                    CsvFloat(s.symbol_plus),
                    CsvFloat(s.symbol_minus),
                    CsvFloat(ep.min),
                    CsvFloat(ep.max),
                    CsvFloat(em.min),
                    CsvFloat(em.max)
                )
            })
            .collect()
    }
}

/// Points approaching the collinear configuration: `eta` along
/// `direction` with magnitude `a`, `xi - eta` of magnitude `b` at angle
/// `theta_k` from it, for each given angle.
pub fn collinear_path(direction: f64, a: f64, b: f64, angles: &[f64]) -> Vec<FreqPair> {
    angles
        .iter()
        .map(|&th| {
            let eta = [a * direction.cos(), a * direction.sin()];
            let zeta = [b * (direction + th).cos(), b * (direction + th).sin()];
            FreqPair::from_parts(eta, zeta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    #[test]
    fn angle_examples() {
        assert_eq!(angle([1.0, 0.0], [1.0, 0.0]).unwrap(), 0.0);
        assert!((angle([1.0, 0.0], [0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((angle([1.0, 0.0], [-1.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(
            angle([0.0, 0.0], [1.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_plus([2.0, 0.0], [1.0, 0.0]), 0.0);
        assert!((r_minus([1.0, 1.0], [1.0, 0.0]) - SQRT_2).abs() < 1e-15);
        // Direct formulas on a generic point.
        let (xi, eta) = ([0.3, 1.7], [-0.4, 0.9]);
        let z = sub(xi, eta);
        let rp = norm(eta) + norm(z) - norm(xi);
        let rm = norm(xi) - (norm(eta) - norm(z)).abs();
        assert!((r_plus(xi, eta) - rp).abs() < 1e-14);
        assert!((r_minus(xi, eta) - rm).abs() < 1e-14);
    }

    #[test]
    fn ratio_examples() {
        let (xi, eta) = ([1.0, 1.0], [1.0, 0.0]);
        let rp = angle_ratio_plus(xi, eta).unwrap();
        assert!((rp - FRAC_PI_2 / (2.0 - SQRT_2).sqrt()).abs() < 1e-14);
        assert!((rp - 2.052).abs() < 1e-3);
        let rm = angle_ratio_minus(xi, eta).unwrap();
        assert!((rm - FRAC_PI_2 / SQRT_2).abs() < 1e-14);
        assert!(matches!(
            angle_ratio_plus([2.0, 0.0], [1.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
        // Antiparallel parts: theta(eta, -(xi - eta)) = 0 and r_- = 0.
        assert_eq!(r_minus([-1.0, 0.0], [1.0, 0.0]), 0.0);
        assert!(matches!(
            angle_ratio_minus([-1.0, 0.0], [1.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    /// Small-angle limits: 2 for equal magnitudes, sqrt(2) when one part
    /// is much shorter.
    #[test]
    fn collinear_limits() {
        for th in [1e-1, 1e-2, 1e-3] {
            let p = collinear_path(0.3, 1.0, 1.0, &[th])[0];
            let r = angle_ratio_plus(p.xi, p.eta).unwrap();
            assert!((r - 2.0).abs() < th, "theta {th}: {r}");
            let p = collinear_path(0.3, 1e-6, 1.0, &[th])[0];
            let r = angle_ratio_plus(p.xi, p.eta).unwrap();
            assert!((r - SQRT_2).abs() < th, "theta {th}: {r}");
        }
    }

    #[test]
    fn symbol_examples() {
        let (xi, eta) = ([2.0, 0.0], [1.0, 0.0]);
        assert!(symbol_norm(Sign::Minus, xi, eta) < 1e-15);
        assert_eq!(symbol_angle(Sign::Minus, xi, eta).unwrap(), 0.0);
        assert!(symbol_bound_ratio(Sign::Minus, xi, eta).is_err());
        let r = symbol_bound_ratio(Sign::Plus, xi, eta).unwrap();
        assert!((r - 1.0 / PI).abs() < 1e-14);
    }

    /// `||P_-(zeta) P_+(eta)|| = sin(theta/2)` exactly, so the ratio never
    /// exceeds 1/2.
    #[test]
    fn symbol_norm_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = sample_pair(&mut rng);
            let th = symbol_angle(Sign::Minus, p.xi, p.eta).unwrap();
            let n = symbol_norm(Sign::Minus, p.xi, p.eta);
            assert!((n - (th / 2.0).sin()).abs() < 1e-12);
            let th = symbol_angle(Sign::Plus, p.xi, p.eta).unwrap();
            let n = symbol_norm(Sign::Plus, p.xi, p.eta);
            assert!((n - (th / 2.0).sin()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn r_weights_nonnegative(a in -50.0..50.0f64, b in -50.0..50.0f64,
                                 c in -50.0..50.0f64, d in -50.0..50.0f64) {
            prop_assert!(r_plus([a, b], [c, d]) >= 0.0);
            prop_assert!(r_minus([a, b], [c, d]) >= 0.0);
        }

        #[test]
        fn angle_symmetric(a in -5.0..5.0f64, b in -5.0..5.0f64,
                           c in -5.0..5.0f64, d in -5.0..5.0f64) {
            prop_assume!(a != 0.0 || b != 0.0);
            prop_assume!(c != 0.0 || d != 0.0);
            prop_assert_eq!(angle([a, b], [c, d]).unwrap(), angle([c, d], [a, b]).unwrap());
        }

        #[test]
        fn ratios_scale_invariant(seed in 0u64..1000, k in -6i32..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_pair(&mut rng);
            let q = p.scaled(2f64.powi(k));
            let pairs = [
                (angle_ratio_plus(p.xi, p.eta), angle_ratio_plus(q.xi, q.eta)),
                (angle_ratio_minus(p.xi, p.eta), angle_ratio_minus(q.xi, q.eta)),
                (symbol_bound_ratio(Sign::Plus, p.xi, p.eta),
                 symbol_bound_ratio(Sign::Plus, q.xi, q.eta)),
            ];
            for (a, b) in pairs {
                let (a, b) = (a.unwrap(), b.unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
    }

    #[test]
    fn sweep_is_seed_stable() {
        let a = null_sweep(&mut ChaCha8Rng::seed_from_u64(9), 2000, true);
        let b = null_sweep(&mut ChaCha8Rng::seed_from_u64(9), 2000, false);
        assert_eq!(a.angle_plus, b.angle_plus);
        assert_eq!(a.csv_rows().len(), 2000);
        assert!(a.symbol_minus.max <= 0.5);
    }
}
