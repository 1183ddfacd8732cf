//! Integrals against `delta(tau - |eta| -+ |xi - eta|)` and the kernels
//! `I`, `J` built from them.
//!
//! Both curves are parametrized in polar coordinates about `eta = 0`,
//! with `psi` the angle measured from the direction of `xi`:
//!
//! * plus (ellipse `|eta| + |xi - eta| = tau`):
//!   `rho = (tau^2 - |xi|^2) / (2 (tau - xi.e))`,
//! * minus (hyperbola branch `|eta| - |xi - eta| = tau`, `|psi| < psi0`):
//!   `rho = (|xi|^2 - tau^2) / (2 (xi.e - tau))`,
//!
//! and the delta measure contributes `rho / |d_rho g|`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::null_geometry::Vec2;
use crate::quadrature::{adaptive_doubling, cluster_map, composite};
use crate::spectral::Sign;
use crate::CsvFloat;

/// A point `(tau, xi)` together with the exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeProbe {
    pub tau: f64,
    pub xi: Vec2,
    pub p: f64,
}

impl ConeProbe {
    pub fn new(tau: f64, xi: Vec2, p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return invalid(format!("p = {p} must lie in (1, 2]"));
        }
        if !tau.is_finite() || !xi[0].is_finite() || !xi[1].is_finite() {
            return invalid("probe coordinates must be finite");
        }
        Ok(Self { tau, xi, p })
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi[0].hypot(self.xi[1])
    }

    pub fn on_plus_cone(&self) -> bool {
        self.tau > self.xi_norm()
    }

    pub fn on_minus_branch(&self) -> bool {
        self.tau.abs() < self.xi_norm()
    }

    /// `(lambda tau, lambda xi)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            tau: lambda * self.tau,
            xi: [lambda * self.xi[0], lambda * self.xi[1]],
            ..*self
        }
    }

    /// Rotation of `xi` by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            xi: rotate(self.xi, angle),
            ..*self
        }
    }
}

/// Value of a delta-restricted integral and its quadrature record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaIntegralResult {
    pub value: f64,
    pub quadrature_points: usize,
    /// Change between the last two refinements.
    pub est_error: f64,
    pub converged: bool,
}

impl DeltaIntegralResult {
    fn combine(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            quadrature_points: self.quadrature_points + other.quadrature_points,
            est_error: self.est_error + other.est_error,
            converged: self.converged && other.converged,
        }
    }
}

/// Angular quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub start_points: usize,
    pub max_points: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            start_points: 2048,
            max_points: 1 << 18,
            rel_tol: 1e-6,
        }
    }
}

impl QuadratureOptions {
    /// Same tolerance, twice the points at every level.
    pub fn doubled(self) -> Self {
        Self {
            start_points: 2 * self.start_points,
            max_points: 2 * self.max_points,
            ..self
        }
    }
}

pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn unit_of(xi: Vec2) -> (f64, Vec2) {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        (0.0, [1.0, 0.0])
    } else {
        (r, [xi[0] / r, xi[1] / r])
    }
}

fn run(opts: &QuadratureOptions, eval: impl FnMut(usize) -> f64) -> DeltaIntegralResult {
    let a = adaptive_doubling(opts.start_points, opts.max_points, opts.rel_tol, eval);
    DeltaIntegralResult {
        value: a.value,
        quadrature_points: a.points,
        est_error: a.est_error,
        converged: a.converged,
    }
}

/// `f(eta, |eta|, |xi - eta|)` with both lengths computed stably.
pub trait RadialAware: Fn(Vec2, f64, f64) -> f64 {}
impl<T: Fn(Vec2, f64, f64) -> f64> RadialAware for T {}

fn check_plus(tau: f64, r: f64) -> Result<()> {
    if !(tau > r) || !tau.is_finite() {
        return invalid(format!(
            "plus cone needs tau > |xi|, got tau = {tau}, |xi| = {r}"
        ));
    }
    Ok(())
}

fn check_minus(tau: f64, r: f64) -> Result<()> {
    if !(tau.abs() < r) || !r.is_finite() {
        return invalid(format!(
            "minus branch needs |tau| < |xi|, got tau = {tau}, |xi| = {r}"
        ));
    }
    Ok(())
}

fn plus_core(
    tau: f64,
    xi: Vec2,
    opts: &QuadratureOptions,
    f: impl RadialAware,
) -> Result<DeltaIntegralResult> {
    let (r, u) = unit_of(xi);
    check_plus(tau, r)?;
    let gap = (tau - r) * (tau + r);
    let integrand = |psi: f64| {
        let (s, co) = psi.sin_cos();
        let half = (0.5 * psi).sin();
        let c = (tau - r) + 2.0 * r * half * half;
        let rho = gap / (2.0 * c);
        let rest = (c * c + r * r * s * s) / (2.0 * c);
        let e = [co * u[0] - s * u[1], s * u[0] + co * u[1]];
        f([rho * e[0], rho * e[1]], rho, rest) * rho * rest / c
    };
    Ok(run(opts, |n| composite(-PI, PI, n, integrand)))
}

/// Angles `(psi_s, psi0)`: the split point and the asymptote.
fn minus_angles(tau: f64, r: f64) -> (f64, f64) {
    let psi0 = 2.0 * ((r - tau) / (r + tau)).sqrt().atan();
    let psi_s = 2.0 * ((r - tau) / (3.0 * (r + tau))).sqrt().atan();
    (psi_s, psi0)
}

fn minus_integrand<'a>(
    tau: f64,
    r: f64,
    u: Vec2,
    psi0: f64,
    f: &'a impl RadialAware,
) -> impl Fn(f64) -> f64 + 'a {
    let gap = (r - tau) * (r + tau);
    move |psi: f64| {
        let c = -2.0 * r * (0.5 * (psi + psi0)).sin() * (0.5 * (psi - psi0)).sin();
        if c <= 0.0 {
            return 0.0;
        }
        let (s, co) = psi.sin_cos();
        let rho = gap / (2.0 * c);
        let rest = (c * c + r * r * s * s) / (2.0 * c);
        if !rho.is_finite() || !rest.is_finite() {
            return 0.0;
        }
        let e = [co * u[0] - s * u[1], s * u[0] + co * u[1]];
        let w = f([rho * e[0], rho * e[1]], rho, rest) * rho * rest / c;
        if w.is_finite() {
            w
        } else {
            0.0
        }
    }
}

/// Whole branch, `psi = psi0 phi(t)` with the endpoint-clustering map.
fn minus_core(
    tau: f64,
    xi: Vec2,
    opts: &QuadratureOptions,
    f: impl RadialAware,
) -> Result<DeltaIntegralResult> {
    let (r, u) = unit_of(xi);
    check_minus(tau, r)?;
    let (_, psi0) = minus_angles(tau, r);
    let g = minus_integrand(tau, r, u, psi0, &f);
    Ok(run(opts, |n| {
        composite(-1.0, 1.0, n, |t| {
            let (phi, d) = cluster_map(t);
            g(psi0 * phi) * psi0 * d
        })
    }))
}

/// The pieces `|eta| + |xi - eta| <= 2|xi|` and `>= 2|xi|`.
fn minus_split(
    tau: f64,
    xi: Vec2,
    opts: &QuadratureOptions,
    f: impl RadialAware,
) -> Result<(DeltaIntegralResult, DeltaIntegralResult)> {
    let (r, u) = unit_of(xi);
    check_minus(tau, r)?;
    let (psi_s, psi0) = minus_angles(tau, r);
    let g = minus_integrand(tau, r, u, psi0, &f);
    let inner = run(opts, |n| composite(-psi_s, psi_s, n, &g));
    let half = 0.5 * (psi0 - psi_s);
    let outer = run(opts, |n| {
        composite(-1.0, 1.0, n, |t| {
            let (phi, d) = cluster_map(t);
            let psi = psi_s + half * (1.0 + phi);
            (g(psi) + g(-psi)) * half * d
        })
    });
    Ok((inner, outer))
}

/// `int F(eta) delta(tau - |eta| - |xi - eta|) d eta` for `tau > |xi|`.
pub fn delta_integral_plus(
    f: impl Fn(Vec2) -> f64,
    tau: f64,
    xi: Vec2,
    opts: &QuadratureOptions,
) -> Result<DeltaIntegralResult> {
    plus_core(tau, xi, opts, |eta, _, _| f(eta))
}

/// `int F(eta) delta(tau - |eta| + |xi - eta|) d eta` for `|tau| < |xi|`.
/// `F` must decay faster than `|eta|^{-2}`.
pub fn delta_integral_minus(
    f: impl Fn(Vec2) -> f64,
    tau: f64,
    xi: Vec2,
    opts: &QuadratureOptions,
) -> Result<DeltaIntegralResult> {
    minus_core(tau, xi, opts, |eta, _, _| f(eta))
}

/// `I(tau, xi)` and the comparison with `1 / (tau (tau - |xi|)^{p/2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IValue {
    /// The bare delta integral.
    pub integral: DeltaIntegralResult,
    pub value: f64,
    /// `integral * tau (tau - |xi|)^{p/2}`.
    pub closed_form_ratio: f64,
}

pub fn i_value(probe: &ConeProbe, opts: &QuadratureOptions) -> Result<IValue> {
    let (tau, p) = (probe.tau, probe.p);
    let r = probe.xi_norm();
    if r == 0.0 {
        return invalid("I needs xi != 0");
    }
    let integral = plus_core(tau, probe.xi, opts, |_, a, b| {
        1.0 / (a * b.powf(1.0 + 0.5 * p))
    })?;
    let base = (tau - r).powf(0.5 * p);
    Ok(IValue {
        integral,
        value: r * base * integral.value,
        closed_form_ratio: tau * base * integral.value,
    })
}

/// `J(tau, xi)`, its split and the comparison quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JValue {
    /// Bare integral over the whole branch.
    pub integral: DeltaIntegralResult,
    pub integral_j1: DeltaIntegralResult,
    pub integral_j2: DeltaIntegralResult,
    /// `|xi|^{1+p/2} ||xi| - |tau||^{p/2}` times the bare integrals.
    pub value: f64,
    pub j1: f64,
    pub j2: f64,
    /// `|J - (J1 + J2)| / J`.
    pub split_defect: f64,
    /// `J2 / (|xi|^{-p-1/2} ||xi| - |tau||^{-1/2})` on the bare integral.
    pub j2_bound_ratio: f64,
    /// `||xi| - |tau|| / |xi|`.
    pub bracket: f64,
    /// `J / bracket^{(p-1)/2}`.
    pub bracket_ratio: f64,
}

impl JValue {
    /// `j1` is the ratio against `1 / (|xi|^{1+p/2} ||xi| - |tau||^{p/2})`.
    pub fn j1_closed_form_ratio(&self) -> f64 {
        self.j1
    }
}

fn j_kernel(p: f64) -> impl Fn(Vec2, f64, f64) -> f64 {
    move |_, a, b| (a * b).powf(-1.0 - 0.5 * p)
}

pub fn j_value(probe: &ConeProbe, opts: &QuadratureOptions) -> Result<JValue> {
    let (tau, p) = (probe.tau, probe.p);
    let r = probe.xi_norm();
    let integral = minus_core(tau, probe.xi, opts, j_kernel(p))?;
    let (integral_j1, integral_j2) = minus_split(tau, probe.xi, opts, j_kernel(p))?;
    let dist = r - tau.abs();
    let w = r.powf(1.0 + 0.5 * p) * dist.powf(0.5 * p);
    let value = w * integral.value;
    let bracket = dist / r;
    Ok(JValue {
        integral,
        integral_j1,
        integral_j2,
        value,
        j1: w * integral_j1.value,
        j2: w * integral_j2.value,
        split_defect: (integral.value - integral_j1.value - integral_j2.value).abs()
            / integral.value,
        j2_bound_ratio: integral_j2.value * r.powf(p + 0.5) * dist.sqrt(),
        bracket,
        bracket_ratio: value / bracket.powf(0.5 * (p - 1.0)),
    })
}

/// The one-dimensional form of `J2` in the variable
/// `x = (|eta| + |xi - eta|) / |xi|`:
/// `||xi|^2 - tau^2|^{-1/2} int_2^inf |(x|xi| + tau)/2|^{-1-p/2}
/// |(x|xi| - tau)/2|^{-1-p/2} ||xi|^2 x^2 - tau^2| (x^2 - 1)^{-1/2} dx`,
/// evaluated with `x = cosh s`. It equals twice the bare `J2`.
pub fn fk_lemma44_xform(
    probe: &ConeProbe,
    opts: &QuadratureOptions,
) -> Result<DeltaIntegralResult> {
    let (tau, p) = (probe.tau, probe.p);
    if !(p > 1.0) {
        return invalid(format!("the x-integral diverges for p = {p} <= 1"));
    }
    let r = probe.xi_norm();
    check_minus(tau, r)?;
    let lo = 2f64.acosh();
    let hi = lo + 40.0 / p;
    let pref = ((r - tau) * (r + tau)).powf(-0.5);
    let integrand = |s: f64| {
        let x = s.cosh();
        let a = 0.5 * (x * r + tau);
        let b = 0.5 * (x * r - tau);
        (a * b).powf(-1.0 - 0.5 * p) * (x * r - tau) * (x * r + tau)
    };
    let mut res = run(opts, |n| composite(lo, hi, n, integrand));
    res.value *= pref;
    res.est_error *= pref;
    Ok(res)
}

/// `int_2^inf x^{-p-1} dx`.
pub fn x_tail_bound(p: f64) -> f64 {
    2f64.powf(-p) / p
}

pub const PLUS_RATIOS: [f64; 5] = [1.01, 1.1, 2.0, 10.0, 100.0];
/// `tau / |xi|` on the minus branch, both signs, within a factor 1.01 of
/// the degenerate ends.
pub const MINUS_RATIOS: [f64; 7] = [-1.0 / 1.01, -0.9, -0.5, 0.0, 0.5, 0.9, 1.0 / 1.01];
pub const MAGNITUDES: [f64; 3] = [0.1, 1.0, 10.0];
pub const P_GRID: [f64; 5] = [1.05, 1.1, 4.0 / 3.0, 1.5, 2.0];

/// Direction of `xi` used by the sweeps.
pub const SWEEP_DIRECTION: f64 = 0.3;

/// Probes on the product grid `ratios x magnitudes x ps`, with
/// `tau = ratio |xi|`.
pub fn sweep_probes(ratios: &[f64], magnitudes: &[f64], ps: &[f64]) -> Result<Vec<ConeProbe>> {
    let mut out = Vec::new();
    for &p in ps {
        for &m in magnitudes {
            for &k in ratios {
                let xi = rotate([m, 0.0], SWEEP_DIRECTION);
                out.push(ConeProbe::new(k * m, xi, p)?);
            }
        }
    }
    Ok(out)
}

/// One evaluated probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeRow {
    pub branch: Sign,
    pub probe: ConeProbe,
    /// `I` or `J`.
    pub value: f64,
    /// Minus branch only (`NaN` on the plus cone).
    pub j1: f64,
    pub j2: f64,
    /// Plus: the comparison with the closed form of the bare `I`
    /// integral; minus: `J1` against its closed form.
    pub closed_form_ratio: f64,
    pub j2_bound_ratio: f64,
    pub bracket_ratio: f64,
    pub split_defect: f64,
    pub points: usize,
    pub est_error: f64,
    pub converged: bool,
}

pub fn evaluate(branch: Sign, probe: &ConeProbe, opts: &QuadratureOptions) -> Result<ConeRow> {
    match branch {
        Sign::Plus => {
            let v = i_value(probe, opts)?;
            Ok(ConeRow {
                branch,
                probe: *probe,
                value: v.value,
                j1: f64::NAN,
                j2: f64::NAN,
                closed_form_ratio: v.closed_form_ratio,
                j2_bound_ratio: f64::NAN,
                bracket_ratio: f64::NAN,
                split_defect: f64::NAN,
                points: v.integral.quadrature_points,
                est_error: v.integral.est_error,
                converged: v.integral.converged,
            })
        }
        Sign::Minus => {
            let v = j_value(probe, opts)?;
            let all = v.integral.combine(v.integral_j1).combine(v.integral_j2);
            Ok(ConeRow {
                branch,
                probe: *probe,
                value: v.value,
                j1: v.j1,
                j2: v.j2,
                closed_form_ratio: v.j1_closed_form_ratio(),
                j2_bound_ratio: v.j2_bound_ratio,
                bracket_ratio: v.bracket_ratio,
                split_defect: v.split_defect,
                points: all.quadrature_points,
                est_error: v.integral.est_error,
                converged: all.converged,
            })
        }
    }
}

/// Rows of a sweep and the maximum kernel value (`C_I` or `C_J`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSweep {
    pub branch: Sign,
    pub rows: Vec<ConeRow>,
    pub max_value: f64,
}

impl ConeSweep {
    pub const CSV_HEADER: &'static str = "branch,tau,xi1,xi2,p,value,j1,j2,closed_form_ratio,\
j2_bound_ratio,bracket_ratio,split_defect,points,est_error,converged";

    pub fn csv_rows(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.branch,
                    CsvFloat(r.probe.tau),
                    CsvFloat(r.probe.xi[0]),
                    CsvFloat(r.probe.xi[1]),
                    CsvFloat(r.probe.p),
                    CsvFloat(r.value),
                    CsvFloat(r.j1),
                    CsvFloat(r.j2),
                    CsvFloat(r.closed_form_ratio),
                    CsvFloat(r.j2_bound_ratio),
                    CsvFloat(r.bracket_ratio),
                    CsvFloat(r.split_defect),
                    r.points,
                    CsvFloat(r.est_error),
                    r.converged
                )
            })
            .collect();
        let max_split = self
            .rows
            .iter()
            .map(|r| r.split_defect)
            .fold(f64::NAN, f64::max);
        out.push(format!(
            "{},max,,,,{},,,,,,{},,,",
            self.branch,
            CsvFloat(self.max_value),
            CsvFloat(max_split)
        ));
        out
    }
}

/// Evaluates all probes in parallel.
pub fn cone_sweep(
    branch: Sign,
    probes: &[ConeProbe],
    opts: &QuadratureOptions,
) -> Result<ConeSweep> {
    let rows: Vec<ConeRow> = probes
        .par_iter()
        .map(|p| evaluate(branch, p, opts))
        .collect::<Result<_>>()?;
    let max_value = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(ConeSweep {
        branch,
        rows,
        max_value,
    })
}

/// The default sweep of one branch.
pub fn default_sweep(branch: Sign, opts: &QuadratureOptions) -> Result<ConeSweep> {
    let ratios: &[f64] = match branch {
        Sign::Plus => &PLUS_RATIOS,
        Sign::Minus => &MINUS_RATIOS,
    };
    cone_sweep(branch, &sweep_probes(ratios, &MAGNITUDES, &P_GRID)?, opts)
}
