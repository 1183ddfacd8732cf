//! Discrete Fourier–Lebesgue norms `H^s_p` (hat) and `X^{s,b}_{p,+-}`,
//! plus the checks built on them and a direct probe of the null-form
//! bilinear estimate on sparse space-time Fourier data.
//!
//! Conventions: spatial transforms approximate
//! `(2 pi)^{-1} int f(x) e^{-i x.xi} dx`, time transforms
//! `(2 pi)^{-1/2} int u(t) e^{-i t tau} dt`; `L^{p'}` norms are Riemann
//! sums with the frequency cell as weight, so that `p = 2, s = 0`
//! reproduces the `dx`-weighted `L^2` norm exactly.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::gauge::rescaled_grid;
use crate::null_geometry::angle_or_zero;
use crate::quadrature::{adaptive_doubling, composite};
use crate::spectral::{GridSpec, MatrixField, Sign, Spectral};
use crate::CsvFloat;

/// `<x> = (1 + x^2)^(1/2)`.
pub fn japanese(x: f64) -> f64 {
    x.hypot(1.0)
}

/// Exponents of the function spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub p: f64,
    pub pprime: f64,
    pub s: f64,
    pub b: f64,
    /// `(1 - 1/p) / 2`, so that `1/p = 1 - 2 eps`.
    pub eps: f64,
}

impl NormParams {
    pub fn new(p: f64, s: f64, b: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            p,
            pprime: conjugate(p),
            s,
            b,
            eps: 0.5 * (1.0 - 1.0 / p),
        })
    }

    /// `1/p = 1 - 2 eps`, `s = 1/p`, `b = 1/p + eps` for `0 < eps <= 1/4`.
    pub fn estimate(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.25) {
            return invalid(format!("eps = {eps} must lie in (0, 1/4]"));
        }
        let inv_p = 1.0 - 2.0 * eps;
        let p = 1.0 / inv_p;
        Ok(Self {
            p,
            pprime: conjugate(p),
            s: inv_p,
            b: inv_p + eps,
            eps,
        })
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return invalid(format!("p = {p} must lie in (1, 2]"));
    }
    Ok(())
}

/// Streaming `(sum_i x_i^q)^(1/q)` with rescaling against overflow.
#[derive(Debug, Clone, Copy)]
struct LpSum {
    q: f64,
    scale: f64,
    sum: f64,
}

impl LpSum {
    fn new(q: f64) -> Self {
        Self {
            q,
            scale: 0.0,
            sum: 0.0,
        }
    }

    /// Adds `weight * x^q` with `x >= 0`, `weight > 0`.
    fn add(&mut self, x: f64, weight: f64) {
        let x = x * weight.powf(1.0 / self.q);
        if x == 0.0 {
            return;
        }
        if x > self.scale {
            self.sum = self.sum * (self.scale / x).powf(self.q) + 1.0;
            self.scale = x;
        } else {
            self.sum += (x / self.scale).powf(self.q);
        }
    }

    fn value(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.sum.powf(1.0 / self.q)
        }
    }
}

/// Spatial frequency weight: `<xi>^s` or the homogeneous `|xi|^s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Inhomogeneous,
    Homogeneous,
}

impl Weight {
    fn eval(self, r: f64, s: f64) -> f64 {
        match self {
            Weight::Inhomogeneous => japanese(r).powf(s),
            Weight::Homogeneous if r == 0.0 => {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Weight::Homogeneous => r.powf(s),
        }
    }
}

/// Norm from unitary Fourier coefficients; several fields are combined
/// with the Frobenius norm at each mode.
pub fn hsp_norm_hat(
    grid: &GridSpec,
    fields_hat: &[&MatrixField],
    s: f64,
    p: f64,
    weight: Weight,
) -> Result<f64> {
    check_p(p)?;
    let q = conjugate(p);
    let cs = grid.continuum_scale();
    let cell = grid.frequency_cell();
    let mut acc = LpSum::new(q);
    for m in 0..grid.points() {
        let mut mag2 = 0.0;
        for f in fields_hat {
            for e in f.entries() {
                mag2 += e[m].norm_sqr();
            }
        }
        if mag2 == 0.0 {
            continue;
        }
        let xi = grid.xi(m);
        let w = weight.eval(xi[0].hypot(xi[1]), s);
        acc.add(w * mag2.sqrt() * cs, cell);
    }
    Ok(acc.value())
}

/// `||<xi>^s f_hat||_{L^{p'}}` of physical-space fields.
pub fn hsp_norm(sp: &Spectral, fields: &[&MatrixField], s: f64, p: f64) -> Result<f64> {
    hsp_norm_weighted(sp, fields, s, p, Weight::Inhomogeneous)
}

pub fn hsp_norm_weighted(
    sp: &Spectral,
    fields: &[&MatrixField],
    s: f64,
    p: f64,
    weight: Weight,
) -> Result<f64> {
    let hats: Vec<MatrixField> = fields
        .iter()
        .map(|f| sp.forward(f))
        .collect::<Result<_>>()?;
    let refs: Vec<&MatrixField> = hats.iter().collect();
    hsp_norm_hat(sp.grid(), &refs, s, p, weight)
}

/// Homogeneous-weight scaling exponent: `log2` of the norm ratio under
/// `f -> lambda f(lambda x)`, divided by `log2 lambda`.
pub fn scaling_check(
    sp: &Spectral,
    fields: &[&MatrixField],
    lambda: f64,
    s: f64,
    p: f64,
) -> Result<f64> {
    let grid2 = rescaled_grid(sp.grid(), lambda)?;
    if lambda == 1.0 {
        return Err(Error::InvalidArgument(
            "lambda = 1 gives no exponent".into(),
        ));
    }
    let hats: Vec<MatrixField> = fields
        .iter()
        .map(|f| sp.forward(f))
        .collect::<Result<_>>()?;
    let scaled: Vec<MatrixField> = hats.iter().map(|h| h.scale(lambda)).collect();
    let n1 = hsp_norm_hat(
        sp.grid(),
        &hats.iter().collect::<Vec<_>>(),
        s,
        p,
        Weight::Homogeneous,
    )?;
    let n2 = hsp_norm_hat(
        &grid2,
        &scaled.iter().collect::<Vec<_>>(),
        s,
        p,
        Weight::Homogeneous,
    )?;
    if n1 == 0.0 {
        return Err(Error::DegenerateInput(
            "field has zero homogeneous norm".into(),
        ));
    }
    Ok((n2 / n1).log2() / lambda.log2())
}

/// The exponent `s + 1 - 2/p` predicted for [`scaling_check`].
pub fn scaling_exponent(s: f64, p: f64) -> f64 {
    s + 1.0 - 2.0 / p
}

/// Time cutoff `rho_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowProfile {
    /// `exp(-t^2 / (2 T^2))`.
    Gaussian { t: f64 },
    /// Smooth, equal to 1 on `|t| <= T` and 0 on `|t| >= 2T`.
    Bump { t: f64 },
}

fn smooth_step(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (f(x), f(1.0 - x));
    a / (a + b)
}

impl WindowProfile {
    pub fn width(&self) -> f64 {
        match *self {
            WindowProfile::Gaussian { t } | WindowProfile::Bump { t } => t,
        }
    }

    pub fn eval(&self, time: f64) -> f64 {
        match *self {
            WindowProfile::Gaussian { t } => (-0.5 * (time / t).powi(2)).exp(),
            WindowProfile::Bump { t } => {
                let a = time.abs() / t;
                if a <= 1.0 {
                    1.0
                } else if a >= 2.0 {
                    0.0
                } else {
                    smooth_step(2.0 - a)
                }
            }
        }
    }

    /// `(2 pi)^{-1/2} int rho(t) e^{-i t sigma} dt` (real, since `rho` is
    /// even).
    pub fn hat(&self, sigma: f64) -> f64 {
        match *self {
            WindowProfile::Gaussian { t } => t * (-0.5 * (sigma * t).powi(2)).exp(),
            WindowProfile::Bump { t } => {
                let core = (sigma * t).sin() / sigma;
                let core = if sigma == 0.0 { t } else { core };
                let tail = composite(t, 2.0 * t, 256, |x| self.eval(x) * (sigma * x).cos());
                2.0 * (core + tail) / (2.0 * PI).sqrt()
            }
        }
    }

    /// `||rho||_{H^b_p}` (hat) on the line, by quadrature of [`hat`](Self::hat).
    pub fn hbp_norm(&self, b: f64, p: f64) -> Result<f64> {
        check_p(p)?;
        let q = conjugate(p);
        let t = self.width();
        let integrand = |sg: f64| japanese(sg).powf(b * q) * self.hat(sg).abs().powf(q);
        let upper = match self {
            WindowProfile::Gaussian { .. } => 12.0 / (t * q.sqrt()),
            WindowProfile::Bump { .. } => 400.0 / t,
        };
        let start = match self {
            WindowProfile::Gaussian { .. } => 256,
            WindowProfile::Bump { .. } => 8192,
        };
        let r = adaptive_doubling(start, 1 << 20, 1e-12, |n| {
            2.0 * composite(0.0, upper, n, integrand)
        });
        Ok(r.value.powf(1.0 / q))
    }
}

/// Uniform time samples on `[-T_w, T_w)`, zero-padded by `padding`
/// before the time transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub half_width: f64,
    pub samples: usize,
    pub padding: usize,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self {
            half_width: 2.0,
            samples: 256,
            padding: 8,
        }
    }
}

impl TimeWindow {
    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / self.samples as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|j| self.time(j)).collect()
    }

    /// Spacing of the transformed time frequencies.
    pub fn d_tau(&self) -> f64 {
        2.0 * PI / (self.padding as f64 * 2.0 * self.half_width)
    }
}

/// Physical-space fields sampled at the times of a window. Every slice
/// holds the same number of components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSample {
    pub grid: GridSpec,
    pub window: TimeWindow,
    pub slices: Vec<Vec<MatrixField>>,
}

impl SpaceTimeSample {
    pub fn new(grid: GridSpec, window: TimeWindow, slices: Vec<Vec<MatrixField>>) -> Result<Self> {
        if slices.len() != window.samples {
            return invalid(format!(
                "{} time slices for a window of {} samples",
                slices.len(),
                window.samples
            ));
        }
        let comps = slices.first().map_or(0, Vec::len);
        for sl in &slices {
            if sl.len() != comps || sl.iter().any(|f| f.npts() != grid.points()) {
                return invalid("inconsistent time slices");
            }
        }
        Ok(Self {
            grid,
            window,
            slices,
        })
    }

    pub fn zeros(grid: GridSpec, window: TimeWindow, dim: usize, comps: usize) -> Self {
        let z = MatrixField::zeros(dim, grid.points());
        Self {
            grid,
            window,
            slices: vec![vec![z; comps]; window.samples],
        }
    }

    /// `rho(t) W_sign(t) f` with `W_+-(t) = exp(+-i t |D|)`.
    pub fn free_wave(
        sp: &Spectral,
        window: TimeWindow,
        profile: WindowProfile,
        fields: &[&MatrixField],
        sign: Sign,
    ) -> Result<Self> {
        let hats: Vec<MatrixField> = fields
            .iter()
            .map(|f| sp.forward(f))
            .collect::<Result<_>>()?;
        let np = sp.grid().points();
        let mut slices = Vec::with_capacity(window.samples);
        for t in window.times() {
            let rho = profile.eval(t);
            let mut sl = Vec::with_capacity(hats.len());
            for h in &hats {
                let mut g = h.clone();
                let ph: Vec<Complex64> = (0..np)
                    .map(|m| Complex64::from_polar(rho, sign.value() * t * sp.abs_xi(m)))
                    .collect();
                for e in g.entries_mut() {
                    for (z, f) in e.iter_mut().zip(&ph) {
                        *z *= f;
                    }
                }
                sl.push(sp.inverse(&g)?);
            }
            slices.push(sl);
        }
        Self::new(*sp.grid(), window, slices)
    }

    fn components(&self) -> usize {
        self.slices.first().map_or(0, Vec::len)
    }

    fn dim(&self) -> usize {
        self.slices
            .first()
            .and_then(|s| s.first())
            .map_or(0, MatrixField::dim)
    }
}

/// `||<xi>^s <-tau + h(xi)>^b u~||_{L^{p'}_{tau xi}}` with `h = sign |xi|`.
pub fn xsb_norm(
    sp: &Spectral,
    u: &SpaceTimeSample,
    params: &NormParams,
    sign: Sign,
) -> Result<f64> {
    if sp.grid() != &u.grid {
        return invalid("sample and spectral context use different grids");
    }
    check_p(params.p)?;
    let q = params.pprime;
    let g = u.grid;
    let np = g.points();
    let w = u.window;
    let nt = w.samples;
    let big = nt * w.padding;
    let (comps, dim) = (u.components(), u.dim());
    let series = comps * dim * dim;
    if series == 0 {
        return Ok(0.0);
    }
    // hats[(j * series + k) * np + m]: unitary spatial coefficient of
    // series k at time j and mode m.
    let mut hats = vec![Complex64::new(0.0, 0.0); nt * series * np];
    for (j, sl) in u.slices.iter().enumerate() {
        for (c, f) in sl.iter().enumerate() {
            let h = sp.forward(f)?;
            for (e, data) in h.entries().enumerate() {
                let k = c * dim * dim + e;
                hats[(j * series + k) * np..(j * series + k + 1) * np].copy_from_slice(data);
            }
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(big);
    let mut buf = vec![Complex64::new(0.0, 0.0); big];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0; big];
    let scale = g.continuum_scale() * w.dt() / (2.0 * PI).sqrt();
    let dtau = w.d_tau();
    let mut acc = LpSum::new(q);
    for m in 0..np {
        power.iter_mut().for_each(|x| *x = 0.0);
        let mut any = false;
        for k in 0..series {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for j in 0..nt {
                buf[j] = hats[(j * series + k) * np + m];
            }
            if buf[..nt].iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            any = true;
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (pw, z) in power.iter_mut().zip(&buf) {
                *pw += z.norm_sqr();
            }
        }
        if !any {
            continue;
        }
        let xi = sp.abs_xi(m);
        let ws = japanese(xi).powf(params.s);
        let h = sign.value() * xi;
        for (idx, pw) in power.iter().enumerate() {
            let tau = crate::spectral::signed_index(idx, big) as f64 * dtau;
            let wb = japanese(h - tau).powf(params.b);
            acc.add(ws * wb * pw.sqrt() * scale, g.frequency_cell() * dtau);
        }
    }
    Ok(acc.value())
}

/// Both sides of `||rho W f||_X = ||rho||_{H^b_p} ||f||_{H^s_p}`: the left
/// through [`xsb_norm`] on a sampled free wave, the right from
/// [`WindowProfile::hbp_norm`] and [`hsp_norm`].
pub fn homogeneous_factorization_check(
    sp: &Spectral,
    fields: &[&MatrixField],
    profile: WindowProfile,
    params: &NormParams,
    sign: Sign,
    window: TimeWindow,
) -> Result<(f64, f64)> {
    let u = SpaceTimeSample::free_wave(sp, window, profile, fields, sign)?;
    let lhs = xsb_norm(sp, &u, params, sign)?;
    let rhs = profile.hbp_norm(params.b, params.p)? * hsp_norm(sp, fields, params.s, params.p)?;
    Ok((lhs, rhs))
}

/// `(2 pi)^{-1/2} (int <sigma>^{-pb} d sigma)^{1/p}`, the constant of the
/// embedding into `C(R; H^s_p)` for the transform conventions used here.
pub fn embedding_constant(b: f64, p: f64) -> Result<f64> {
    Ok(embedding_integral(b, p)?.powf(1.0 / p) / (2.0 * PI).sqrt())
}

/// `int_R <sigma>^{-pb} d sigma` via `sigma = sinh x` with an exact
/// exponential tail.
pub fn embedding_integral(b: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let a = p * b;
    if a <= 1.0 {
        return invalid(format!("b p = {a} must exceed 1"));
    }
    let cut = 40.0;
    let body = composite(0.0, cut, 4096, |x| x.cosh().powf(1.0 - a));
    let tail = 2f64.powf(a - 1.0) * (-(a - 1.0) * cut).exp() / (a - 1.0);
    Ok(2.0 * (body + tail))
}

/// Outcome of [`embedding_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    pub sup_hsp: f64,
    pub xsb: f64,
    pub ratio: f64,
    /// `(int <sigma>^{-pb})^{1/p}`.
    pub c_emb: f64,
    /// Bound valid for the discrete sums: the Riemann sum of
    /// `<sigma>^{-pb}` exceeds the integral by at most one cell.
    pub c_emb_discrete: f64,
}

/// `sup_t ||u(t)||_{H^s_p} / ||u||_{X^{s,b}_{p,sign}}` at the window
/// sample times.
pub fn embedding_check(
    sp: &Spectral,
    u: &SpaceTimeSample,
    params: &NormParams,
    sign: Sign,
) -> Result<EmbeddingCheck> {
    let integral = embedding_integral(params.b, params.p)?;
    let c_emb = integral.powf(1.0 / params.p);
    let c_emb_discrete = (integral + u.window.d_tau()).powf(1.0 / params.p) / (2.0 * PI).sqrt();
    let mut sup: f64 = 0.0;
    for sl in &u.slices {
        let refs: Vec<&MatrixField> = sl.iter().collect();
        sup = sup.max(hsp_norm(sp, &refs, params.s, params.p)?);
    }
    let xsb = xsb_norm(sp, u, params, sign)?;
    let ratio = if xsb == 0.0 { 0.0 } else { sup / xsb };
    Ok(EmbeddingCheck {
        sup_hsp: sup,
        xsb,
        ratio,
        c_emb,
        c_emb_discrete,
    })
}

/// Space-time frequency lattice `(tau, xi) = (d_tau k0, d_xi k1, d_xi k2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub d_tau: f64,
    pub d_xi: f64,
}

impl Lattice {
    pub fn cell(&self) -> f64 {
        self.d_tau * self.d_xi * self.d_xi
    }

    pub fn tau(&self, k: [i64; 3]) -> f64 {
        k[0] as f64 * self.d_tau
    }

    pub fn xi(&self, k: [i64; 3]) -> [f64; 2] {
        [k[1] as f64 * self.d_xi, k[2] as f64 * self.d_xi]
    }
}

/// Nonnegative space-time Fourier data on finitely many lattice points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSpectrum {
    pub points: Vec<([i64; 3], f64)>,
}

/// Cap on the number of active lattice points per factor.
pub const MAX_ACTIVE_MODES: usize = 4096;

impl SparseSpectrum {
    pub fn new(points: Vec<([i64; 3], f64)>) -> Result<Self> {
        if points.len() > MAX_ACTIVE_MODES {
            return invalid(format!(
                "{} active modes exceed the cap {MAX_ACTIVE_MODES}",
                points.len()
            ));
        }
        if points.iter().any(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return invalid("spectral values must be finite and nonnegative");
        }
        Ok(Self { points })
    }

    /// `count` random points with `|k1|, |k2| <= band`, each placed within
    /// `spread` lattice steps of the cone `tau = sign |xi|`, with
    /// exponentially distributed values.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        lattice: &Lattice,
        count: usize,
        band: i64,
        spread: i64,
        sign: Sign,
    ) -> Result<Self> {
        let mut map: HashMap<[i64; 3], f64> = HashMap::new();
        let mut order = Vec::new();
        while order.len() < count.min(MAX_ACTIVE_MODES) {
            let k1 = rng.random_range(-band..=band);
            let k2 = rng.random_range(-band..=band);
            let xi = lattice.xi([0, k1, k2]);
            let cone = sign.value() * xi[0].hypot(xi[1]) / lattice.d_tau;
            let k0 = cone.round() as i64 + rng.random_range(-spread..=spread);
            let key = [k0, k1, k2];
            let v = -(1.0 - rng.random::<f64>()).ln();
            if map.insert(key, v).is_none() {
                order.push(key);
            }
        }
        Self::new(order.into_iter().map(|k| (k, map[&k])).collect())
    }

    /// `||<xi>^s <-tau + sign|xi|>^b u~||_{L^{p'}}` on the lattice.
    pub fn xsb_norm(&self, lattice: &Lattice, s: f64, b: f64, p: f64, sign: Sign) -> f64 {
        let mut acc = LpSum::new(conjugate(p));
        for (k, v) in &self.points {
            let xi = lattice.xi(*k);
            let r = xi[0].hypot(xi[1]);
            let w = japanese(r).powf(s) * japanese(sign.value() * r - lattice.tau(*k)).powf(b);
            acc.add(w * v, lattice.cell());
        }
        acc.value()
    }
}

/// Kernel of the probe convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeKernel {
    /// `theta(eta, +-(xi - eta))`, taken as 0 when either vector vanishes.
    Angle,
    /// A constant kernel.
    Constant(f64),
}

/// `Q~(tau, xi) = sum theta(eta, sign (xi - eta)) phi~(lambda, eta)
/// psi~(tau - lambda, xi - eta) * cell` by direct double summation.
pub fn null_form_convolution(
    phi: &SparseSpectrum,
    psi: &SparseSpectrum,
    lattice: &Lattice,
    sign: Sign,
    kernel: ProbeKernel,
) -> HashMap<[i64; 3], f64> {
    let mut out: HashMap<[i64; 3], f64> = HashMap::new();
    let cell = lattice.cell();
    for (ka, va) in &phi.points {
        let eta = lattice.xi(*ka);
        for (kb, vb) in &psi.points {
            let zeta = lattice.xi(*kb);
            let w = match kernel {
                ProbeKernel::Angle => {
                    angle_or_zero(eta, [sign.value() * zeta[0], sign.value() * zeta[1]])
                }
                ProbeKernel::Constant(c) => c,
            };
            let key = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
            *out.entry(key).or_insert(0.0) += w * va * vb * cell;
        }
    }
    out
}

/// Left side, right side and ratio of the key bilinear estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `||Q_sign(phi, psi)||_{X^{1/p,0}_p} / (||phi||_{X^{s,b}_{p,+}}
/// ||psi||_{X^{s,b}_{p,sign}})` with `s = 1/p`, `b = 1/p + eps`.
pub fn key_bilinear_probe(
    phi: &SparseSpectrum,
    psi: &SparseSpectrum,
    lattice: &Lattice,
    params: &NormParams,
    sign: Sign,
) -> ProbeResult {
    key_bilinear_probe_with(phi, psi, lattice, params, sign, ProbeKernel::Angle)
}

pub fn key_bilinear_probe_with(
    phi: &SparseSpectrum,
    psi: &SparseSpectrum,
    lattice: &Lattice,
    params: &NormParams,
    sign: Sign,
    kernel: ProbeKernel,
) -> ProbeResult {
    let q = null_form_convolution(phi, psi, lattice, sign, kernel);
    let mut keys: Vec<&[i64; 3]> = q.keys().collect();
    keys.sort_unstable();
    let mut acc = LpSum::new(params.pprime);
    for k in keys {
        let xi = lattice.xi(*k);
        acc.add(
            japanese(xi[0].hypot(xi[1])).powf(1.0 / params.p) * q[k],
            lattice.cell(),
        );
    }
    let lhs = acc.value();
    let s = 1.0 / params.p;
    let b = s + params.eps;
    let rhs = phi.xsb_norm(lattice, s, b, params.p, Sign::Plus)
        * psi.xsb_norm(lattice, s, b, params.p, sign);
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    ProbeResult { lhs, rhs, ratio }
}

/// One row of a probe sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub sample: usize,
    pub sign: Sign,
    pub p: f64,
    pub result: ProbeResult,
}

impl ProbeRow {
    pub const CSV_HEADER: &'static str = "sample,sign,p,lhs,rhs,ratio";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.sample,
            self.sign,
            CsvFloat(self.p),
            CsvFloat(self.result.lhs),
            CsvFloat(self.result.rhs),
            CsvFloat(self.result.ratio)
        )
    }
}

/// Settings of the randomized probe sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSweep {
    pub samples: usize,
    pub modes: usize,
    pub band: i64,
    pub spread: i64,
    pub lattice: Lattice,
}

impl Default for ProbeSweep {
    fn default() -> Self {
        Self {
            samples: 50,
            modes: 48,
            band: 6,
            spread: 2,
            lattice: Lattice {
                d_tau: 0.5,
                d_xi: 0.5,
            },
        }
    }
}

/// Seeded sweep of [`key_bilinear_probe`] over random sparse data.
pub fn probe_sweep<R: Rng + ?Sized>(
    rng: &mut R,
    settings: &ProbeSweep,
    params: &NormParams,
    sign: Sign,
) -> Result<Vec<ProbeRow>> {
    (0..settings.samples)
        .map(|i| {
            let l = &settings.lattice;
            let phi = SparseSpectrum::random(
                rng,
                l,
                settings.modes,
                settings.band,
                settings.spread,
                Sign::Plus,
            )?;
            let psi = SparseSpectrum::random(
                rng,
                l,
                settings.modes,
                settings.band,
                settings.spread,
                sign,
            )?;
            Ok(ProbeRow {
                sample: i,
                sign,
                p: params.p,
                result: key_bilinear_probe(&phi, &psi, l, params, sign),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::su2_pauli_basis;
    use crate::spectral::random_lie_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(n: usize, l: f64) -> Spectral {
        Spectral::new(GridSpec::new(n, l, 1e-2).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(NormParams::new(1.0, 0.0, 0.0).is_err());
        assert!(NormParams::new(2.5, 0.0, 0.0).is_err());
        let e = NormParams::estimate(0.1).unwrap();
        assert!((1.0 / e.p + 1.0 / e.pprime - 1.0).abs() < 1e-15);
        assert!((1.0 / e.p - 0.8).abs() < 1e-15);
        assert!((e.b - 0.9).abs() < 1e-15 && (e.s - 0.8).abs() < 1e-15);
        assert!(NormParams::estimate(0.3).is_err());
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let s = sp(8, 1.0);
        let z = MatrixField::zeros(2, 64);
        assert_eq!(hsp_norm(&s, &[&z], 1.0, 1.5).unwrap(), 0.0);
        assert!(hsp_norm(&s, &[&z], 1.0, 0.9).is_err());
    }

    /// One mode with continuum amplitude |a|: the sum has one term.
    #[test]
    fn single_mode_value() {
        let s = sp(16, 3.0);
        let g = *s.grid();
        let m = g.mode_index(2, 1).unwrap();
        let mut hat = MatrixField::zeros(2, g.points());
        hat.entry_mut(0, 1)[m] = Complex64::new(0.3, -0.4);
        let f = s.inverse(&hat).unwrap();
        let p = 4.0 / 3.0;
        let a = 0.5 * g.continuum_scale();
        let expect = a * g.frequency_cell().powf(1.0 / conjugate(p));
        let got = hsp_norm(&s, &[&f], 0.0, p).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn parseval_at_p_two() {
        let s = sp(32, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_lie_field(&s, 2, 5, 1.0, &mut rng);
        let g = random_lie_field(&s, 2, 5, 1.0, &mut rng);
        let l2 = (f.l2().powi(2) + g.l2().powi(2)).sqrt() * s.grid().dx();
        let n = hsp_norm(&s, &[&f, &g], 0.0, 2.0).unwrap();
        assert!((n - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn scaling_exponents() {
        let s = sp(32, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_lie_field(&s, 2, 6, 1.0, &mut rng);
        for (p, sv) in [(2.0, 1.0), (4.0 / 3.0, 0.75), (8.0 / 7.0, 0.875)] {
            for lam in [2.0, 4.0, 0.5] {
                let e = scaling_check(&s, &[&f], lam, sv, p).unwrap();
                assert!(
                    (e - scaling_exponent(sv, p)).abs() < 1e-10,
                    "{p} {sv} {lam}: {e}"
                );
            }
        }
        assert_eq!(scaling_exponent(1.0, 2.0), 1.0);
        assert!((scaling_exponent(0.75, 4.0 / 3.0) - 0.25).abs() < 1e-15);
        assert!(matches!(
            scaling_check(&s, &[&f], 3.0, 1.0, 2.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn window_hats_are_consistent() {
        // Quadrature transform of the Gaussian against its closed form.
        let g = WindowProfile::Gaussian { t: 0.2 };
        for sg in [0.0, 3.0, 10.0] {
            let num =
                2.0 * composite(0.0, 3.0, 512, |x| g.eval(x) * (sg * x).cos()) / (2.0 * PI).sqrt();
            assert!((num - g.hat(sg)).abs() < 1e-12);
        }
        let b = WindowProfile::Bump { t: 0.3 };
        assert_eq!(b.eval(0.2), 1.0);
        assert_eq!(b.eval(0.7), 0.0);
        let num = 2.0 * composite(0.0, 0.6, 2048, |x| b.eval(x)) / (2.0 * PI).sqrt();
        assert!((num - b.hat(0.0)).abs() < 1e-10);
    }

    #[test]
    fn factorization_gaussian_and_bump() {
        let s = sp(16, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_lie_field(&s, 2, 3, 1.0, &mut rng);
        let params = NormParams::new(1.5, 0.6, 0.8).unwrap();
        for sign in Sign::BOTH {
            let (l, r) = homogeneous_factorization_check(
                &s,
                &[&f],
                WindowProfile::Gaussian { t: 0.25 },
                &params,
                sign,
                TimeWindow::default(),
            )
            .unwrap();
            assert!((l - r).abs() < 1e-6 * r, "{l} {r}");
        }
        let (l, r) = homogeneous_factorization_check(
            &s,
            &[&f],
            WindowProfile::Bump { t: 0.5 },
            &params,
            Sign::Plus,
            TimeWindow::default(),
        )
        .unwrap();
        assert!((l - r).abs() < 1e-4 * r, "{l} {r}");
    }

    #[test]
    fn xsb_monotone_in_b_and_zero() {
        let s = sp(8, 2.0 * PI);
        let [e1, _, _] = su2_pauli_basis();
        let g = *s.grid();
        let f = MatrixField::from_fn(2, g.points(), |p| e1.scale(g.x(p)[0].sin()));
        let w = TimeWindow {
            samples: 64,
            ..TimeWindow::default()
        };
        let u = SpaceTimeSample::free_wave(
            &s,
            w,
            WindowProfile::Gaussian { t: 0.3 },
            &[&f],
            Sign::Minus,
        )
        .unwrap();
        let n =
            |b: f64| xsb_norm(&s, &u, &NormParams::new(1.6, 0.5, b).unwrap(), Sign::Minus).unwrap();
        assert!(n(0.2) <= n(0.5) && n(0.5) <= n(0.9));
        let z = SpaceTimeSample::zeros(g, w, 2, 1);
        assert_eq!(
            xsb_norm(&s, &z, &NormParams::new(1.6, 0.5, 0.5).unwrap(), Sign::Plus).unwrap(),
            0.0
        );
    }

    #[test]
    fn embedding_constant_closed_forms() {
        // int (1 + s^2)^{-1} = pi.
        let i = embedding_integral(1.0, 2.0).unwrap();
        assert!((i - PI).abs() < 1e-10);
        // int (1 + s^2)^{-3/2} = 2.
        let i = embedding_integral(1.5, 2.0).unwrap();
        assert!((i - 2.0).abs() < 1e-10);
        assert!(embedding_integral(0.5, 2.0).is_err());
    }

    #[test]
    fn embedding_ratio_bounded() {
        let s = sp(8, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_lie_field(&s, 2, 2, 1.0, &mut rng);
        let params = NormParams::new(1.5, 0.5, 0.9).unwrap();
        let w = TimeWindow {
            samples: 64,
            ..TimeWindow::default()
        };
        let u = SpaceTimeSample::free_wave(
            &s,
            w,
            WindowProfile::Gaussian { t: 0.3 },
            &[&f],
            Sign::Plus,
        )
        .unwrap();
        let e = embedding_check(&s, &u, &params, Sign::Plus).unwrap();
        assert!(e.ratio > 0.0 && e.ratio <= e.c_emb_discrete && e.c_emb_discrete <= e.c_emb);
        let bad = NormParams::new(1.5, 0.5, 0.6).unwrap();
        assert!(embedding_check(&s, &u, &bad, Sign::Plus).is_err());
        let z = SpaceTimeSample::zeros(*s.grid(), w, 2, 1);
        assert_eq!(
            embedding_check(&s, &z, &params, Sign::Plus).unwrap().ratio,
            0.0
        );
    }

    #[test]
    fn probe_single_point_mass() {
        let lat = Lattice {
            d_tau: 0.5,
            d_xi: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = SparseSpectrum::random(&mut rng, &lat, 20, 4, 1, Sign::Plus).unwrap();
        let psi = SparseSpectrum::new(vec![([1, 2, -1], 2.0)]).unwrap();
        let q = null_form_convolution(&phi, &psi, &lat, Sign::Minus, ProbeKernel::Angle);
        let zeta = lat.xi([1, 2, -1]);
        for (k, v) in &phi.points {
            let key = [k[0] + 1, k[1] + 2, k[2] - 1];
            let th = angle_or_zero(lat.xi(*k), [-zeta[0], -zeta[1]]);
            assert!((q[&key] - th * v * 2.0 * lat.cell()).abs() < 1e-14);
        }
    }

    #[test]
    fn probe_collinear_vanishes_and_is_dominated() {
        let lat = Lattice {
            d_tau: 0.5,
            d_xi: 0.5,
        };
        let along = |ks: &[(i64, i64)]| {
            SparseSpectrum::new(ks.iter().map(|&(k0, k1)| ([k0, k1, 0], 1.0)).collect()).unwrap()
        };
        let phi = along(&[(1, 1), (2, 3), (4, 4)]);
        let psi = along(&[(1, 2), (3, 5)]);
        let params = NormParams::estimate(0.1).unwrap();
        let r = key_bilinear_probe(&phi, &psi, &lat, &params, Sign::Plus);
        assert_eq!(r.lhs, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for sign in Sign::BOTH {
            let phi = SparseSpectrum::random(&mut rng, &lat, 30, 5, 2, Sign::Plus).unwrap();
            let psi = SparseSpectrum::random(&mut rng, &lat, 30, 5, 2, sign).unwrap();
            let a = key_bilinear_probe(&phi, &psi, &lat, &params, sign);
            let c =
                key_bilinear_probe_with(&phi, &psi, &lat, &params, sign, ProbeKernel::Constant(PI));
            assert!(a.lhs < c.lhs && a.rhs == c.rhs);
        }
    }

    #[test]
    fn probe_sweep_is_deterministic() {
        let params = NormParams::estimate(0.1).unwrap();
        let st = ProbeSweep {
            samples: 5,
            ..ProbeSweep::default()
        };
        let a = probe_sweep(&mut ChaCha8Rng::seed_from_u64(7), &st, &params, Sign::Minus).unwrap();
        let b = probe_sweep(&mut ChaCha8Rng::seed_from_u64(7), &st, &params, Sign::Minus).unwrap();
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|r| r.result.ratio.is_finite() && r.result.ratio > 0.0));
    }
}
