//! The `(u, v)` variables, the quadratic nonlinearity `N(u, v)`, the
//! projected half-wave system and its time integration.
//!
//! With `u = (A0 + A1, phi + A2)` and `v = (A0 - A1, phi - A2)` the
//! evolution equations read
//!
//! ```text
//! d_t u = alpha . grad u + N(u, v),   d_t v = -alpha . grad v + N(v, u)
//! N(u, v) = ( (u.v - v.u) / 2, [u2, u1] )
//! ```
//!
//! and in Fourier space `P_+-(xi)` splits them into scalar half-wave
//! equations: `u_+-` rotates with `exp(+-i t |xi|)` and `v_+-` with
//! `exp(-+i t |xi|)`. States are stored as unitary Fourier coefficients.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::gauge::{MonopoleConfig, TimeDerivatives};
use crate::snapshot;
use crate::spectral::{
    alpha_dot, projection_matrix, GridSpec, Mat2, MatrixField, Sign, Spectral, SpectralPair,
};

/// Fourier-space state of the projected system.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    pub u_plus: SpectralPair,
    pub u_minus: SpectralPair,
    pub v_plus: SpectralPair,
    pub v_minus: SpectralPair,
    pub time: f64,
}

/// Saved states at uniform spacing `dt` (which may be negative for
/// backward runs).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub dt: f64,
    pub states: Vec<DiagonalState>,
}

/// Result of [`DiagonalSystem::picard_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub trajectory: Trajectory,
    /// `max_t ||u^(m+1)(t) - u^(m)(t)||` (all four slots) for each
    /// iteration performed.
    pub increments: Vec<f64>,
}

/// Which variable a slot belongs to and its projection sign.
const SLOTS: [(bool, Sign); 4] = [
    (true, Sign::Plus),
    (true, Sign::Minus),
    (false, Sign::Plus),
    (false, Sign::Minus),
];

type Slots = [SpectralPair; 4];

/// `(u, v)` in Fourier space.
type Uv = [SpectralPair; 2];

/// Linear operator in a stage combination.
#[derive(Clone, Copy)]
enum Term<'a> {
    Scalar(f64),
    Matrix(&'a [Vec<Mat2>; 2], f64),
}

impl DiagonalState {
    pub fn zeros(grid: &GridSpec, dim: usize) -> Self {
        let z = SpectralPair::zeros(dim, grid.points());
        Self {
            u_plus: z.clone(),
            u_minus: z.clone(),
            v_plus: z.clone(),
            v_minus: z,
            time: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.u_plus.dim()
    }

    pub fn slots(&self) -> [&SpectralPair; 4] {
        [&self.u_plus, &self.u_minus, &self.v_plus, &self.v_minus]
    }

    fn from_slots(s: Slots, time: f64) -> Self {
        let [u_plus, u_minus, v_plus, v_minus] = s;
        Self {
            u_plus,
            u_minus,
            v_plus,
            v_minus,
            time,
        }
    }

    fn to_slots(&self) -> Slots {
        [
            self.u_plus.clone(),
            self.u_minus.clone(),
            self.v_plus.clone(),
            self.v_minus.clone(),
        ]
    }

    /// `u_hat = u_+ + u_-`.
    pub fn u(&self) -> SpectralPair {
        self.u_plus.add(&self.u_minus)
    }

    /// `v_hat = v_+ + v_-`.
    pub fn v(&self) -> SpectralPair {
        self.v_plus.add(&self.v_minus)
    }

    /// Largest deviation of a slot from its own projection, over nonzero
    /// modes. At the zero mode `P_+- = I/2`, so there the check is
    /// `u_+ = u_-` and `v_+ = v_-` instead.
    pub fn projection_defect(&self, sp: &Spectral) -> f64 {
        let mut worst: f64 = 0.0;
        for (slot, (_, sign)) in self.slots().into_iter().zip(SLOTS) {
            let other = slot.apply_symbol(|m| {
                if m == 0 {
                    crate::spectral::Mat2::zero()
                } else {
                    projection_matrix(sign.flip(), sp.xi(m))
                }
            });
            worst = worst.max(other.max_abs());
        }
        for (a, b) in [(&self.u_plus, &self.u_minus), (&self.v_plus, &self.v_minus)] {
            for (ca, cb) in a.components.iter().zip(&b.components) {
                for (ea, eb) in ca.entries().zip(cb.entries()) {
                    worst = worst.max((ea[0] - eb[0]).norm());
                }
            }
        }
        worst
    }

    pub fn l2(&self) -> f64 {
        self.slots()
            .iter()
            .map(|s| s.l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.slots().iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, o: &DiagonalState) -> DiagonalState {
        DiagonalState {
            u_plus: self.u_plus.sub(&o.u_plus),
            u_minus: self.u_minus.sub(&o.u_minus),
            v_plus: self.v_plus.sub(&o.v_plus),
            v_minus: self.v_minus.sub(&o.v_minus),
            time: self.time,
        }
    }

    fn is_finite(&self) -> bool {
        self.slots().iter().all(|s| s.is_finite())
    }
}

/// `(u, v)` in Fourier space.
pub fn to_uv(sp: &Spectral, cfg: &MonopoleConfig) -> Result<(SpectralPair, SpectralPair)> {
    if sp.grid() != &cfg.grid {
        return invalid("spectral context and configuration use different grids");
    }
    let u = SpectralPair::new(cfg.a0.add(&cfg.a1), cfg.phi.add(&cfg.a2));
    let v = SpectralPair::new(cfg.a0.sub(&cfg.a1), cfg.phi.sub(&cfg.a2));
    Ok((sp.forward_pair(&u)?, sp.forward_pair(&v)?))
}

/// `(A0, A1, A2, phi) = (u1 + v1, u1 - v1, u2 - v2, u2 + v2) / 2`.
pub fn from_uv(
    sp: &Spectral,
    u_hat: &SpectralPair,
    v_hat: &SpectralPair,
) -> Result<MonopoleConfig> {
    let u = sp.inverse_pair(u_hat)?;
    let v = sp.inverse_pair(v_hat)?;
    let [u1, u2] = &u.components;
    let [v1, v2] = &v.components;
    MonopoleConfig::new(
        *sp.grid(),
        u1.add(v1).scale(0.5),
        u1.sub(v1).scale(0.5),
        u2.sub(v2).scale(0.5),
        u2.add(v2).scale(0.5),
    )
}

/// `u . v = u1 v1 + u2 v2` with matrix products.
fn dot(u: &SpectralPair, v: &SpectralPair) -> MatrixField {
    u.components[0]
        .matmul(&v.components[0])
        .add(&u.components[1].matmul(&v.components[1]))
}

/// `N(u, v)` evaluated pointwise on physical-space samples, without
/// dealiasing. The second slot is formed as `(beta u) . u`.
pub fn pointwise_nonlinearity(u: &SpectralPair, v: &SpectralPair) -> SpectralPair {
    let first = dot(u, v).sub(&dot(v, u)).scale(0.5);
    let beta_u = SpectralPair::new(u.components[1].clone(), u.components[0].scale(-1.0));
    SpectralPair::new(first, dot(&beta_u, u))
}

fn upper_su2(f: &MatrixField) -> (&[Complex64], &[Complex64]) {
    (f.entry(0, 0), f.entry(0, 1))
}

/// su(2) case of [`nonlinearity_pair`]. Writing `A = [[a, b], [-b*, -a]]`
/// and `B = [[c, d], [-d*, -c]]`, the commutator has entries
/// `[A, B]_00 = d b* - b d*` and `[A, B]_01 = 2 (a d - c b)`, so only the
/// `00` and `01` entries are transformed and multiplied.
fn su2_nonlinearity_pair(
    sp: &Spectral,
    u_hat: &SpectralPair,
    v_hat: &SpectralPair,
    complete: bool,
) -> (SpectralPair, SpectralPair) {
    let phys = |f: &MatrixField| sp.lie_to_dealiased_entries(f, false);
    let [u1, u2] = [&u_hat.components[0], &u_hat.components[1]].map(phys);
    let [v1, v2] = [&v_hat.components[0], &v_hat.components[1]].map(phys);
    let np = u_hat.npts();
    let mut first = MatrixField::zeros(2, np);
    let mut nu2 = MatrixField::zeros(2, np);
    let mut nv2 = MatrixField::zeros(2, np);
    let ((a1, b1), (a2, b2)) = (upper_su2(&u1), upper_su2(&u2));
    let ((c1, d1), (c2, d2)) = (upper_su2(&v1), upper_su2(&v2));
    let diag = |b: Complex64, d: Complex64| d * b.conj() - b * d.conj();
    let off = |a: Complex64, b: Complex64, c: Complex64, d: Complex64| 2.0 * (a * d - c * b);
    {
        let f00 = first.entry_mut(0, 0);
        for p in 0..np {
            f00[p] = 0.5 * (diag(b1[p], d1[p]) + diag(b2[p], d2[p]));
        }
        let f01 = first.entry_mut(0, 1);
        for p in 0..np {
            f01[p] = 0.5 * (off(a1[p], b1[p], c1[p], d1[p]) + off(a2[p], b2[p], c2[p], d2[p]));
        }
    }
    for (out, (a, b), (c, d)) in [
        (&mut nu2, (a2, b2), (a1, b1)),
        (&mut nv2, (c2, d2), (c1, d1)),
    ] {
        let o00 = out.entry_mut(0, 0);
        for p in 0..np {
            o00[p] = diag(b[p], d[p]);
        }
        let o01 = out.entry_mut(0, 1);
        for p in 0..np {
            o01[p] = off(a[p], b[p], c[p], d[p]);
        }
    }
    let from = |g: &MatrixField| sp.lie_from_dealiased_entries(g, complete);
    let first_hat = from(&first);
    (
        SpectralPair::new(first_hat.clone(), from(&nu2)),
        SpectralPair::new(first_hat.scale(-1.0), from(&nv2)),
    )
}

/// Dealiased `N(u, v)` and `N(v, u)` from Fourier coefficients: products
/// are dealiased by the 2/3 rule.
pub fn nonlinearity_pair(
    sp: &Spectral,
    u_hat: &SpectralPair,
    v_hat: &SpectralPair,
) -> (SpectralPair, SpectralPair) {
    if u_hat.dim() == 2 {
        su2_nonlinearity_pair(sp, u_hat, v_hat, true)
    } else {
        generic_nonlinearity_pair(sp, u_hat, v_hat)
    }
}

fn generic_nonlinearity_pair(
    sp: &Spectral,
    u_hat: &SpectralPair,
    v_hat: &SpectralPair,
) -> (SpectralPair, SpectralPair) {
    let [u1, u2] = [&u_hat.components[0], &u_hat.components[1]].map(|f| sp.lie_to_dealiased(f));
    let [v1, v2] = [&v_hat.components[0], &v_hat.components[1]].map(|f| sp.lie_to_dealiased(f));
    let first = u1.bracket(&v1).add(&u2.bracket(&v2)).scale(0.5);
    let first_hat = sp.lie_from_dealiased(&first);
    let nu2 = sp.lie_from_dealiased(&u2.bracket(&u1));
    let nv2 = sp.lie_from_dealiased(&v2.bracket(&v1));
    (
        SpectralPair::new(first_hat.clone(), nu2),
        SpectralPair::new(first_hat.scale(-1.0), nv2),
    )
}

/// Dealiased `N(u, v)` in Fourier space.
pub fn nonlinearity(sp: &Spectral, u_hat: &SpectralPair, v_hat: &SpectralPair) -> SpectralPair {
    nonlinearity_pair(sp, u_hat, v_hat).0
}

/// Spectral context plus the choice of whether the quadratic term is on.
#[derive(Debug, Clone)]
pub struct DiagonalSystem {
    sp: Spectral,
    nonlinear: bool,
    /// `alpha.xi / |xi|` per mode (zero at `xi = 0`).
    unit_symbol: Vec<Mat2>,
    su2_shortcut: bool,
}

impl DiagonalSystem {
    pub fn new(grid: GridSpec) -> Self {
        let sp = Spectral::new(grid);
        let unit_symbol = (0..grid.points())
            .map(|m| {
                let r = sp.abs_xi(m);
                if r == 0.0 {
                    Mat2::zero()
                } else {
                    alpha_dot(sp.xi(m)).scale(1.0 / r)
                }
            })
            .collect();
        Self {
            sp,
            nonlinear: true,
            unit_symbol,
            su2_shortcut: true,
        }
    }

    /// The free flow (`N = 0`).
    pub fn linear(grid: GridSpec) -> Self {
        Self::new(grid).with_nonlinear(false)
    }

    pub fn with_nonlinear(mut self, on: bool) -> Self {
        self.nonlinear = on;
        self
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn grid(&self) -> &GridSpec {
        self.sp.grid()
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    /// Largest admissible `|dt|` for nonlinear runs.
    pub fn stability_bound(&self) -> f64 {
        0.5 * self.grid().dx()
    }

    /// Projects `to_uv(cfg)` onto the four half-wave slots. Nyquist modes
    /// are discarded since they carry no well-defined derivative.
    pub fn state_from_config(&self, cfg: &MonopoleConfig, time: f64) -> Result<DiagonalState> {
        let (u, v) = to_uv(&self.sp, cfg)?;
        self.state_from_uv(&u, &v, time)
    }

    pub fn state_from_uv(
        &self,
        u_hat: &SpectralPair,
        v_hat: &SpectralPair,
        time: f64,
    ) -> Result<DiagonalState> {
        let g = *self.grid();
        let strip = |f: &SpectralPair| {
            f.apply_scalar(|m| {
                if g.is_nyquist(m) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
        };
        let (u, v) = (strip(u_hat), strip(v_hat));
        Ok(DiagonalState {
            u_plus: self.sp.apply_projection(Sign::Plus, &u)?,
            u_minus: self.sp.apply_projection(Sign::Minus, &u)?,
            v_plus: self.sp.apply_projection(Sign::Plus, &v)?,
            v_minus: self.sp.apply_projection(Sign::Minus, &v)?,
            time,
        })
    }

    pub fn to_config(&self, state: &DiagonalState) -> Result<MonopoleConfig> {
        from_uv(&self.sp, &state.u(), &state.v())
    }

    /// Projected nonlinear terms `(P+ N(u,v), P- N(u,v), P+ N(v,u), P- N(v,u))`.
    fn nonlinear_slots(&self, s: &Slots) -> Result<Slots> {
        let u = s[0].add(&s[1]);
        let v = s[2].add(&s[3]);
        let (nu, nv) = nonlinearity_pair(&self.sp, &u, &v);
        let [nu_plus, nu_minus] = self.sp.split_projection(&nu);
        let [nv_plus, nv_minus] = self.sp.split_projection(&nv);
        Ok([nu_plus, nu_minus, nv_plus, nv_minus])
    }

    fn zero_slots(&self, dim: usize) -> Slots {
        let z = SpectralPair::zeros(dim, self.grid().points());
        [z.clone(), z.clone(), z.clone(), z]
    }

    /// Frequency of slot `k` at mode `m`: the slot evolves as
    /// `exp(i t omega)` under the free flow.
    fn omega(&self, k: usize, m: usize) -> f64 {
        let (is_u, sign) = SLOTS[k];
        let s = if is_u { sign.value() } else { -sign.value() };
        s * self.sp.abs_xi(m)
    }

    /// Phases `exp(i h |xi|)` per mode.
    fn phases(&self, h: f64) -> Vec<Complex64> {
        (0..self.grid().points())
            .map(|m| Complex64::from_polar(1.0, h * self.sp.abs_xi(m)))
            .collect()
    }

    /// Free propagator `exp(i h omega)` applied slotwise.
    fn propagate(&self, s: &Slots, h: f64) -> Slots {
        self.propagate_with(s, &self.phases(h))
    }

    fn propagate_with(&self, s: &Slots, phases: &[Complex64]) -> Slots {
        std::array::from_fn(|k| {
            if self.omega(k, 1) >= 0.0 {
                s[k].apply_scalar(|m| phases[m])
            } else {
                s[k].apply_scalar(|m| phases[m].conj())
            }
        })
    }

    /// Free propagators `exp(+i h alpha.xi)` (for `u`) and
    /// `exp(-i h alpha.xi)` (for `v`) per mode.
    fn propagators(&self, h: f64) -> [Vec<Mat2>; 2] {
        let i = Complex64::new(0.0, 1.0);
        [1.0, -1.0].map(|dir| {
            self.unit_symbol
                .iter()
                .enumerate()
                .map(|(m, a)| {
                    let (sn, cs) = (h * self.sp.abs_xi(m)).sin_cos();
                    let z = i * (dir * sn);
                    Mat2(std::array::from_fn(|p| {
                        std::array::from_fn(|q| {
                            let diag = if p == q { cs } else { 0.0 };
                            a.0[p][q] * z + diag
                        })
                    }))
                })
                .collect()
        })
    }

    /// `sum_i c_i E_i w_i` on `(u, v)` pairs, where `E_i` is a per-mode
    /// matrix table for `u` and for `v`, or the identity for `Scalar`.
    /// Only the flat matrix entries listed in `entries` are formed; the
    /// rest stay zero.
    fn combine(&self, entries: &[usize], terms: &[(Term<'_>, &Uv)]) -> Uv {
        const BLOCK: usize = 64;
        let np = self.grid().points();
        std::array::from_fn(|k| {
            let dim = terms[0].1[k].dim();
            let mut out = SpectralPair::zeros(dim, np);
            let [o0, o1] = &mut out.components;
            let d0 = o0.data_mut().chunks_exact_mut(np);
            let d1 = o1.data_mut().chunks_exact_mut(np);
            for (e, (d0, d1)) in d0.zip(d1).enumerate() {
                if !entries.contains(&e) {
                    continue;
                }
                for (b, (d0, d1)) in d0.chunks_mut(BLOCK).zip(d1.chunks_mut(BLOCK)).enumerate() {
                    let r = e * np + b * BLOCK..e * np + b * BLOCK + d0.len();
                    let m0 = b * BLOCK;
                    for &(term, w) in terms {
                        let x0 = &w[k].components[0].data()[r.clone()];
                        let x1 = &w[k].components[1].data()[r.clone()];
                        match term {
                            Term::Scalar(c) => {
                                for j in 0..d0.len() {
                                    d0[j] += x0[j] * c;
                                    d1[j] += x1[j] * c;
                                }
                            }
                            Term::Matrix(t, c) => {
                                let t = &t[k][m0..m0 + d0.len()];
                                for j in 0..d0.len() {
                                    let a = &t[j].0;
                                    d0[j] += (a[0][0] * x0[j] + a[0][1] * x1[j]) * c;
                                    d1[j] += (a[1][0] * x0[j] + a[1][1] * x1[j]) * c;
                                }
                            }
                        }
                    }
                }
            }
            out
        })
    }

    /// `(N(u, v), N(v, u))`, or zeros for the linear system.
    fn nonlinear_uv(&self, w: &Uv) -> Uv {
        if self.nonlinear {
            let (nu, nv) = nonlinearity_pair(&self.sp, &w[0], &w[1]);
            [nu, nv]
        } else {
            let z = SpectralPair::zeros(w[0].dim(), self.grid().points());
            [z.clone(), z]
        }
    }

    /// As [`nonlinear_uv`](Self::nonlinear_uv) for su(2) data, forming
    /// only the independent entries.
    fn nonlinear_uv_partial(&self, w: &Uv) -> Uv {
        if self.su2_stages(w) {
            let (nu, nv) = su2_nonlinearity_pair(&self.sp, &w[0], &w[1], false);
            [nu, nv]
        } else {
            self.nonlinear_uv(w)
        }
    }

    /// Whether the Lawson stages may carry only the independent su(2)
    /// entries (`00` and `01`), which is all the su(2) nonlinearity reads.
    fn su2_stages(&self, w: &Uv) -> bool {
        self.su2_shortcut && self.nonlinear && w[0].dim() == 2
    }

    /// Physical time derivatives from `(u, v)` and their nonlinear terms.
    fn derivatives_uv(&self, w: &Uv, n: &Uv) -> Result<TimeDerivatives> {
        let i = Complex64::new(0.0, 1.0);
        let lin = |f: &SpectralPair, s: f64| {
            f.apply_symbol(|m| Mat2(alpha_dot(self.sp.xi(m)).0.map(|row| row.map(|z| z * i * s))))
        };
        let du = lin(&w[0], 1.0).add(&n[0]);
        let dv = lin(&w[1], -1.0).add(&n[1]);
        let c = from_uv(&self.sp, &du, &dv)?;
        Ok(TimeDerivatives {
            a0: c.a0,
            a1: c.a1,
            a2: c.a2,
            phi: c.phi,
        })
    }

    /// Time derivatives of the four slots from the projected system:
    /// `d_t u_+- = +-i|xi| u_+- + P_+- N(u, v)`,
    /// `d_t v_+- = -+i|xi| v_+- + P_+- N(v, u)`.
    pub fn rhs_v3(&self, state: &DiagonalState) -> Result<[SpectralPair; 4]> {
        let s = state.to_slots();
        let mut out = if self.nonlinear {
            self.nonlinear_slots(&s)?
        } else {
            self.zero_slots(state.dim())
        };
        for (k, o) in out.iter_mut().enumerate() {
            let lin = s[k].apply_scalar(|m| Complex64::new(0.0, self.omega(k, m)));
            *o = o.add(&lin);
        }
        Ok(out)
    }

    /// Unprojected right-hand side
    /// `(d_t u_hat, d_t v_hat) = (i alpha.xi u_hat + N(u,v), -i alpha.xi v_hat + N(v,u))`.
    pub fn rhs_v2(
        &self,
        u_hat: &SpectralPair,
        v_hat: &SpectralPair,
    ) -> Result<(SpectralPair, SpectralPair)> {
        let i = Complex64::new(0.0, 1.0);
        let sym = |m: usize, s: f64| {
            let a = alpha_dot(self.sp.xi(m));
            crate::spectral::Mat2(a.0.map(|row| row.map(|z| z * i * s)))
        };
        let mut du = u_hat.apply_symbol(|m| sym(m, 1.0));
        let mut dv = v_hat.apply_symbol(|m| sym(m, -1.0));
        if self.nonlinear {
            let (nu, nv) = nonlinearity_pair(&self.sp, u_hat, v_hat);
            du = du.add(&nu);
            dv = dv.add(&nv);
        }
        Ok((du, dv))
    }

    /// Physical-space `d_t (A0, A1, A2, phi)` from the evolution equations.
    pub fn time_derivatives(&self, state: &DiagonalState) -> Result<TimeDerivatives> {
        let r = self.rhs_v3(state)?;
        let c = from_uv(&self.sp, &r[0].add(&r[1]), &r[2].add(&r[3]))?;
        Ok(TimeDerivatives {
            a0: c.a0,
            a1: c.a1,
            a2: c.a2,
            phi: c.phi,
        })
    }

    /// One integrating-factor RK4 step (Lawson form). The free flow is
    /// applied by exact phases, so with `N = 0` the step is exact.
    pub fn step(&self, state: &DiagonalState, dt: f64) -> Result<DiagonalState> {
        self.check_step(dt)?;
        let w = [state.u(), state.v()];
        let n1 = self.nonlinear_uv(&w);
        self.lawson_step(state, &w, &n1, dt)
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if !dt.is_finite() || dt == 0.0 {
            return invalid(format!("time step {dt} must be finite and nonzero"));
        }
        if self.nonlinear && dt.abs() > self.stability_bound() {
            return invalid(format!(
                "|dt| = {} exceeds the stability bound {}",
                dt.abs(),
                self.stability_bound()
            ));
        }
        Ok(())
    }

    /// Lawson step from `state`, given `w = (u, v)` and its nonlinear
    /// terms `n1`. The stages run on `(u, v)` with the exact matrix
    /// propagator; since `P_+-` commute with it and sum to the identity,
    /// this equals the slotwise scheme. The result is split into slots.
    fn lawson_step(
        &self,
        state: &DiagonalState,
        w: &Uv,
        n1: &Uv,
        dt: f64,
    ) -> Result<DiagonalState> {
        if !self.nonlinear {
            let s = state.to_slots();
            return Ok(DiagonalState::from_slots(
                self.propagate(&s, dt),
                state.time + dt,
            ));
        }
        let h = dt;
        let half = self.propagators(0.5 * h);
        let full = self.propagators(h);
        let dim = w[0].dim();
        let all: Vec<usize> = (0..dim * dim).collect();
        let su2 = self.su2_stages(w);
        let ent: &[usize] = if su2 { &[0, 1] } else { &all };
        let m = |t, c| Term::Matrix(t, c);
        let hw = self.combine(ent, &[(m(&half, 1.0), w)]);
        let a2 = self.combine(ent, &[(m(&half, 1.0), w), (m(&half, 0.5 * h), n1)]);
        let n2 = self.nonlinear_uv_partial(&a2);
        let a3 = self.combine(
            ent,
            &[(Term::Scalar(1.0), &hw), (Term::Scalar(0.5 * h), &n2)],
        );
        let n3 = self.nonlinear_uv_partial(&a3);
        let a4 = self.combine(ent, &[(m(&half, 1.0), &hw), (m(&half, h), &n3)]);
        let n4 = self.nonlinear_uv_partial(&a4);
        let mut out = self.combine(
            ent,
            &[
                (m(&full, 1.0), w),
                (m(&full, h / 6.0), n1),
                (m(&half, h / 3.0), &n2),
                (m(&half, h / 3.0), &n3),
                (Term::Scalar(h / 6.0), &n4),
            ],
        );
        if su2 {
            for f in out.iter_mut().flat_map(|p| p.components.iter_mut()) {
                self.sp.complete_lie_hat(f);
            }
        }
        let [u, v] = out;
        let [u_plus, u_minus] = self.sp.split_projection(&u);
        let [v_plus, v_minus] = self.sp.split_projection(&v);
        let next = DiagonalState {
            u_plus,
            u_minus,
            v_plus,
            v_minus,
            time: state.time + h,
        };
        if !next.is_finite() {
            return Err(Error::Diverged { time: next.time });
        }
        Ok(next)
    }

    /// Integrates to `initial.time + t_final` (negative `t_final` runs
    /// backward), saving every state.
    pub fn evolve(&self, initial: &DiagonalState, t_final: f64, dt: f64) -> Result<Trajectory> {
        self.evolve_with(initial, t_final, dt, 1, |_| Ok(()))
    }

    /// As [`evolve`](Self::evolve), saving every `save_every`-th state
    /// and passing every state (including the initial one) to `observe`.
    pub fn evolve_with(
        &self,
        initial: &DiagonalState,
        t_final: f64,
        dt: f64,
        save_every: usize,
        mut observe: impl FnMut(&DiagonalState) -> Result<()>,
    ) -> Result<Trajectory> {
        self.evolve_inner(initial, t_final, dt, save_every, |s, _, _| observe(s))
    }

    /// As [`evolve_with`](Self::evolve_with), also passing the time
    /// derivatives at each state. These reuse the first stage of the
    /// following step, so observing them costs one conversion per state.
    pub fn evolve_with_derivatives(
        &self,
        initial: &DiagonalState,
        t_final: f64,
        dt: f64,
        save_every: usize,
        mut observe: impl FnMut(&DiagonalState, &TimeDerivatives) -> Result<()>,
    ) -> Result<Trajectory> {
        self.evolve_inner(initial, t_final, dt, save_every, |s, w, n| {
            observe(s, &self.derivatives_uv(w, n)?)
        })
    }

    fn evolve_inner(
        &self,
        initial: &DiagonalState,
        t_final: f64,
        dt: f64,
        save_every: usize,
        mut observe: impl FnMut(&DiagonalState, &Uv, &Uv) -> Result<()>,
    ) -> Result<Trajectory> {
        let steps = step_count(t_final, dt)?;
        if save_every == 0 {
            return invalid("save_every must be positive");
        }
        let h = dt.abs() * t_final.signum();
        let h = if t_final == 0.0 { dt.abs() } else { h };
        self.check_step(h)?;
        let mut states = vec![initial.clone()];
        let mut cur = initial.clone();
        for k in 0..=steps {
            let w = [cur.u(), cur.v()];
            let n1 = self.nonlinear_uv(&w);
            observe(&cur, &w, &n1)?;
            if k == steps {
                break;
            }
            let mut next = self.lawson_step(&cur, &w, &n1, h)?;
            next.time = initial.time + (k + 1) as f64 * h;
            if (k + 1) % save_every == 0 {
                states.push(next.clone());
            }
            cur = next;
        }
        Ok(Trajectory {
            grid: *self.grid(),
            dt: h * save_every as f64,
            states,
        })
    }

    /// Picard iterates of the Duhamel formula on the uniform step grid
    /// `t_j = j dt`, `0 <= j <= T/dt`. Iterate 0 is the free evolution.
    pub fn picard_iterate(
        &self,
        data: &DiagonalState,
        t_final: f64,
        dt: f64,
        iterations: usize,
    ) -> Result<PicardResult> {
        let steps = step_count(t_final, dt)?;
        let h = if t_final < 0.0 { -dt.abs() } else { dt.abs() };
        let w0 = data.to_slots();
        let free: Vec<Slots> = (0..=steps)
            .map(|j| self.propagate(&w0, j as f64 * h))
            .collect();
        let mut cur = free.clone();
        let mut increments = Vec::new();
        if self.nonlinear {
            for _ in 0..iterations {
                // Interaction picture: H_i = W(-t_i) F(t_i).
                let hs: Vec<Slots> = cur
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        let f = self.nonlinear_slots(w)?;
                        Ok(self.propagate(&f, -(i as f64) * h))
                    })
                    .collect::<Result<_>>()?;
                let mut next = Vec::with_capacity(steps + 1);
                let mut delta: f64 = 0.0;
                for j in 0..=steps {
                    let wts = duhamel_weights(j, steps);
                    let mut acc = self.zero_slots(data.dim());
                    for (i, wgt) in wts.iter().enumerate() {
                        if *wgt != 0.0 {
                            for k in 0..4 {
                                acc[k].axpy(wgt * h, &hs[i][k]);
                            }
                        }
                    }
                    let duh = self.propagate(&acc, j as f64 * h);
                    let s: Slots = std::array::from_fn(|k| free[j][k].add(&duh[k]));
                    let d = (0..4)
                        .map(|k| s[k].sub(&cur[j][k]).l2().powi(2))
                        .sum::<f64>()
                        .sqrt();
                    delta = delta.max(d);
                    next.push(s);
                }
                increments.push(delta);
                cur = next;
            }
        }
        let states = cur
            .into_iter()
            .enumerate()
            .map(|(j, s)| DiagonalState::from_slots(s, data.time + j as f64 * h))
            .collect();
        Ok(PicardResult {
            trajectory: Trajectory {
                grid: *self.grid(),
                dt: h,
                states,
            },
            increments,
        })
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt != 0.0 && t_final.is_finite()) {
        return invalid(format!("invalid time span T = {t_final}, dt = {dt}"));
    }
    let r = (t_final / dt).abs();
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) {
        return invalid(format!(
            "T = {t_final} is not an integer multiple of dt = {dt}"
        ));
    }
    Ok(n as usize)
}

/// Quadrature weights (in units of the step) for `int_0^{t_j}` on the
/// nodes `t_0..t_j`, fourth order throughout: Simpson for even `j`,
/// Simpson plus the 3/8 rule on the last three intervals for odd
/// `j >= 3`, and for `j = 1` the three-point rule `(5, 8, -1)/12`
/// that borrows node 2 when it exists.
pub fn duhamel_weights(j: usize, last: usize) -> Vec<f64> {
    let mut w = vec![0.0; (j + 1).max(3).min(last + 1)];
    match j {
        0 => {}
        1 if last >= 2 => {
            w[0] = 5.0 / 12.0;
            w[1] = 8.0 / 12.0;
            w[2] = -1.0 / 12.0;
        }
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let simpson_end = if j % 2 == 0 { j } else { j - 3 };
            for i in (0..simpson_end).step_by(2) {
                w[i] += 1.0 / 3.0;
                w[i + 1] += 4.0 / 3.0;
                w[i + 2] += 1.0 / 3.0;
            }
            if j % 2 == 1 {
                let b = j - 3;
                for (o, c) in [3.0, 9.0, 9.0, 3.0].iter().enumerate() {
                    w[b + o] += c / 8.0;
                }
            }
        }
    }
    w
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Second-order centered difference of the reconstructed fields at an
    /// interior saved index.
    pub fn centered_time_derivatives(
        &self,
        sys: &DiagonalSystem,
        index: usize,
    ) -> Result<TimeDerivatives> {
        if index == 0 || index + 1 >= self.states.len() {
            return invalid(format!("index {index} is not interior"));
        }
        let prev = sys.to_config(&self.states[index - 1])?;
        let next = sys.to_config(&self.states[index + 1])?;
        let d = next.sub(&prev);
        let s = 1.0 / (2.0 * self.dt);
        Ok(TimeDerivatives {
            a0: d.a0.scale(s),
            a1: d.a1.scale(s),
            a2: d.a2.scale(s),
            phi: d.phi.scale(s),
        })
    }

    /// Writes one snapshot per saved state plus a manifest.
    pub fn export(
        &self,
        dir: &Path,
        sys: &DiagonalSystem,
        params: &[(String, String)],
    ) -> Result<()> {
        let configs: Vec<(f64, MonopoleConfig)> = self
            .states
            .iter()
            .map(|s| Ok((s.time, sys.to_config(s)?)))
            .collect::<Result<_>>()?;
        let mut p = params.to_vec();
        p.push(("N".into(), self.grid.n.to_string()));
        p.push(("L".into(), format!("{}", self.grid.length)));
        p.push(("dt".into(), format!("{}", self.dt)));
        snapshot::export_series(dir, configs.iter().map(|(t, c)| (*t, c)), &p)?;
        Ok(())
    }
}
