//! Periodic 2D grid, unitary FFTs, Fourier multipliers and the spinor
//! projections `P_+-(xi) = (I +- alpha . xi/|xi|) / 2`.
//!
//! Fields are stored entry-major: a `MatrixField` of dimension `n` on a grid
//! of `npts` points holds `n*n` contiguous arrays, one per matrix entry, so
//! every FFT and every pointwise product runs over contiguous memory.

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::lie::{standard_normal, CMatrix, LieElement};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const IM: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Discretization of the periodic torus `[0, L)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per dimension; a power of two, at least 8.
    pub n: usize,
    /// Period length.
    pub length: f64,
    /// Time step.
    pub dt: f64,
}

impl GridSpec {
    pub fn new(n: usize, length: f64, dt: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return invalid(format!("grid size N = {n} must be a power of two >= 8"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("period L = {length} must be positive"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return invalid(format!("time step dt = {dt} must be positive"));
        }
        Ok(Self { n, length, dt })
    }

    pub fn points(&self) -> usize {
        self.n * self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Frequency spacing `2 pi / L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed integer wavenumber of storage index `idx` (FFT ordering,
    /// `-N/2 ..= N/2 - 1`).
    pub fn wavenumber(&self, idx: usize) -> i64 {
        signed_index(idx, self.n)
    }

    /// Integer wavenumber pair of flat mode index `m = i*N + j`.
    pub fn mode(&self, m: usize) -> (i64, i64) {
        (self.wavenumber(m / self.n), self.wavenumber(m % self.n))
    }

    /// Flat storage index for integer wavenumbers, if representable.
    pub fn mode_index(&self, k1: i64, k2: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        if k1 < -h || k1 >= h || k2 < -h || k2 >= h {
            return None;
        }
        let wrap = |k: i64| (if k < 0 { k + self.n as i64 } else { k }) as usize;
        Some(wrap(k1) * self.n + wrap(k2))
    }

    /// Physical frequency `xi = (2 pi / L) k` of flat mode index `m`.
    pub fn xi(&self, m: usize) -> [f64; 2] {
        let (k1, k2) = self.mode(m);
        [self.dk() * k1 as f64, self.dk() * k2 as f64]
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        let h = -((self.n / 2) as i64);
        let (k1, k2) = self.mode(m);
        k1 == h || k2 == h
    }

    /// Coordinates of grid point `p`.
    pub fn x(&self, p: usize) -> [f64; 2] {
        [
            (p / self.n) as f64 * self.dx(),
            (p % self.n) as f64 * self.dx(),
        ]
    }

    /// Factor converting unitary DFT coefficients to samples of the
    /// continuum transform `(2 pi)^{-1} \int f(x) e^{-i x.xi} dx`.
    pub fn continuum_scale(&self) -> f64 {
        self.length * self.length / (2.0 * PI * self.n as f64)
    }

    /// Area of one frequency cell, `(2 pi / L)^2`.
    pub fn frequency_cell(&self) -> f64 {
        self.dk() * self.dk()
    }
}

pub(crate) fn signed_index(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Sign label for the two half-wave branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// A 2x2 complex matrix acting on the spinor index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn real(a: [[f64; 2]; 2]) -> Self {
        Mat2([
            [Complex64::new(a[0][0], 0.0), Complex64::new(a[0][1], 0.0)],
            [Complex64::new(a[1][0], 0.0), Complex64::new(a[1][1], 0.0)],
        ])
    }

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn zero() -> Self {
        Self::real([[0.0; 2]; 2])
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        let mut c = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut c = self.0;
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += o.0[i][j];
            }
        }
        Mat2(c)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let mut c = self.0;
        for row in c.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        Mat2(c)
    }

    pub fn adjoint(&self) -> Mat2 {
        let a = &self.0;
        Mat2([
            [a[0][0].conj(), a[1][0].conj()],
            [a[0][1].conj(), a[1][1].conj()],
        ])
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - o.0[i][j]).norm());
            }
        }
        m
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        // Eigenvalues of the Hermitian 2x2 matrix A^* A in closed form.
        let h = self.adjoint().mul(self).0;
        let a = h[0][0].re;
        let d = h[1][1].re;
        let b = h[0][1].norm();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean + rad).max(0.0).sqrt()
    }
}

pub fn alpha1() -> Mat2 {
    Mat2::real([[1.0, 0.0], [0.0, -1.0]])
}

pub fn alpha2() -> Mat2 {
    Mat2::real([[0.0, 1.0], [1.0, 0.0]])
}

pub fn beta() -> Mat2 {
    Mat2::real([[0.0, 1.0], [-1.0, 0.0]])
}

/// `alpha . xi = xi_1 alpha_1 + xi_2 alpha_2`.
pub fn alpha_dot(xi: [f64; 2]) -> Mat2 {
    alpha1().scale(xi[0]).add(&alpha2().scale(xi[1]))
}

/// Hermitian idempotent symbol `P_+-(xi)`; `P_+-(0) = I/2`.
pub fn projection_matrix(sign: Sign, xi: [f64; 2]) -> Mat2 {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        return Mat2::identity().scale(0.5);
    }
    let s = sign.value();
    let c = xi[0] / r;
    let d = xi[1] / r;
    Mat2::real([
        [0.5 * (1.0 + s * c), 0.5 * s * d],
        [0.5 * s * d, 0.5 * (1.0 - s * c)],
    ])
}

/// A field of `dim x dim` complex matrices on `npts` grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    dim: usize,
    npts: usize,
    data: Vec<Complex64>,
}

impl MatrixField {
    pub fn zeros(dim: usize, npts: usize) -> Self {
        Self {
            dim,
            npts,
            data: vec![ZERO; dim * dim * npts],
        }
    }

    /// Pointwise Lie algebra values.
    pub fn from_fn(dim: usize, npts: usize, mut f: impl FnMut(usize) -> LieElement) -> Self {
        let mut out = Self::zeros(dim, npts);
        for p in 0..npts {
            out.set(p, f(p).entries());
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> &[Complex64] {
        let e = i * self.dim + j;
        &self.data[e * self.npts..(e + 1) * self.npts]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [Complex64] {
        let e = i * self.dim + j;
        &mut self.data[e * self.npts..(e + 1) * self.npts]
    }

    pub fn entries(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.npts)
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut [Complex64]> {
        self.data.chunks_exact_mut(self.npts)
    }

    pub fn get(&self, p: usize) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j)[p])
    }

    pub fn set(&mut self, p: usize, m: &CMatrix) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.entry_mut(i, j)[p] = m[(i, j)];
            }
        }
    }

    /// Value at `p` as a Lie algebra element, without validation.
    pub fn lie_at(&self, p: usize) -> LieElement {
        LieElement::from_matrix_unchecked(self.get(p))
    }

    fn check_same(&self, o: &MatrixField) {
        assert_eq!(
            (self.dim, self.npts),
            (o.dim, o.npts),
            "matrix field shape mismatch"
        );
    }

    pub fn add(&self, o: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.axpy(1.0, o);
        out
    }

    pub fn sub(&self, o: &MatrixField) -> MatrixField {
        let mut out = self.clone();
        out.axpy(-1.0, o);
        out
    }

    pub fn scale(&self, s: f64) -> MatrixField {
        let mut out = self.clone();
        out.scale_mut(Complex64::new(s, 0.0));
        out
    }

    pub fn scale_mut(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += a * o`.
    pub fn axpy(&mut self, a: f64, o: &MatrixField) {
        self.check_same(o);
        for (x, y) in self.data.iter_mut().zip(&o.data) {
            *x += y * a;
        }
    }

    /// `self += a * o` with a complex coefficient.
    pub fn axpy_c(&mut self, a: Complex64, o: &MatrixField) {
        self.check_same(o);
        for (x, y) in self.data.iter_mut().zip(&o.data) {
            *x += y * a;
        }
    }

    /// Pointwise matrix product `self(x) o(x)`.
    pub fn matmul(&self, o: &MatrixField) -> MatrixField {
        self.check_same(o);
        let mut out = MatrixField::zeros(self.dim, self.npts);
        let (n, np) = (self.dim, self.npts);
        for i in 0..n {
            for j in 0..n {
                let dst = &mut out.data[(i * n + j) * np..(i * n + j + 1) * np];
                for k in 0..n {
                    let a = &self.data[(i * n + k) * np..(i * n + k + 1) * np];
                    let b = &o.data[(k * n + j) * np..(k * n + j + 1) * np];
                    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
                        *d += x * y;
                    }
                }
            }
        }
        out
    }

    /// Pointwise commutator `[self, o]`.
    pub fn bracket(&self, o: &MatrixField) -> MatrixField {
        self.check_same(o);
        let (n, np) = (self.dim, self.npts);
        let mut out = MatrixField::zeros(n, np);
        let block = |i: usize, j: usize| (i * n + j) * np..(i * n + j + 1) * np;
        for (e, dst) in out.data.chunks_exact_mut(np).enumerate() {
            let (i, j) = (e / n, e % n);
            for k in 0..n {
                let a_ik = &self.data[block(i, k)];
                let b_kj = &o.data[block(k, j)];
                let b_ik = &o.data[block(i, k)];
                let a_kj = &self.data[block(k, j)];
                for p in 0..np {
                    dst[p] += a_ik[p] * b_kj[p] - b_ik[p] * a_kj[p];
                }
            }
        }
        out
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> MatrixField {
        let mut out = MatrixField::zeros(self.dim, self.npts);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let src = self.entry(j, i).to_vec();
                for (d, s) in out.entry_mut(i, j).iter_mut().zip(src) {
                    *d = s.conj();
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Root of the sum of squared moduli over all points and entries.
    pub fn l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest pointwise anti-Hermitian or trace defect.
    pub fn lie_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for p in 0..self.npts {
            let mut tr = ZERO;
            for i in 0..n {
                tr += self.entry(i, i)[p];
                for j in 0..n {
                    worst = worst.max((self.entry(i, j)[p] + self.entry(j, i)[p].conj()).norm());
                }
            }
            worst = worst.max(tr.norm());
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Two-component spinor of matrix fields; the outer slot is the C^2 index
/// on which `alpha_1`, `alpha_2`, `beta` act.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub components: [MatrixField; 2],
}

impl SpectralPair {
    pub fn new(first: MatrixField, second: MatrixField) -> Self {
        assert_eq!((first.dim, first.npts), (second.dim, second.npts));
        Self {
            components: [first, second],
        }
    }

    pub fn zeros(dim: usize, npts: usize) -> Self {
        Self::new(MatrixField::zeros(dim, npts), MatrixField::zeros(dim, npts))
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim
    }

    pub fn npts(&self) -> usize {
        self.components[0].npts
    }

    pub fn add(&self, o: &SpectralPair) -> SpectralPair {
        SpectralPair::new(
            self.components[0].add(&o.components[0]),
            self.components[1].add(&o.components[1]),
        )
    }

    pub fn sub(&self, o: &SpectralPair) -> SpectralPair {
        SpectralPair::new(
            self.components[0].sub(&o.components[0]),
            self.components[1].sub(&o.components[1]),
        )
    }

    pub fn scale(&self, s: f64) -> SpectralPair {
        SpectralPair::new(self.components[0].scale(s), self.components[1].scale(s))
    }

    pub fn axpy(&mut self, a: f64, o: &SpectralPair) {
        self.components[0].axpy(a, &o.components[0]);
        self.components[1].axpy(a, &o.components[1]);
    }

    pub fn l2(&self) -> f64 {
        self.components[0].l2().hypot(self.components[1].l2())
    }

    pub fn max_abs(&self) -> f64 {
        self.components[0]
            .max_abs()
            .max(self.components[1].max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(MatrixField::is_finite)
    }

    /// Left action of a per-mode 2x2 matrix on the spinor index.
    pub fn apply_symbol(&self, symbol: impl FnMut(usize) -> Mat2) -> SpectralPair {
        let syms: Vec<Mat2> = (0..self.npts()).map(symbol).collect();
        self.apply_symbol_table(&syms)
    }

    /// [`apply_symbol`](Self::apply_symbol) with precomputed per-mode matrices.
    pub fn apply_symbol_table(&self, syms: &[Mat2]) -> SpectralPair {
        let (dim, np) = (self.dim(), self.npts());
        assert_eq!(syms.len(), np, "symbol table length mismatch");
        let mut out = SpectralPair::zeros(dim, np);
        for e in 0..dim * dim {
            let a = &self.components[0].data[e * np..(e + 1) * np];
            let b = &self.components[1].data[e * np..(e + 1) * np];
            let [o0, o1] = &mut out.components;
            let d0 = &mut o0.data[e * np..(e + 1) * np];
            let d1 = &mut o1.data[e * np..(e + 1) * np];
            for m in 0..np {
                let s = &syms[m].0;
                d0[m] = s[0][0] * a[m] + s[0][1] * b[m];
                d1[m] = s[1][0] * a[m] + s[1][1] * b[m];
            }
        }
        out
    }

    /// Multiplies every entry at mode `m` by the scalar `mult(m)`.
    pub fn apply_scalar(&self, mult: impl Fn(usize) -> Complex64) -> SpectralPair {
        let np = self.npts();
        let mut out = self.clone();
        for c in out.components.iter_mut() {
            for e in c.entries_mut() {
                for (m, z) in e.iter_mut().enumerate() {
                    *z *= mult(m);
                }
            }
        }
        debug_assert_eq!(np, out.npts());
        out
    }
}

/// FFT plans and wavenumber tables for one grid, with the 2/3-rule mask
/// used to dealias quadratic products.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    cutoff: i64,
    keep: Vec<bool>,
    mirror: Vec<usize>,
    proj: [Vec<Mat2>; 2],
    proj_plus_real: Vec<[f64; 3]>,
    xi: Vec<[f64; 2]>,
    abs_xi: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n;
        let cutoff = (n as i64 - 1) / 3;
        let keep = (0..grid.points())
            .map(|m| {
                let (k1, k2) = grid.mode(m);
                k1.abs() <= cutoff && k2.abs() <= cutoff
            })
            .collect();
        let xi: Vec<[f64; 2]> = (0..grid.points()).map(|m| grid.xi(m)).collect();
        let abs_xi = xi.iter().map(|x| x[0].hypot(x[1])).collect();
        let n = grid.n;
        let mirror = (0..grid.points())
            .map(|m| ((n - m / n) % n) * n + (n - m % n) % n)
            .collect();
        let proj = [Sign::Plus, Sign::Minus].map(|s| {
            xi.iter()
                .map(|&x| projection_matrix(s, x))
                .collect::<Vec<_>>()
        });
        let proj_plus_real = proj[0]
            .iter()
            .map(|p| [p.0[0][0].re, p.0[0][1].re, p.0[1][1].re])
            .collect();
        Self {
            grid,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            cutoff,
            keep,
            mirror,
            proj,
            proj_plus_real,
            xi,
            abs_xi,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn xi(&self, m: usize) -> [f64; 2] {
        self.xi[m]
    }

    pub fn abs_xi(&self, m: usize) -> f64 {
        self.abs_xi[m]
    }

    fn check(&self, f: &MatrixField) -> Result<()> {
        if f.npts != self.grid.points() {
            return invalid(format!(
                "field has {} points, grid expects {}",
                f.npts,
                self.grid.points()
            ));
        }
        Ok(())
    }

    /// Unitary forward transform of every matrix entry.
    pub fn forward(&self, f: &MatrixField) -> Result<MatrixField> {
        self.check(f)?;
        let mut out = f.clone();
        let n = self.grid.n;
        let s = 1.0 / n as f64;
        let mut scratch = Vec::new();
        for e in out.entries_mut() {
            fft2(e, n, self.fwd.as_ref(), &mut scratch);
            e.iter_mut().for_each(|z| *z *= s);
        }
        Ok(out)
    }

    /// Unitary inverse transform of every matrix entry.
    pub fn inverse(&self, f: &MatrixField) -> Result<MatrixField> {
        self.check(f)?;
        let mut out = f.clone();
        let n = self.grid.n;
        let s = 1.0 / n as f64;
        let mut scratch = Vec::new();
        for e in out.entries_mut() {
            fft2(e, n, self.inv.as_ref(), &mut scratch);
            e.iter_mut().for_each(|z| *z *= s);
        }
        Ok(out)
    }

    pub fn forward_pair(&self, f: &SpectralPair) -> Result<SpectralPair> {
        Ok(SpectralPair::new(
            self.forward(&f.components[0])?,
            self.forward(&f.components[1])?,
        ))
    }

    pub fn inverse_pair(&self, f: &SpectralPair) -> Result<SpectralPair> {
        Ok(SpectralPair::new(
            self.inverse(&f.components[0])?,
            self.inverse(&f.components[1])?,
        ))
    }

    /// Spectral partial derivative `i xi_axis f_hat` of a Fourier-space
    /// field; the Nyquist row/column is zeroed.
    pub fn derivative_hat(&self, f_hat: &MatrixField, axis: usize) -> MatrixField {
        let mut out = f_hat.clone();
        for e in out.entries_mut() {
            for (m, z) in e.iter_mut().enumerate() {
                *z = if self.grid.is_nyquist(m) {
                    ZERO
                } else {
                    *z * IM * self.xi[m][axis]
                };
            }
        }
        out
    }

    /// Physical-space partial derivative along `axis` (0 for x1, 1 for x2).
    pub fn derivative(&self, f: &MatrixField, axis: usize) -> Result<MatrixField> {
        let h = self.forward(f)?;
        self.inverse(&self.derivative_hat(&h, axis))
    }

    /// Per-mode left action of `P_sign(xi)` on the spinor index.
    pub fn apply_projection(&self, sign: Sign, f: &SpectralPair) -> Result<SpectralPair> {
        self.check(&f.components[0])?;
        let table = match sign {
            Sign::Plus => &self.proj[0],
            Sign::Minus => &self.proj[1],
        };
        Ok(f.apply_symbol_table(table))
    }

    /// `[P_+ f, P_- f]` in one pass, with `P_- f = f - P_+ f`.
    pub fn split_projection(&self, f: &SpectralPair) -> [SpectralPair; 2] {
        let (dim, np) = (f.dim(), f.npts());
        let mut plus = SpectralPair::zeros(dim, np);
        let mut minus = SpectralPair::zeros(dim, np);
        // P_+ is real symmetric
        let syms = &self.proj_plus_real;
        for e in 0..dim * dim {
            let r = e * np..(e + 1) * np;
            let a = &f.components[0].data()[r.clone()];
            let b = &f.components[1].data()[r.clone()];
            let [p0, p1] = &mut plus.components;
            let [m0, m1] = &mut minus.components;
            let (p0, p1) = (&mut p0.data_mut()[r.clone()], &mut p1.data_mut()[r.clone()]);
            let (m0, m1) = (&mut m0.data_mut()[r.clone()], &mut m1.data_mut()[r]);
            for m in 0..np {
                let [s00, s01, s11] = syms[m];
                let x = a[m] * s00 + b[m] * s01;
                let y = a[m] * s01 + b[m] * s11;
                p0[m] = x;
                p1[m] = y;
                m0[m] = a[m] - x;
                m1[m] = b[m] - y;
            }
        }
        [plus, minus]
    }

    /// Multiplier `|xi|^power`. The zero mode maps to zero for
    /// `power > 0`; `power == 0` is the identity; `power < 0` requires a
    /// vanishing zero mode.
    pub fn apply_abs_d(&self, f: &SpectralPair, power: f64) -> Result<SpectralPair> {
        self.check(&f.components[0])?;
        if power == 0.0 {
            return Ok(f.clone());
        }
        if power < 0.0 {
            let zero_mode = f
                .components
                .iter()
                .flat_map(|c| c.entries().map(|e| e[0].norm()))
                .fold(0.0, f64::max);
            if zero_mode != 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "|D|^{power} applied to a field with nonzero zero mode"
                )));
            }
        }
        Ok(f.apply_scalar(|m| {
            let r = self.abs_xi[m];
            if r == 0.0 {
                ZERO
            } else {
                Complex64::new(r.powf(power), 0.0)
            }
        }))
    }

    /// Largest retained wavenumber `K = (N - 1) / 3` of the 2/3 rule. A
    /// product of two fields supported in `|k_i| <= K` aliases only onto
    /// modes with `|k_i| > K`.
    pub fn dealias_cutoff(&self) -> i64 {
        self.cutoff
    }

    fn truncate(&self, e: &mut [Complex64]) {
        for (z, keep) in e.iter_mut().zip(&self.keep) {
            if !keep {
                *z = ZERO;
            }
        }
    }

    /// Physical samples of `f_hat` with every mode outside the 2/3-rule
    /// band removed.
    pub fn to_dealiased(&self, f_hat: &MatrixField) -> MatrixField {
        let n = self.grid.n;
        let s = 1.0 / n as f64;
        let mut out = f_hat.clone();
        let mut scratch = Vec::new();
        for e in out.entries_mut() {
            self.truncate(e);
            fft2(e, n, self.inv.as_ref(), &mut scratch);
            e.iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    /// Unitary coefficients of a physical product, truncated to the
    /// 2/3-rule band.
    pub fn from_dealiased(&self, g: &MatrixField) -> MatrixField {
        let n = self.grid.n;
        let s = 1.0 / n as f64;
        let mut out = g.clone();
        let mut scratch = Vec::new();
        for e in out.entries_mut() {
            fft2(e, n, self.fwd.as_ref(), &mut scratch);
            e.iter_mut().for_each(|z| *z *= s);
            self.truncate(e);
        }
        out
    }

    /// [`to_dealiased`](Self::to_dealiased) for coefficients of an
    /// su(n)-valued field. Only the independent entries are transformed;
    /// the rest follow from anti-Hermiticity and vanishing trace.
    pub fn lie_to_dealiased(&self, f_hat: &MatrixField) -> MatrixField {
        self.lie_to_dealiased_entries(f_hat, true)
    }

    /// Physical samples of the independent entries only (upper triangle
    /// without the last diagonal entry) unless `complete` is set.
    pub(crate) fn lie_to_dealiased_entries(
        &self,
        f_hat: &MatrixField,
        complete: bool,
    ) -> MatrixField {
        let n = self.grid.n;
        let dim = f_hat.dim;
        let s = 1.0 / n as f64;
        let mut out = MatrixField::zeros(dim, f_hat.npts);
        let mut scratch = Vec::new();
        for (i, j) in independent_entries(dim) {
            let dst = out.entry_mut(i, j);
            dst.copy_from_slice(f_hat.entry(i, j));
            self.truncate(dst);
            fft2(dst, n, self.inv.as_ref(), &mut scratch);
            dst.iter_mut().for_each(|z| *z *= s);
        }
        if complete {
            complete_lie_entries(&mut out, |src, p| -src[p].conj());
        }
        out
    }

    /// [`from_dealiased`](Self::from_dealiased) for an su(n)-valued
    /// physical field, using `f_ji(-k) = -conj(f_ij(k))`. Only the
    /// independent entries of `g` are read.
    pub fn lie_from_dealiased(&self, g: &MatrixField) -> MatrixField {
        self.lie_from_dealiased_entries(g, true)
    }

    /// Coefficients of the independent entries only unless `complete` is set.
    pub(crate) fn lie_from_dealiased_entries(
        &self,
        g: &MatrixField,
        complete: bool,
    ) -> MatrixField {
        let n = self.grid.n;
        let dim = g.dim;
        let s = 1.0 / n as f64;
        let mut out = MatrixField::zeros(dim, g.npts);
        let mut scratch = Vec::new();
        for (i, j) in independent_entries(dim) {
            let dst = out.entry_mut(i, j);
            dst.copy_from_slice(g.entry(i, j));
            fft2(dst, n, self.fwd.as_ref(), &mut scratch);
            dst.iter_mut().for_each(|z| *z *= s);
            self.truncate(dst);
        }
        if complete {
            self.complete_lie_hat(&mut out);
        }
        out
    }

    /// Fills the dependent entries of su(n) Fourier coefficients from the
    /// independent ones. On the DFT grid `-k` is taken modulo `N`.
    pub(crate) fn complete_lie_hat(&self, f: &mut MatrixField) {
        let mirror = &self.mirror;
        complete_lie_entries(f, |src, p| -src[mirror[p]].conj());
    }

    /// Conjugation symmetry of Fourier coefficients of an su(n)-valued
    /// field: `f_ij(-k) = -conj(f_ji(k))` and vanishing trace.
    pub fn lie_symmetry_defect(&self, f_hat: &MatrixField) -> f64 {
        let n = f_hat.dim;
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for m in 0..g.points() {
            let (k1, k2) = g.mode(m);
            let mirror = match g.mode_index(-k1, -k2) {
                Some(q) => q,
                None => continue,
            };
            let mut tr = ZERO;
            for i in 0..n {
                tr += f_hat.entry(i, i)[m];
                for j in 0..n {
                    let d = f_hat.entry(i, j)[mirror] + f_hat.entry(j, i)[m].conj();
                    worst = worst.max(d.norm());
                }
            }
            worst = worst.max(tr.norm());
        }
        worst
    }
}

/// In-place 2D FFT of an `n x n` row-major array (unnormalized).
/// Upper-triangular entries of an su(n) matrix, less the last diagonal one.
pub(crate) fn independent_entries(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim)
        .flat_map(move |i| (i..dim).map(move |j| (i, j)))
        .filter(move |&(i, j)| !(i == j && i + 1 == dim))
}

/// Fills the lower triangle from the upper one via `lower(p) = conj_map(upper, p)`
/// and the last diagonal entry from the trace condition.
fn complete_lie_entries(f: &mut MatrixField, conj_map: impl Fn(&[Complex64], usize) -> Complex64) {
    let (dim, np) = (f.dim, f.npts);
    for i in 0..dim {
        for j in 0..i {
            let lower: Vec<Complex64> = (0..np).map(|p| conj_map(f.entry(j, i), p)).collect();
            f.entry_mut(i, j).copy_from_slice(&lower);
        }
    }
    let last: Vec<Complex64> = (0..np)
        .map(|p| -(0..dim - 1).map(|i| f.entry(i, i)[p]).sum::<Complex64>())
        .collect();
    f.entry_mut(dim - 1, dim - 1).copy_from_slice(&last);
}

pub(crate) fn fft2(
    buf: &mut [Complex64],
    n: usize,
    fft: &dyn Fft<f64>,
    scratch: &mut Vec<Complex64>,
) {
    let need = fft.get_inplace_scratch_len();
    if scratch.len() < need {
        scratch.resize(need, ZERO);
    }
    fft.process_with_scratch(buf, &mut scratch[..need]);
    transpose_square(buf, n);
    fft.process_with_scratch(buf, &mut scratch[..need]);
    transpose_square(buf, n);
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Random su(n)-valued field whose Fourier support lies in
/// `|k_1|, |k_2| <= band`; pointwise magnitude is of order `amplitude`.
pub fn random_lie_field<R: Rng + ?Sized>(
    spectral: &Spectral,
    dim: usize,
    band: usize,
    amplitude: f64,
    rng: &mut R,
) -> MatrixField {
    let g = spectral.grid();
    let np = g.points();
    let b = band as i64;
    let count = ((2 * band + 1) * (2 * band + 1)) as f64;
    let sigma = amplitude / count.sqrt();
    let mut hat = MatrixField::zeros(dim, np);
    for e in hat.entries_mut() {
        for k1 in -b..=b {
            for k2 in -b..=b {
                if let Some(m) = g.mode_index(k1, k2) {
                    if g.is_nyquist(m) {
                        continue;
                    }
                    e[m] = Complex64::new(standard_normal(rng), standard_normal(rng))
                        * (sigma * g.n as f64);
                }
            }
        }
    }
    let raw = spectral.inverse(&hat).expect("shape matches grid");
    project_to_lie(&raw)
}

/// Pointwise projection `(G - G^*)/2 - tr/n` onto su(n).
pub fn project_to_lie(g: &MatrixField) -> MatrixField {
    let n = g.dim();
    let mut out = g.sub(&g.adjoint()).scale(0.5);
    let np = g.npts();
    let mut tr = vec![ZERO; np];
    for i in 0..n {
        for (t, z) in tr.iter_mut().zip(out.entry(i, i)) {
            *t += z;
        }
    }
    for i in 0..n {
        for (z, t) in out.entry_mut(i, i).iter_mut().zip(&tr) {
            *z -= t / n as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectral(n: usize) -> Spectral {
        Spectral::new(GridSpec::new(n, 2.0 * PI, 1e-3).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(7, 1.0, 0.1).is_err());
        assert!(GridSpec::new(4, 1.0, 0.1).is_err());
        assert!(GridSpec::new(16, 0.0, 0.1).is_err());
        assert!(GridSpec::new(16, 1.0, -0.1).is_err());
        let g = GridSpec::new(16, 1.0, 0.1).unwrap();
        assert_eq!(g.wavenumber(0), 0);
        assert_eq!(g.wavenumber(7), 7);
        assert_eq!(g.wavenumber(8), -8);
        assert_eq!(g.wavenumber(15), -1);
        for m in 0..g.points() {
            let (a, b) = g.mode(m);
            assert_eq!(g.mode_index(a, b), Some(m));
        }
    }

    #[test]
    fn projection_examples() {
        let p = projection_matrix(Sign::Plus, [1.0, 0.0]);
        assert_eq!(p, Mat2::real([[1.0, 0.0], [0.0, 0.0]]));
        let m = projection_matrix(Sign::Minus, [1.0, 0.0]);
        assert_eq!(m, Mat2::real([[0.0, 0.0], [0.0, 1.0]]));
        let q = projection_matrix(Sign::Plus, [0.0, 1.0]);
        assert_eq!(q, Mat2::real([[0.5, 0.5], [0.5, 0.5]]));
        assert_eq!(
            projection_matrix(Sign::Minus, [0.0, 0.0]),
            Mat2::identity().scale(0.5)
        );
    }

    #[test]
    fn projection_scale_invariant() {
        let xi = [0.3, -1.7];
        for s in Sign::BOTH {
            let a = projection_matrix(s, xi);
            for lam in [1e-3, 0.5, 7.0, 1e4] {
                let b = projection_matrix(s, [lam * xi[0], lam * xi[1]]);
                assert!(a.max_abs_diff(&b) < 1e-15);
            }
        }
    }

    #[test]
    fn operator_norm_of_known_matrices() {
        assert!((Mat2::identity().operator_norm() - 1.0).abs() < 1e-15);
        assert!((Mat2::real([[3.0, 0.0], [0.0, -5.0]]).operator_norm() - 5.0).abs() < 1e-14);
        assert!((Mat2::real([[1.0, 1.0], [1.0, 1.0]]).operator_norm() - 2.0).abs() < 1e-14);
        assert!(Mat2::zero().operator_norm() == 0.0);
    }

    #[test]
    fn fft_round_trip_and_parseval() {
        let sp = spectral(16);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_lie_field(&sp, 2, 4, 1.0, &mut rng);
        let h = sp.forward(&f).unwrap();
        assert!(((h.l2() - f.l2()) / f.l2()).abs() < 1e-12);
        let back = sp.inverse(&h).unwrap();
        assert!(back.sub(&f).l2() / f.l2() < 1e-12);
    }

    #[test]
    fn constant_field_is_zero_mode() {
        let sp = spectral(8);
        let c = LieElement::random(2, &mut ChaCha8Rng::seed_from_u64(8));
        let f = MatrixField::from_fn(2, 64, |_| c.clone());
        let h = sp.forward(&f).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = h.entry(i, j);
                assert!((e[0] - c.entries()[(i, j)] * 8.0).norm() < 1e-13);
                assert!(e[1..].iter().all(|z| z.norm() < 1e-13));
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let sp = spectral(8);
        assert!(sp.forward(&MatrixField::zeros(2, 10)).is_err());
    }

    #[test]
    fn abs_d_single_mode_and_zero_mode_policy() {
        let sp = spectral(8);
        let g = *sp.grid();
        let mut f = SpectralPair::zeros(2, g.points());
        let m = g.mode_index(1, 0).unwrap();
        f.components[0].entry_mut(0, 1)[m] = Complex64::new(2.0, -1.0);
        let d = sp.apply_abs_d(&f, 1.0).unwrap();
        assert!(
            (d.components[0].entry(0, 1)[m] - Complex64::new(2.0, -1.0) * g.dk()).norm() < 1e-15
        );
        assert_eq!(sp.apply_abs_d(&f, 0.0).unwrap(), f);

        f.components[1].entry_mut(0, 0)[0] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            sp.apply_abs_d(&f, -0.5),
            Err(Error::DegenerateInput(_))
        ));
        let pos = sp.apply_abs_d(&f, 0.5).unwrap();
        assert_eq!(pos.components[1].entry(0, 0)[0], ZERO);
    }

    #[test]
    fn dealiased_product_is_exact_inside_the_band() {
        let sp = spectral(16);
        assert_eq!(sp.dealias_cutoff(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_lie_field(&sp, 2, 2, 1.0, &mut rng);
        let b = random_lie_field(&sp, 2, 2, 1.0, &mut rng);
        let direct = sp.forward(&a.matmul(&b)).unwrap();
        let pa = sp.to_dealiased(&sp.forward(&a).unwrap());
        let pb = sp.to_dealiased(&sp.forward(&b).unwrap());
        let dealiased = sp.from_dealiased(&pa.matmul(&pb));
        assert!(direct.sub(&dealiased).l2() < 1e-12 * direct.l2());
    }

    #[test]
    fn lie_dealiased_transforms_match_general_ones() {
        let sp = spectral(16);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in [2, 3] {
            let a = random_lie_field(&sp, dim, 6, 1.0, &mut rng);
            let b = random_lie_field(&sp, dim, 6, 1.0, &mut rng);
            let ah = sp.forward(&a).unwrap();
            let pa = sp.lie_to_dealiased(&ah);
            assert!(pa.sub(&sp.to_dealiased(&ah)).max_abs() < 1e-13);
            let prod = pa.bracket(&sp.lie_to_dealiased(&sp.forward(&b).unwrap()));
            assert!(
                sp.lie_from_dealiased(&prod)
                    .sub(&sp.from_dealiased(&prod))
                    .max_abs()
                    < 1e-13
            );
        }
    }

    #[test]
    fn split_projection_matches_separate_projections() {
        let sp = spectral(8);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut field = || {
            sp.forward(&random_lie_field(&sp, 2, 3, 1.0, &mut rng))
                .unwrap()
        };
        let f = SpectralPair::new(field(), field());
        let [p, m] = sp.split_projection(&f);
        assert!(
            p.sub(&sp.apply_projection(Sign::Plus, &f).unwrap())
                .max_abs()
                < 1e-15
        );
        assert!(
            m.sub(&sp.apply_projection(Sign::Minus, &f).unwrap())
                .max_abs()
                < 1e-15
        );
    }

    #[test]
    fn fused_bracket_matches_commutator() {
        let sp = spectral(8);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_lie_field(&sp, 3, 3, 1.0, &mut rng);
        let b = random_lie_field(&sp, 3, 3, 1.0, &mut rng);
        assert!(
            a.bracket(&b)
                .sub(&a.matmul(&b).sub(&b.matmul(&a)))
                .max_abs()
                < 1e-14
        );
    }

    #[test]
    fn dealiased_product_matches_truncated_fine_grid_product() {
        // Band-5 data on N = 16: the exact product reaches |k| = 10, which a
        // 32-point grid resolves without aliasing.
        let sp = spectral(16);
        let fine = Spectral::new(GridSpec::new(32, sp.grid().length, 1e-3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_lie_field(&sp, 2, 5, 1.0, &mut rng);
        let b = random_lie_field(&sp, 2, 5, 1.0, &mut rng);
        let [ah, bh] = [&a, &b].map(|f| sp.forward(f).unwrap());
        let dealiased = sp.from_dealiased(&sp.to_dealiased(&ah).matmul(&sp.to_dealiased(&bh)));

        let lift = |h: &MatrixField| {
            let mut out = MatrixField::zeros(2, fine.grid().points());
            for (src, dst) in h.entries().zip(out.entries_mut()) {
                for (m, z) in src.iter().enumerate() {
                    let (k1, k2) = sp.grid().mode(m);
                    // unitary coefficients scale with N
                    dst[fine.grid().mode_index(k1, k2).unwrap()] = z * 2.0;
                }
            }
            fine.inverse(&out).unwrap()
        };
        let exact = fine.forward(&lift(&ah).matmul(&lift(&bh))).unwrap();
        let mut worst: f64 = 0.0;
        for (de, ex) in dealiased.entries().zip(exact.entries()) {
            for (m, z) in de.iter().enumerate() {
                let (k1, k2) = sp.grid().mode(m);
                let expect = if k1.abs() <= 5 && k2.abs() <= 5 {
                    ex[fine.grid().mode_index(k1, k2).unwrap()] * 0.5
                } else {
                    ZERO
                };
                worst = worst.max((z - expect).norm());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn random_field_is_lie_valued_and_band_limited() {
        let sp = spectral(16);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random_lie_field(&sp, 3, 4, 1.0, &mut rng);
        assert!(f.lie_defect() < 1e-13);
        let h = sp.forward(&f).unwrap();
        assert!(sp.lie_symmetry_defect(&h) < 1e-13);
        let g = sp.grid();
        for e in h.entries() {
            for (m, z) in e.iter().enumerate() {
                let (k1, k2) = g.mode(m);
                if k1.abs() > 4 || k2.abs() > 4 {
                    assert!(z.norm() < 1e-12);
                }
            }
        }
    }
}
