//! Pointwise arithmetic in su(n): brackets, adjoint action, norms.
//!
//! Values are stored as dense complex `n x n` matrices. `LieElement` is
//! anti-Hermitian and traceless, `GroupElement` is special unitary; both
//! constructors check the defining identities to [`LIE_TOL`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{invalid, Result};

/// Absolute tolerance for the anti-Hermitian / traceless / unitary checks
/// on unit-scale matrices.
pub const LIE_TOL: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// An element of su(n).
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    entries: CMatrix,
}

/// An element of SU(n).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    entries: CMatrix,
}

fn anti_hermitian_defect(m: &CMatrix) -> f64 {
    (m + m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl LieElement {
    /// Validates the anti-Hermitian and traceless conditions.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let n = entries.nrows();
        if n < 2 || entries.ncols() != n {
            return invalid(format!(
                "su(n) element must be square with n >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if anti_hermitian_defect(&entries) > LIE_TOL * scale {
            return invalid("matrix is not anti-Hermitian");
        }
        if entries.trace().norm() > LIE_TOL * scale {
            return invalid("matrix is not traceless");
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix without checking; for results of closed operations.
    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            entries: CMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    /// Real linear combination of the orthonormal basis returned by [`su_basis`].
    pub fn from_coefficients(n: usize, coeffs: &[f64]) -> Result<Self> {
        let basis = su_basis(n);
        if coeffs.len() != basis.len() {
            return invalid(format!(
                "su({n}) has dimension {}, got {} coefficients",
                basis.len(),
                coeffs.len()
            ));
        }
        let mut m = CMatrix::zeros(n, n);
        for (c, b) in coeffs.iter().zip(&basis) {
            m += b.entries.map(|z| z * *c);
        }
        Ok(Self { entries: m })
    }

    /// Coefficients in the orthonormal basis (Frobenius inner product).
    pub fn coefficients(&self) -> Vec<f64> {
        su_basis(self.dim())
            .iter()
            .map(|b| b.entries.dotc(&self.entries).re)
            .collect()
    }

    /// Standard normal coefficients in the orthonormal basis.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let coeffs: Vec<f64> = (0..n * n - 1).map(|_| standard_normal(rng)).collect();
        Self::from_coefficients(n, &coeffs).expect("coefficient count matches basis")
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        anti_hermitian_defect(&self.entries) <= tol && self.entries.trace().norm() <= tol
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.map(|z| z * s),
        }
    }
}

impl Add for &LieElement {
    type Output = LieElement;
    fn add(self, rhs: &LieElement) -> LieElement {
        LieElement {
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl Sub for &LieElement {
    type Output = LieElement;
    fn sub(self, rhs: &LieElement) -> LieElement {
        LieElement {
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl Neg for &LieElement {
    type Output = LieElement;
    fn neg(self) -> LieElement {
        LieElement {
            entries: -&self.entries,
        }
    }
}

impl GroupElement {
    /// Validates unitarity and unit determinant.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let n = entries.nrows();
        if n < 2 || entries.ncols() != n {
            return invalid("group element must be square with n >= 2");
        }
        let defect = (&entries * entries.adjoint() - CMatrix::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > LIE_TOL {
            return invalid(format!("matrix is not unitary (defect {defect:.3e})"));
        }
        let det = entries.determinant();
        if (det - Complex64::new(1.0, 0.0)).norm() > LIE_TOL {
            return invalid(format!("determinant {det} is not 1"));
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
        }
    }

    /// `exp(X)` for `X` in su(n) lies in SU(n).
    pub fn exp(x: &LieElement) -> Self {
        Self {
            entries: x.entries.exp(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn inverse(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        GroupElement {
            entries: &self.entries * &rhs.entries,
        }
    }
}

/// `[X, Y] = XY - YX`.
pub fn bracket(x: &LieElement, y: &LieElement) -> Result<LieElement> {
    if x.dim() != y.dim() {
        return invalid(format!("bracket of su({}) and su({})", x.dim(), y.dim()));
    }
    Ok(LieElement {
        entries: &x.entries * &y.entries - &y.entries * &x.entries,
    })
}

/// Adjoint action `O X O^{-1}`.
pub fn conjugate(o: &GroupElement, x: &LieElement) -> Result<LieElement> {
    if o.dim() != x.dim() {
        return invalid(format!("SU({}) acting on su({})", o.dim(), x.dim()));
    }
    Ok(LieElement {
        entries: &o.entries * &x.entries * o.entries.adjoint(),
    })
}

pub fn frobenius_norm(x: &LieElement) -> f64 {
    x.entries.norm()
}

/// Orthonormal basis of su(n) for the real Frobenius inner product.
///
/// Ordering: for each pair `j < k` the symmetric generator
/// `i(E_jk + E_kj)/sqrt2` then the antisymmetric `(E_jk - E_kj)/sqrt2`,
/// followed by the `n - 1` diagonal generators.
pub fn su_basis(n: usize) -> Vec<LieElement> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut sym = CMatrix::zeros(n, n);
            sym[(j, k)] = I * s;
            sym[(k, j)] = I * s;
            out.push(LieElement { entries: sym });
            let mut anti = CMatrix::zeros(n, n);
            anti[(j, k)] = Complex64::new(s, 0.0);
            anti[(k, j)] = Complex64::new(-s, 0.0);
            out.push(LieElement { entries: anti });
        }
    }
    for l in 1..n {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut d = CMatrix::zeros(n, n);
        for m in 0..l {
            d[(m, m)] = I / norm;
        }
        d[(l, l)] = -I * (l as f64) / norm;
        out.push(LieElement { entries: d });
    }
    out
}

/// The su(2) generators `e_k = -(i/2) sigma_k`, satisfying `[e1, e2] = e3`
/// cyclically.
pub fn su2_pauli_basis() -> [LieElement; 3] {
    let z = Complex64::new(0.0, 0.0);
    let h = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    let e1 = CMatrix::from_row_slice(2, 2, &[z, -ih, -ih, z]);
    let e2 = CMatrix::from_row_slice(2, 2, &[z, -h, h, z]);
    let e3 = CMatrix::from_row_slice(2, 2, &[-ih, z, z, ih]);
    [
        LieElement { entries: e1 },
        LieElement { entries: e2 },
        LieElement { entries: e3 },
    ]
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; one draw discarded to keep the stream simple.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
