//! Gauge-covariant objects on a single time slice: curvature, covariant
//! derivative of the Higgs field, its Hodge dual, the monopole residual,
//! the Lorenz constraint, gauge transformations and the scaling map.
//!
//! Spatial derivatives are spectral; time derivatives are supplied by the
//! caller as a [`TimeDerivatives`] value.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::lie::{CMatrix, GroupElement};
use crate::spectral::{random_lie_field, GridSpec, MatrixField, Spectral};

/// The four su(n)-valued fields `(A0, A1, A2, phi)` on one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MonopoleConfig {
    pub grid: GridSpec,
    pub a0: MatrixField,
    pub a1: MatrixField,
    pub a2: MatrixField,
    pub phi: MatrixField,
}

/// `(d_t A0, d_t A1, d_t A2, d_t phi)` at the same time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDerivatives {
    pub a0: MatrixField,
    pub a1: MatrixField,
    pub a2: MatrixField,
    pub phi: MatrixField,
}

/// Components `(01, 02, 12)` of an su(n)-valued two-form.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    pub c01: MatrixField,
    pub c02: MatrixField,
    pub c12: MatrixField,
}

impl TwoForm {
    pub fn sub(&self, o: &TwoForm) -> TwoForm {
        TwoForm {
            c01: self.c01.sub(&o.c01),
            c02: self.c02.sub(&o.c02),
            c12: self.c12.sub(&o.c12),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c01
            .max_abs()
            .max(self.c02.max_abs())
            .max(self.c12.max_abs())
    }
}

/// Row-wise residual (left minus right side) of the monopole system:
/// the `phi`, `A1` and `A2` evolution rows in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonopoleResidual {
    pub rows: [MatrixField; 3],
}

impl MonopoleResidual {
    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .map(MatrixField::max_abs)
            .fold(0.0, f64::max)
    }
}

fn check_shape(grid: &GridSpec, dim: usize, fields: &[&MatrixField]) -> Result<()> {
    for f in fields {
        if f.npts() != grid.points() || f.dim() != dim {
            return invalid(format!(
                "field shape ({} x {} pts) does not match grid ({} x {} pts)",
                f.dim(),
                f.npts(),
                dim,
                grid.points()
            ));
        }
    }
    Ok(())
}

impl MonopoleConfig {
    pub fn new(
        grid: GridSpec,
        a0: MatrixField,
        a1: MatrixField,
        a2: MatrixField,
        phi: MatrixField,
    ) -> Result<Self> {
        check_shape(&grid, a0.dim(), &[&a0, &a1, &a2, &phi])?;
        Ok(Self {
            grid,
            a0,
            a1,
            a2,
            phi,
        })
    }

    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        let z = MatrixField::zeros(dim, grid.points());
        Self {
            grid,
            a0: z.clone(),
            a1: z.clone(),
            a2: z.clone(),
            phi: z,
        }
    }

    /// Independent random band-limited fields.
    pub fn random<R: Rng + ?Sized>(
        spectral: &Spectral,
        dim: usize,
        band: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let mut f = || random_lie_field(spectral, dim, band, amplitude, rng);
        Self {
            grid: *spectral.grid(),
            a0: f(),
            a1: f(),
            a2: f(),
            phi: f(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    /// Fields in the order `A0, A1, A2, phi`.
    pub fn fields(&self) -> [&MatrixField; 4] {
        [&self.a0, &self.a1, &self.a2, &self.phi]
    }

    pub fn lie_defect(&self) -> f64 {
        self.fields()
            .iter()
            .map(|f| f.lie_defect())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.fields()
            .iter()
            .map(|f| f.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, o: &MonopoleConfig) -> MonopoleConfig {
        MonopoleConfig {
            grid: self.grid,
            a0: self.a0.sub(&o.a0),
            a1: self.a1.sub(&o.a1),
            a2: self.a2.sub(&o.a2),
            phi: self.phi.sub(&o.phi),
        }
    }
}

impl TimeDerivatives {
    pub fn zeros(grid: &GridSpec, dim: usize) -> Self {
        let z = MatrixField::zeros(dim, grid.points());
        Self {
            a0: z.clone(),
            a1: z.clone(),
            a2: z.clone(),
            phi: z,
        }
    }

    pub fn fields(&self) -> [&MatrixField; 4] {
        [&self.a0, &self.a1, &self.a2, &self.phi]
    }
}

fn check_inputs(sp: &Spectral, cfg: &MonopoleConfig, dts: &TimeDerivatives) -> Result<()> {
    if sp.grid() != &cfg.grid {
        return invalid("spectral context and configuration use different grids");
    }
    let d = cfg.dim();
    let mut all: Vec<&MatrixField> = cfg.fields().to_vec();
    all.extend(dts.fields());
    check_shape(&cfg.grid, d, &all)
}

/// `D_A phi = (d_t phi + [A0, phi], d_1 phi + [A1, phi], d_2 phi + [A2, phi])`.
pub fn covariant_derivative(
    sp: &Spectral,
    cfg: &MonopoleConfig,
    dts: &TimeDerivatives,
) -> Result<[MatrixField; 3]> {
    check_inputs(sp, cfg, dts)?;
    let d1 = sp.derivative(&cfg.phi, 0)?;
    let d2 = sp.derivative(&cfg.phi, 1)?;
    Ok([
        dts.phi.add(&cfg.a0.bracket(&cfg.phi)),
        d1.add(&cfg.a1.bracket(&cfg.phi)),
        d2.add(&cfg.a2.bracket(&cfg.phi)),
    ])
}

/// `F_ab = d_a A_b - d_b A_a + [A_a, A_b]` for `ab = 01, 02, 12`.
pub fn curvature(sp: &Spectral, cfg: &MonopoleConfig, dts: &TimeDerivatives) -> Result<TwoForm> {
    check_inputs(sp, cfg, dts)?;
    let d1a0 = sp.derivative(&cfg.a0, 0)?;
    let d2a0 = sp.derivative(&cfg.a0, 1)?;
    let d1a2 = sp.derivative(&cfg.a2, 0)?;
    let d2a1 = sp.derivative(&cfg.a1, 1)?;
    Ok(TwoForm {
        c01: dts.a1.sub(&d1a0).add(&cfg.a0.bracket(&cfg.a1)),
        c02: dts.a2.sub(&d2a0).add(&cfg.a0.bracket(&cfg.a2)),
        c12: d1a2.sub(&d2a1).add(&cfg.a1.bracket(&cfg.a2)),
    })
}

/// Hodge dual of `D_A phi` for the metric `diag(-1, 1, 1)`:
/// `*D_A phi = -D_0 phi dx1^dx2 - D_1 phi dx0^dx2 + D_2 phi dx0^dx1`.
pub fn hodge_dual_of_covariant_derivative(
    sp: &Spectral,
    cfg: &MonopoleConfig,
    dts: &TimeDerivatives,
) -> Result<TwoForm> {
    let [d0, d1, d2] = covariant_derivative(sp, cfg, dts)?;
    Ok(TwoForm {
        c01: d2,
        c02: d1.scale(-1.0),
        c12: d0.scale(-1.0),
    })
}

/// Residual of the three evolution rows
///
/// ```text
/// d_t phi + d_1 A2 - d_2 A1 - [A2, A1] - [phi, A0]
/// d_t A1  - d_1 A0 - d_2 phi - [A1, A0] - [A2, phi]
/// d_t A2  - d_2 A0 + d_1 phi - [A2, A0] - [phi, A1]
/// ```
pub fn monopole_residual(
    sp: &Spectral,
    cfg: &MonopoleConfig,
    dts: &TimeDerivatives,
) -> Result<MonopoleResidual> {
    check_inputs(sp, cfg, dts)?;
    let (a0, a1, a2, phi) = (&cfg.a0, &cfg.a1, &cfg.a2, &cfg.phi);
    let d1 = |f: &MatrixField| sp.derivative(f, 0);
    let d2 = |f: &MatrixField| sp.derivative(f, 1);
    let row_phi = dts
        .phi
        .add(&d1(a2)?)
        .sub(&d2(a1)?)
        .sub(&a2.bracket(a1))
        .sub(&phi.bracket(a0));
    let row_a1 = dts
        .a1
        .sub(&d1(a0)?)
        .sub(&d2(phi)?)
        .sub(&a1.bracket(a0))
        .sub(&a2.bracket(phi));
    let row_a2 = dts
        .a2
        .sub(&d2(a0)?)
        .add(&d1(phi)?)
        .sub(&a2.bracket(a0))
        .sub(&phi.bracket(a1));
    Ok(MonopoleResidual {
        rows: [row_phi, row_a1, row_a2],
    })
}

/// `d_t A0 - d_1 A1 - d_2 A2`.
pub fn lorenz_residual(
    sp: &Spectral,
    cfg: &MonopoleConfig,
    dts: &TimeDerivatives,
) -> Result<MatrixField> {
    check_inputs(sp, cfg, dts)?;
    Ok(dts
        .a0
        .sub(&sp.derivative(&cfg.a1, 0)?)
        .sub(&sp.derivative(&cfg.a2, 1)?))
}

/// A time-independent SU(n)-valued gauge map with its two spatial
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMap {
    pub o: MatrixField,
    pub grad: [MatrixField; 2],
}

impl GaugeMap {
    pub fn constant(grid: &GridSpec, o: &GroupElement) -> Self {
        let np = grid.points();
        let mut field = MatrixField::zeros(o.dim(), np);
        for p in 0..np {
            field.set(p, o.entries());
        }
        let z = MatrixField::zeros(o.dim(), np);
        Self {
            o: field,
            grad: [z.clone(), z],
        }
    }

    /// `O(x) = exp(X(x))` for a random band-limited su(n) field `X`;
    /// derivatives of `O` are spectral.
    pub fn smooth<R: Rng + ?Sized>(
        sp: &Spectral,
        dim: usize,
        band: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let x = random_lie_field(sp, dim, band, amplitude, rng);
        let np = sp.grid().points();
        let mut o = MatrixField::zeros(dim, np);
        for p in 0..np {
            o.set(p, &x.get(p).exp());
        }
        let grad = [sp.derivative(&o, 0)?, sp.derivative(&o, 1)?];
        Ok(Self { o, grad })
    }

    /// Pointwise unitarity and unit-determinant check.
    pub fn validate(&self) -> Result<()> {
        for p in 0..self.o.npts() {
            GroupElement::new(self.o.get(p))
                .map_err(|e| Error::InvalidArgument(format!("gauge map at point {p}: {e}")))?;
        }
        Ok(())
    }
}

/// `A_a -> O A_a O^{-1} + O d_a O^{-1}`, `phi -> O phi O^{-1}`; since
/// `O` is static, `A0` and every time derivative transform by conjugation.
pub fn gauge_transform(
    map: &GaugeMap,
    cfg: &MonopoleConfig,
    dts: &TimeDerivatives,
) -> Result<(MonopoleConfig, TimeDerivatives)> {
    check_shape(&cfg.grid, cfg.dim(), &[&map.o, &map.grad[0], &map.grad[1]])?;
    map.validate()?;
    let o = &map.o;
    let o_inv = o.adjoint();
    let conj = |f: &MatrixField| o.matmul(f).matmul(&o_inv);
    // O d_a O^{-1} = -(d_a O) O^{-1} for unitary O.
    let inhom = |a: usize| map.grad[a].matmul(&o_inv).scale(-1.0);
    let cfg2 = MonopoleConfig {
        grid: cfg.grid,
        a0: conj(&cfg.a0),
        a1: conj(&cfg.a1).add(&inhom(0)),
        a2: conj(&cfg.a2).add(&inhom(1)),
        phi: conj(&cfg.phi),
    };
    let dts2 = TimeDerivatives {
        a0: conj(&dts.a0),
        a1: conj(&dts.a1),
        a2: conj(&dts.a2),
        phi: conj(&dts.phi),
    };
    Ok((cfg2, dts2))
}

/// Applies the scaling `f -> lambda f(lambda x)` at `t = 0`.
///
/// The dilation is realised by shrinking the period to `L / lambda` with
/// the same samples multiplied by `lambda`, so every Fourier mode keeps
/// its index while its physical wavevector is multiplied by `lambda`.
/// Only dyadic `lambda = 2^k` is accepted.
pub fn rescale(cfg: &MonopoleConfig, lambda: f64) -> Result<MonopoleConfig> {
    let grid = rescaled_grid(&cfg.grid, lambda)?;
    let s = |f: &MatrixField| f.scale(lambda);
    Ok(MonopoleConfig {
        grid,
        a0: s(&cfg.a0),
        a1: s(&cfg.a1),
        a2: s(&cfg.a2),
        phi: s(&cfg.phi),
    })
}

pub(crate) fn rescaled_grid(grid: &GridSpec, lambda: f64) -> Result<GridSpec> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("scaling factor {lambda} must be positive"));
    }
    let k = lambda.log2();
    if (k - k.round()).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "scaling factor {lambda} is not a power of two"
        )));
    }
    GridSpec::new(grid.n, grid.length / lambda, grid.dt / lambda)
}

/// Pointwise `O X O^{-1}` for a constant group element.
pub fn conjugate_field(o: &GroupElement, f: &MatrixField) -> MatrixField {
    let np = f.npts();
    let mut out = MatrixField::zeros(f.dim(), np);
    let oi: CMatrix = o.entries().adjoint();
    for p in 0..np {
        out.set(p, &(o.entries() * f.get(p) * &oi));
    }
    out
}
