//! Independent check of the delta-restricted integrals: replace the delta
//! by a Gaussian of width `eps`, integrate over the plane with a Cartesian
//! product rule, and extrapolate `eps -> 0`.

#![allow(dead_code)]

use monopole_core::cone::rotate;
use monopole_core::quadrature::composite_nodes;
use monopole_core::Sign;
use std::f64::consts::PI;

pub type Vec2 = [f64; 2];

/// A smooth bump `exp(-1 / (1 - |x - c|^2 / r^2))` supported on a disc
/// that meets the curve `|eta| -+ |xi - eta| = tau`.
#[derive(Debug, Clone, Copy)]
pub struct OracleCase {
    pub branch: Sign,
    pub tau: f64,
    pub xi: Vec2,
    pub center: Vec2,
    pub radius: f64,
}

impl OracleCase {
    /// Bump centred on the point of the curve at angle `psi` from `xi`,
    /// shifted by `offset`.
    pub fn on_curve(branch: Sign, tau: f64, xi: Vec2, psi: f64, offset: Vec2, radius: f64) -> Self {
        let r = xi[0].hypot(xi[1]);
        let e = rotate([xi[0] / r, xi[1] / r], psi);
        let rho = match branch {
            Sign::Plus => (tau * tau - r * r) / (2.0 * (tau - r * psi.cos())),
            Sign::Minus => (r * r - tau * tau) / (2.0 * (r * psi.cos() - tau)),
        };
        assert!(rho > 0.0, "angle off the curve");
        let center = [rho * e[0] + offset[0], rho * e[1] + offset[1]];
        Self {
            branch,
            tau,
            xi,
            center,
            radius,
        }
    }

    pub fn f(&self, x: Vec2) -> f64 {
        let d2 = ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2))
            / (self.radius * self.radius);
        if d2 < 1.0 {
            (-1.0 / (1.0 - d2)).exp()
        } else {
            0.0
        }
    }

    fn g(&self, x: Vec2) -> f64 {
        let a = x[0].hypot(x[1]);
        let b = (self.xi[0] - x[0]).hypot(self.xi[1] - x[1]);
        match self.branch {
            Sign::Plus => a + b,
            Sign::Minus => a - b,
        }
    }

    /// Distance from the support to the set where `g` is not smooth or
    /// has vanishing gradient; must be positive.
    pub fn clearance(&self) -> f64 {
        let xi = self.xi;
        let r = xi[0].hypot(xi[1]);
        let u = [xi[0] / r, xi[1] / r];
        let c = self.center;
        let s = c[0] * u[0] + c[1] * u[1];
        let perp = (c[0] * u[1] - c[1] * u[0]).abs();
        let to_foci = c[0].hypot(c[1]).min((c[0] - xi[0]).hypot(c[1] - xi[1]));
        let bad = match self.branch {
            // the closed segment between the foci
            Sign::Plus => {
                if (0.0..=r).contains(&s) {
                    perp
                } else {
                    to_foci
                }
            }
            // the two rays outside the foci
            Sign::Minus => {
                if (0.0..=r).contains(&s) {
                    to_foci
                } else {
                    perp
                }
            }
        };
        bad.min(to_foci) - self.radius
    }

    /// `int F(eta) G_eps(tau - g(eta)) d eta`.
    pub fn mollified(&self, eps: f64) -> f64 {
        let panels = ((2.0 * self.radius / eps).ceil() as usize).max(4);
        let (xs, wx) = composite_nodes(
            self.center[0] - self.radius,
            self.center[0] + self.radius,
            16 * panels,
        );
        let (ys, wy) = composite_nodes(
            self.center[1] - self.radius,
            self.center[1] + self.radius,
            16 * panels,
        );
        let norm = 1.0 / (eps * (2.0 * PI).sqrt());
        let mut s = 0.0;
        for (x, a) in xs.iter().zip(&wx) {
            for (y, b) in ys.iter().zip(&wy) {
                let f = self.f([*x, *y]);
                if f == 0.0 {
                    continue;
                }
                let d = (self.tau - self.g([*x, *y])) / eps;
                s += a * b * f * (-0.5 * d * d).exp();
            }
        }
        s * norm
    }

    /// Two Richardson levels over `eps, eps/2, eps/4`.
    pub fn extrapolated(&self, eps: f64) -> f64 {
        let v = [
            self.mollified(eps),
            self.mollified(0.5 * eps),
            self.mollified(0.25 * eps),
        ];
        let r1a = (4.0 * v[1] - v[0]) / 3.0;
        let r1b = (4.0 * v[2] - v[1]) / 3.0;
        (16.0 * r1b - r1a) / 15.0
    }
}

/// The ten test integrands.
pub fn oracle_cases() -> Vec<OracleCase> {
    use Sign::{Minus, Plus};
    vec![
        OracleCase::on_curve(Plus, 2.0, [1.0, 0.0], PI / 2.0, [0.0, 0.0], 0.4),
        OracleCase::on_curve(Plus, 2.0, [1.0, 0.0], PI, [0.05, 0.0], 0.4),
        OracleCase::on_curve(Plus, 3.0, [0.6, 0.8], 2.0, [0.1, -0.1], 0.6),
        OracleCase::on_curve(Plus, 3.0, [2.0, 1.0], PI / 2.0, [0.0, 0.0], 0.5),
        OracleCase::on_curve(Plus, 1.3, [0.0, 1.0], -PI / 2.0, [0.0, 0.0], 0.15),
        OracleCase::on_curve(Minus, 0.0, [1.0, 0.0], 0.5, [0.0, 0.0], 0.4),
        OracleCase::on_curve(Minus, 0.4, [1.0, 0.0], 0.0, [0.0, 0.0], 0.25),
        OracleCase::on_curve(Minus, -0.5, [0.0, 2.0], 1.0, [0.0, 0.0], 0.4),
        OracleCase::on_curve(Minus, 0.8, [-1.0, 1.0], 0.4, [0.0, 0.05], 0.3),
        OracleCase::on_curve(Minus, 0.3, [1.0, 0.0], -0.8, [0.1, 0.0], 0.5),
    ]
}
