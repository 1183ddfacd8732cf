//! Numerical laboratory for the space-time monopole equation in Lorenz
//! gauge.
//!
//! The crate has two halves. The solver side ([`lie`], [`spectral`],
//! [`gauge`], [`diagonal`]) evolves the diagonalized half-wave system with
//! an integrating-factor RK4 scheme on a periodic grid. The verification
//! side ([`norms`], [`null_geometry`], [`cone`]) evaluates Fourier-Lebesgue
//! norms, null-form symbol bounds and delta-restricted light-cone integrals
//! that control the bilinear estimates.

pub mod cone;
pub mod diagonal;
pub mod error;
pub mod gauge;
pub mod lie;
pub mod norms;
pub mod null_geometry;
pub mod quadrature;
pub mod snapshot;
pub mod spectral;

pub use diagonal::{DiagonalState, DiagonalSystem, Trajectory};
pub use error::{Error, Result};
pub use gauge::{MonopoleConfig, TimeDerivatives};
pub use lie::{GroupElement, LieElement};
pub use norms::NormParams;
pub use spectral::{GridSpec, MatrixField, Sign, Spectral, SpectralPair};

/// Seeded generator used by every sweep.
pub type SweepRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SweepRng {
    use rand::SeedableRng;
    SweepRng::seed_from_u64(seed)
}

/// Crate version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Display wrapper for CSV numbers: shortest round-trip digits, in
/// exponent form outside `[1e-4, 1e15)` so tiny residuals stay short.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvFloat(pub f64);

impl std::fmt::Display for CsvFloat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if self.0 == 0.0 || !self.0.is_finite() || (1e-4..1e15).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}
