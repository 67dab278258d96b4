//! Numerics for the minimum absolute coordinate M(Σ) = min_i |g_i| of a
//! centered Gaussian vector g ~ N(0, Σ) with correlation matrix Σ.
//!
//! - [`corrmat`]: correlation matrices, Gram factors, signed-permutation distance.
//! - [`exactlaw`]: tails and moments of M(Σ^cos) by quadrature.
//! - [`interval`]: interval arithmetic and the rigorous n = 4 certificate.
//! - [`montecarlo`]: seeded estimators, tail curves, dominance checks.
//! - [`zones`]: spherical zones and the slab/zone decomposition.
//! - [`search`]: optimization over correlation matrices.

pub mod corrmat;
pub mod error;
pub mod exactlaw;
pub mod interval;
pub mod montecarlo;
pub mod quad;
pub mod rng;
pub mod search;
pub mod zones;

pub use error::{Error, Result};
