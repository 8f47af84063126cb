//! Matrix-product simulation of one-dimensional open XXZ spin chains.
//!
//! Two strategies are implemented side by side and can be cross-checked
//! against each other and against a dense brute-force reference:
//!
//! * [`mpdo`] evolves the vectorized density matrix as a matrix-product
//!   density operator with two-site superoperator gates and a fourth-order
//!   Trotter sweep sequence; [`itebd`] does the same for an infinite chain
//!   with a two-site unit cell.
//! * [`trajectory`] unravels the master equation into pure-state quantum
//!   trajectories, each stored as an MPS ([`mps`]).
//!
//! [`oracle`] integrates the master equation densely for small chains and
//! [`analytics`] holds closed-form benchmarks and curve fits.
//!
//! The crate is `no_std` (it needs `alloc`); enable the `std` feature to use
//! the platform math library instead of `libm`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
mod chain;
pub mod error;
pub mod itebd;
mod linalg;
pub mod models;
pub mod mpdo;
pub mod mps;
pub mod oracle;
pub mod tensor;
pub mod trajectory;
pub mod trotter;

pub use error::{Error, Result};
pub use models::{BasisFlavor, ChainLength, ModelParams, OperatorBasis};
pub use tensor::{DenseTensor, Scalar, SvdResult, Truncation, C64};

/// Von Neumann entropy in bits of a normalized Schmidt spectrum.
///
/// Values are squared internally; `0 log 0` is taken as zero.
pub fn schmidt_entropy(lambdas: &[f64]) -> f64 {
    #[allow(unused_imports)]
    use num_traits::Float;
    let norm: f64 = lambdas.iter().map(|l| l * l).sum();
    if norm <= 0.0 {
        return 0.0;
    }
    let s: f64 = lambdas
        .iter()
        .map(|l| l * l / norm)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    s.max(0.0)
}
