//! Persistence probabilities of Gaussian processes with regularly varying,
//! possibly non-summable, correlations.
//!
//! The crate covers the whole pipeline from correlation tails to measured
//! decay rates:
//!
//! - [`rv`]: regularly varying tails ρ, primitives I_ρ, the decay-rate
//!   functional a_ρ and numeric checks of the Karamata-type estimates.
//! - [`kernel`]: the covariance catalog (stationary, interface, limiting,
//!   Lamperti, OU, stationary fractional OU, lattice), Gram/Cholesky
//!   assembly and conditional Gaussian laws.
//! - [`walk`]: continuous-time lattice random walks, return probabilities,
//!   Green functions and the interface covariance Γ.
//! - [`sampler`]: path sampling, crude and sequential-conditioning
//!   persistence estimators, comparison bounds and exponent fits.
//! - [`langevin`]: Euler–Maruyama simulation of the lattice interface
//!   Langevin system on a torus.
//! - [`experiment`] and [`verify`]: configuration-driven runs and the
//!   property verification suites.

pub mod error;
pub mod experiment;
pub mod kernel;
pub mod langevin;
pub mod normal;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod rv;
pub mod sampler;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
