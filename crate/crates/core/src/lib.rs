//! Work statistics of suddenly quenched optomechanical systems.
//!
//! A cavity mode and a mechanical oscillator start uncoupled in a joint
//! thermal state; at t = 0 the optomechanical coupling (linear in the
//! mechanical position, or quadratic) is switched on instantaneously. This
//! crate computes the full statistics of the work injected by that quench:
//!
//! - characteristic functions `chi(u)` in closed form,
//! - the discrete two-point-measurement work distribution `P(W)`,
//! - moments, free-energy differences and irreversible work,
//! - fluctuation-theorem residuals (Jarzynski, Tasaki-Crooks),
//! - coarse-grained densities mimicking finite measurement resolution,
//!
//! and validates every closed form against a brute-force truncated
//! Fock-space oracle (dense block diagonalization plus the two-point
//! measurement protocol executed literally).
//!
//! Units: `hbar = 1`, frequencies in `omega_m`, energies and work in
//! `hbar*omega_m`, inverse temperature in `1/(hbar*omega_m)`, the
//! time-like argument `u` in `1/omega_m`.
//!
//! All operations are pure functions of their inputs and safe for
//! unrestricted concurrent use. The numerical kernels are generic over the
//! scalar type via [`real::Real`] (`f32` or `f64`); the crate-root aliases
//! fix the `f64` instantiations that the CLI and the test suites use.

pub mod analysis;
pub mod error;
pub mod linear;
pub mod oracle;
pub mod overlap;
pub mod params;
pub mod quadratic;
pub mod real;
pub mod special;
pub mod truncation;
pub mod work;

pub use error::{Error, Result};
pub use params::{thermal_occupation, thermal_weight, CouplingKind};
pub use real::Real;
pub use truncation::{choose_truncation, thermal_truncation, HardCaps};

/// `f64` instantiations of the core types.
pub type PhysicalParams = params::PhysicalParams<f64>;
pub type ThermalOccupation = params::ThermalOccupation<f64>;
pub type Truncation = truncation::Truncation<f64>;
pub type WorkDistribution = work::WorkDistribution<f64>;
pub type WorkAtom = work::WorkAtom<f64>;
pub type Moments = work::Moments<f64>;
pub type CharFunctionSample = work::CharFunctionSample<f64>;
pub type Complex64 = num_complex::Complex<f64>;
pub type LinearQuenchResult = linear::LinearQuenchResult<f64>;
pub type SqueezeFactors = quadratic::SqueezeFactors<f64>;
pub type TruncatedOperator = oracle::TruncatedOperator<f64>;
pub type TwoPointOutcome = oracle::TwoPointOutcome<f64>;
pub type ThermoSummary = analysis::ThermoSummary<f64>;
pub type CoarseGrainedDensity = analysis::CoarseGrainedDensity<f64>;
