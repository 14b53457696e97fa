//! Error types shared by all modules.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the physics kernels.
///
/// Guard errors (`UnboundedSpectrum`, `SeriesOverflow`) signal genuine
/// physical divergences; the remaining variants are resource or input
/// problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `beta * omega` underflowed so far that the Bose occupation is not
    /// representable.
    #[error("temperature too high for cutoff: beta*omega = {beta_omega:e} yields a non-finite occupation")]
    TemperatureTooHigh { beta_omega: f64 },

    /// The linear-coupling free-energy series has no convergent truncation:
    /// the post-quench spectrum is unbounded from below in the retained
    /// photon range.
    #[error(
        "unbounded-spectrum regime: free-energy series terms grow beyond photon index {monotone_limit} \
         but the thermal tail requires n_max = {required_n_max}"
    )]
    UnboundedSpectrum {
        required_n_max: usize,
        monotone_limit: usize,
    },

    /// A requested cutoff exceeds the hard dimension cap.
    #[error("dimension cap exceeded: {axis} cutoff {required} > cap {cap}")]
    DimensionCap {
        axis: &'static str,
        required: usize,
        cap: usize,
    },

    /// The assembled distribution leaks more probability than allowed.
    #[error("truncation too small: normalization deficit {deficit:e} exceeds tail tolerance {tail_tol:e}")]
    Truncation { deficit: f64, tail_tol: f64 },

    /// A retained series term would overflow (Wick-rotated evaluation).
    #[error("series overflow at n = {n}: exponent {exponent:e} exceeds the representable range")]
    SeriesOverflow { n: usize, exponent: f64 },

    /// The square-root branch of the quadratic characteristic function could
    /// not be disambiguated; the caller must refine the u grid.
    #[error("branch tracking failed near u = {u:e}: refine the u grid (internal step too coarse)")]
    BranchTracking { u: f64 },

    /// Coarse-graining grid spacing too large for the kernel width.
    #[error("grid too coarse: spacing {spacing:e} exceeds width/4 = {limit:e}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    /// Exponential tail fit requested on a window containing non-positive
    /// density values.
    #[error("non-positive density inside fit window at W = {at}")]
    NonPositiveDensity { at: f64 },

    /// Dense eigensolver did not converge on a photon-manifold block.
    #[error("eigensolver failed to converge on photon block n = {block}")]
    EigenFailure { block: usize },

    /// Parameter invariant violated.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Range/usage errors from sweep and grid specifications.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// True for errors that express a physics guard rather than bad usage.
    pub fn is_physics_guard(&self) -> bool {
        matches!(
            self,
            Error::UnboundedSpectrum { .. }
                | Error::SeriesOverflow { .. }
                | Error::TemperatureTooHigh { .. }
                | Error::Truncation { .. }
                | Error::DimensionCap { .. }
                | Error::BranchTracking { .. }
                | Error::EigenFailure { .. }
        )
    }
}
