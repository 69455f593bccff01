//! Local-likelihood transformation kernel density estimation (LLTKDE) for
//! densities supported on the positive half-line.
//!
//! The estimators work by sending the data through a smooth increasing map
//! `T: (0, ∞) → ℝ` ([`transforms`]), estimating the density of `Y = T(X)` on
//! the whole real line with a local polynomial log-density fit ([`loclik`]),
//! and back-transforming through `f_X(x) = f_Y(T(x)) · T'(x)` ([`tkde`]).
//!
//! Around that core sit the pieces needed to use and evaluate it:
//!
//! - [`bandwidth`]: nearest-neighbour bandwidths, least-squares
//!   cross-validation, Sheather–Jones plug-in and the Gamma reference rule.
//! - [`competitors`]: Gamma-kernel, reflection, cut-and-normalise and
//!   non-negative boundary-corrected estimators.
//! - [`genf`]: the generalized-F test family and its seven benchmark presets.
//! - [`asymptotics`]: leading bias and variance expressions.
//! - [`bench`]: the Monte Carlo MIARE harness.

pub mod asymptotics;
pub mod bandwidth;
pub mod bench;
pub mod competitors;
pub mod error;
pub mod genf;
pub mod kernels;
pub mod loclik;
pub mod normal;
pub mod quadrature;
pub mod stats;
pub mod tkde;
pub mod transforms;

pub use bandwidth::SmoothingSpec;
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use tkde::DensityEstimate;
pub use transforms::Transformation;
