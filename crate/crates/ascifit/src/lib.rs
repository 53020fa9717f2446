//! Isotonic regression when an adversary may flip the sign of every response.
//!
//! The observation model is `r[i] = xi[i] * (mu[i] + eps[i])` with a
//! non-decreasing signal `mu` bounded below by a known floor `eta > 0`,
//! Gaussian noise `eps[i] ~ N(0, sigma^2)`, and arbitrary signs
//! `xi[i] in {-1, +1}` chosen with full knowledge of the realized
//! responses. Taking absolute values turns each response into a folded
//! normal draw, which suggests the three-step fit implemented here:
//!
//! 1. pool-adjacent-violators on `|r|` ([`isotonic`]),
//! 2. second-moment matching to recover the noise scale ([`estimator::solve_sigma`]),
//! 3. inversion of the folded-normal mean to land back on the signal scale
//!    ([`estimator::fit`]).
//!
//! [`datagen`] provides seeded generators for the corruption model,
//! [`sim`] a deterministic replication harness with CSV output, and
//! [`oracle`] independent brute-force references used for verification.

#![forbid(unsafe_code)]

pub mod datagen;
pub mod estimator;
pub mod folded;
pub mod isotonic;
pub mod norm;
pub mod oracle;
pub mod sim;

mod error;

pub use error::{Error, Result};
pub use estimator::{fit, EstimatorConfig, FitResult};
