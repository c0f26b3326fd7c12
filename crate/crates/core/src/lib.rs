//! Certified ergodic decomposition and invariant densities for randomly
//! perturbed maps of the torus.
//!
//! The crate is organised by engine:
//!
//! * [`mapdsl`] parses maps and evaluates them with rigorous error control.
//! * [`noise`] holds the uniform-ball and wrapped-Gaussian kernels.
//! * [`measures`] has piecewise-constant and piecewise-analytic densities
//!   and the TV and W1 distances.
//! * [`cover`] decomposes the perturbed system into ergodic components.
//! * [`gridsolver`] computes invariant densities on a regular grid with a
//!   total-variation certificate.
//! * [`spectral`] computes invariant densities for analytic noise from
//!   truncated Taylor expansions, with a sup-norm certificate.
//! * [`montecarlo`] simulates the chain as an independent oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod cover;
pub mod gridsolver;
pub mod mapdsl;
pub mod measures;
pub mod montecarlo;
pub mod noise;
pub mod rng;
pub mod spectral;
pub mod torus;

pub use error::{Error, Result};

pub use cover::{decompose, Cover, DecompositionResult, DecompositionStatus, IterationGraph};
pub use gridsolver::{DoeblinCertificate, ErrorCertificate, GridOperator};
pub use mapdsl::{load_map, parse_map, Dyadic, MapSpec};
pub use measures::{AnalyticDensity, GridDensity};
pub use montecarlo::Trajectory;
pub use noise::{NoiseKind, NoiseModel};
pub use spectral::{SpectralOperator, TruncationBudget};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
