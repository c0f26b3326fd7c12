use thiserror::Error;

/// Every failure the engines can report.
///
/// [`Error::code`] gives a stable machine-readable identifier for each
/// variant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("variable x{index} is outside the map dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("derivative bound is not finite")]
    UnboundedDerivative,
    #[error("component {component} does not descend to the torus (non-integer degree)")]
    NotPeriodic { component: usize },
    #[error("working precision cap of {bits} bits reached")]
    PrecisionUnreachable { bits: u32 },
    #[error("noise epsilon {epsilon} outside the admissible range (0, {max})")]
    EpsilonOutOfRange { epsilon: f64, max: f64 },
    #[error("operation requires an analytic (wrapped Gaussian) kernel")]
    UnsupportedKernel,
    #[error("total masses differ: {a} vs {b}")]
    MassMismatch { a: f64, b: f64 },
    #[error("partitions do not match: {a} vs {b} atoms")]
    PartitionMismatch { a: usize, b: usize },
    #[error("cover mesh {mesh} too coarse: inner image of atom {atom} is empty")]
    MeshTooCoarse { atom: usize, mesh: f64 },
    #[error("threshold {threshold} is not positive; epsilon too small for the partition")]
    DegenerateScale { threshold: f64 },
    #[error("power iteration stalled at residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("matrix has no nonzero row")]
    ZeroMatrix,
    #[error("inner irreducible part of the cover is empty")]
    NotIrreducible,
    #[error("certificate unobtainable: {0}")]
    CertificateUnobtainable(String),
    #[error("resource cap: {atoms} atoms exceed the maximum {max}")]
    ResourceCap { atoms: usize, max: usize },
    #[error("e^gamma * diam = {value} is not below 1")]
    GammaTooLarge { value: f64 },
    #[error("quadrature could not reach {tol} (best {achieved})")]
    QuadratureFailure { tol: f64, achieved: f64 },
    #[error("contraction condition violated: {0}")]
    ContractionViolated(String),
    #[error("{have} samples, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax_error",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnboundedDerivative => "unbounded_derivative",
            Error::NotPeriodic { .. } => "not_periodic",
            Error::PrecisionUnreachable { .. } => "precision_unreachable",
            Error::EpsilonOutOfRange { .. } => "epsilon_out_of_range",
            Error::UnsupportedKernel => "unsupported_kernel",
            Error::MassMismatch { .. } => "mass_mismatch",
            Error::PartitionMismatch { .. } => "partition_mismatch",
            Error::MeshTooCoarse { .. } => "mesh_too_coarse",
            Error::DegenerateScale { .. } => "degenerate_scale",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ZeroMatrix => "zero_matrix",
            Error::NotIrreducible => "not_irreducible",
            Error::CertificateUnobtainable(_) => "certificate_unobtainable",
            Error::ResourceCap { .. } => "resource_cap",
            Error::GammaTooLarge { .. } => "gamma_too_large",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::ContractionViolated(_) => "contraction_violated",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
