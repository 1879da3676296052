use thiserror::Error;

use crate::eigenbasis::Branch;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mu must be nonzero")]
    ZeroMu,
    #[error("omega must be positive, got {0}")]
    NonPositiveOmega(f64),
    #[error("lambda + mu^2 must be positive, got {0}")]
    DegenerateScaling(f64),
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },

    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepSizeUnderflow { s: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    MaxStepsExceeded(usize),
    #[error("tolerances must lie in (0, 1): rel = {rel}, abs = {abs}")]
    InvalidTolerance { rel: f64, abs: f64 },
    #[error("s = {s} outside the integrated domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("time span [{0}, {1}] must contain 0")]
    SpanExcludesOrigin(f64, f64),
    #[error("n_periods must be at least 16, got {0}")]
    TooFewPeriods(usize),

    #[error("value at z = 1 must be nonzero")]
    ZeroInitialValue,
    #[error("{0} branch is identically zero")]
    DegenerateBranch(Branch),
    #[error("eigen pair has a degenerate branch")]
    DegeneratePair,

    #[error("denominator of the phase ratio vanished at t = {0}")]
    DenominatorVanished(f64),
    #[error("|Phi| = {modulus} at t = {t} is not unimodular")]
    NonUnimodular { t: f64, modulus: f64 },
    #[error("-Im Theta = {value} <= 0 at t = {t}")]
    LogDomain { t: f64, value: f64 },

    #[error("value/derivative matrix is numerically singular (condition {0:e})")]
    SingularBasis(f64),
    #[error("monodromy matrix violates its structure: {0}")]
    StructureViolated(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroMu => "zero_mu",
            Error::NonPositiveOmega(_) => "non_positive_omega",
            Error::DegenerateScaling(_) => "degenerate_scaling",
            Error::NonFinite { .. } => "non_finite",
            Error::StepSizeUnderflow { .. } => "step_size_underflow",
            Error::MaxStepsExceeded(_) => "max_steps_exceeded",
            Error::InvalidTolerance { .. } => "invalid_tolerance",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::InvalidPath(_) => "invalid_path",
            Error::SpanExcludesOrigin(..) => "span_excludes_origin",
            Error::TooFewPeriods(_) => "too_few_periods",
            Error::ZeroInitialValue => "zero_initial_value",
            Error::DegenerateBranch(_) => "degenerate_branch",
            Error::DegeneratePair => "degenerate_pair",
            Error::DenominatorVanished(_) => "denominator_vanished",
            Error::NonUnimodular { .. } => "non_unimodular",
            Error::LogDomain { .. } => "log_domain",
            Error::SingularBasis(_) => "singular_basis",
            Error::StructureViolated(_) => "structure_violated",
            Error::Config(_) => "config",
        }
    }

    /// Whether the error stems from invalid input rather than from a computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::ZeroMu
                | Error::NonPositiveOmega(_)
                | Error::DegenerateScaling(_)
                | Error::NonFinite { .. }
                | Error::InvalidTolerance { .. }
                | Error::SpanExcludesOrigin(..)
                | Error::TooFewPeriods(_)
                | Error::Config(_)
        )
    }
}
