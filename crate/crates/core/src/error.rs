//! Crate-wide error type.

use thiserror::Error;

/// Failure modes across the toolkit. Variants carry the witness data needed
/// to act on the failure (offending multi-index, achieved gap, pivot size).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system file rejected: {0}")]
    SystemFile(String),

    #[error("matrix not diagonalizable within tolerance: {detail}")]
    NonDiagonalizable { detail: String },

    #[error("contour passes within {distance:.3e} of eigenvalue {eigenvalue} (margin {margin:.3e})")]
    ContourTouchesSpectrum {
        eigenvalue: String,
        distance: f64,
        margin: f64,
    },

    #[error("resolvent near-singular: LU pivot {pivot:.3e} below 1e-12")]
    NearSingular { pivot: f64 },

    #[error("multi-index budget exceeded: C({n}+{k},{k}) = {count} > {budget}")]
    BudgetExceeded {
        n: usize,
        k: u32,
        count: u128,
        budget: u128,
    },

    #[error("integrator exceeded {max_steps} steps at t = {t:.6e}")]
    StepLimitExceeded { max_steps: usize, t: f64 },

    #[error("state non-finite or past blow-up bound at t = {t:.6e}")]
    NonFinite { t: f64 },

    #[error("resonant denominator for target {target}: |<m,lambda> - lambda_i| = {gap:.3e} < {tol:.3e} at m = {witness:?}")]
    ResonantDenominator {
        target: usize,
        witness: Vec<u32>,
        gap: f64,
        tol: f64,
    },

    #[error("equilibrium not exponentially stable: max Re(lambda) = {max_re:.6e}")]
    NotGes { max_re: f64 },

    #[error("generated Lie basis exceeded cap of {cap} elements")]
    DimensionExplosion { cap: usize },

    #[error("adjoint action leaves basis span: residual {residual:.3e} exceeds {tol:.3e}")]
    NotInvariant { residual: f64, tol: f64 },

    #[error("precondition failed ({condition}): {witness}")]
    ConditionFailed { condition: String, witness: String },

    #[error("Lie algebra certificate verdict is {verdict}, bilinearization not certified")]
    CertificateNotIsomorphic { verdict: String },

    #[error("bilinear fit residual {residual:.3e} exceeds {threshold:.3e} for control {control}")]
    ResidualTooLarge {
        control: usize,
        residual: f64,
        threshold: f64,
    },

    #[error("dictionary Gram matrix ill-conditioned: cond = {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("no generator eigenvalue within {limit:.3e} of reference {target}")]
    NoMatch { target: String, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a checked mathematical condition (as opposed to
    /// numerical or input errors). The CLI maps these to a distinct exit code.
    pub fn is_condition_failure(&self) -> bool {
        matches!(
            self,
            Error::ResonantDenominator { .. }
                | Error::NotGes { .. }
                | Error::ConditionFailed { .. }
                | Error::CertificateNotIsomorphic { .. }
                | Error::ResidualTooLarge { .. }
        )
    }

    /// Stable machine-readable reason code for reports and exit messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SystemFile(_) => "system-file",
            Error::NonDiagonalizable { .. } => "non-diagonalizable",
            Error::ContourTouchesSpectrum { .. } => "contour-touches-spectrum",
            Error::NearSingular { .. } => "near-singular",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::StepLimitExceeded { .. } => "step-limit-exceeded",
            Error::NonFinite { .. } => "non-finite",
            Error::ResonantDenominator { .. } => "resonant-denominator",
            Error::NotGes { .. } => "not-ges",
            Error::DimensionExplosion { .. } => "dimension-explosion",
            Error::NotInvariant { .. } => "not-invariant",
            Error::ConditionFailed { .. } => "condition-failed",
            Error::CertificateNotIsomorphic { .. } => "certificate-not-isomorphic",
            Error::ResidualTooLarge { .. } => "residual-too-large",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::NoMatch { .. } => "no-match",
        }
    }
}
