use thiserror::Error;

/// Every fallible routine in the crate reports through this enum. The
/// `code()` strings are stable and surface verbatim in CLI output.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CknError {
    #[error("degenerate denominator in the interpolation exponent: {0}")]
    DegenerateDenominator(String),
    #[error("parameters outside the admissible region: {0}")]
    Invalid(String),
    #[error("N - p - mu must be positive, got {0}")]
    HardyDenominator(f64),
    #[error("branch preconditions violated: {0}")]
    BranchMismatch(String),
    #[error("family does not fit the parameter regime: {0}")]
    FamilyRegimeMismatch(String),
    #[error("scale parameter must be positive: {0}")]
    BadScale(String),
    #[error("malformed grid profile: {0}")]
    BadGrid(String),
    #[error("integral diverges at the {endpoint}")]
    DivergentIntegral { endpoint: Endpoint },
    #[error("weight |x|^-t with t = {t} is not locally integrable in dimension {n}")]
    DivergentWeight { t: f64, n: usize },
    #[error("moment diverges: {0}")]
    DivergentMoment(String),
    #[error("Gamma argument must be positive: {0}")]
    InvalidGammaArgument(String),
    #[error(
        "quadrature tolerance {requested:e} unmet, best estimate {estimate} with error {error:e}"
    )]
    ToleranceUnmet {
        requested: f64,
        estimate: f64,
        error: f64,
    },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("point too close to the origin: |x| = {0:e}")]
    NearSingularPoint(f64),
    #[error("gauge exponent rho = {0} does not define a norm")]
    NotANorm(f64),
    #[error("profile cannot be fitted: {0}")]
    Unfittable(String),
    #[error("dimension {0} unsupported here (needs an integer in 2..=6)")]
    UnsupportedDimension(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Origin,
    Infinity,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Origin => write!(f, "origin"),
            Endpoint::Infinity => write!(f, "infinity"),
        }
    }
}

impl CknError {
    pub fn code(&self) -> &'static str {
        match self {
            CknError::DegenerateDenominator(_) => "degenerate-denominator",
            CknError::Invalid(_) => "invalid-parameters",
            CknError::HardyDenominator(_) => "hardy-denominator",
            CknError::BranchMismatch(_) => "branch-mismatch",
            CknError::FamilyRegimeMismatch(_) => "family-regime-mismatch",
            CknError::BadScale(_) => "bad-scale",
            CknError::BadGrid(_) => "bad-grid",
            CknError::DivergentIntegral { .. } => "divergent-integral",
            CknError::DivergentWeight { .. } => "divergent-weight",
            CknError::DivergentMoment(_) => "divergent-moment",
            CknError::InvalidGammaArgument(_) => "invalid-gamma-argument",
            CknError::ToleranceUnmet { .. } => "tolerance-unmet",
            CknError::NonFinite(_) => "non-finite",
            CknError::NearSingularPoint(_) => "near-singular-point",
            CknError::NotANorm(_) => "not-a-norm",
            CknError::Unfittable(_) => "unfittable",
            CknError::UnsupportedDimension(_) => "unsupported-dimension",
            CknError::Argument(_) => "invalid-argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, CknError>;

/// Integer dimension check for routines that need an actual Euclidean space.
pub(crate) fn integer_dimension(n: f64, lo: usize, hi: usize) -> Result<usize> {
    if n.fract() != 0.0 || n < lo as f64 || n > hi as f64 {
        return Err(CknError::UnsupportedDimension(n));
    }
    Ok(n as usize)
}
