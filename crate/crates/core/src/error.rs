use num_complex::Complex64;
use thiserror::Error;

/// Failure taxonomy shared by every numerical routine in the crate.
///
/// Variant names are stable: the CLI prints them verbatim on numerical
/// failure, see [`Error::kind`].
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("root iteration hit its cap after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Vec<Complex64>,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("coefficient growth exceeds the symbolic composition range (degree {degree})")]
    Overflow { degree: usize },
    #[error("period {period} needs {points} periodic points, above the cap {cap}")]
    PeriodTooLarge {
        period: u32,
        points: usize,
        cap: usize,
    },
    #[error("root finding failed: {0}")]
    RootFindingFailed(Box<Error>),
    #[error("period of {} point(s) is ambiguous at tolerance (parabolic degeneracy)", points.len())]
    AmbiguousPeriod { points: Vec<Complex64> },
    #[error("orbit entered the neighbourhood of (0,0)")]
    IndeterminatePoint,
    #[error("matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("pullback repeatedly hit critical values ({failures} consecutive failures)")]
    CriticalPullback { failures: usize },
    #[error("all fixed-point multiplier pairings satisfy mu_i*mu_j = 1: {multipliers:?}")]
    DegenerateModuli { multipliers: [Complex64; 3] },
    #[error("not in a hyperbolic component: {count_n} roots of p_n and {count_m} of p_m in the unit disc")]
    NotInComponent { count_n: usize, count_m: usize },
    #[error("found {found} intersection points, expected {expected}; worst residual {:.1e}", residuals.iter().copied().fold(0.0, f64::max))]
    CountMismatch {
        found: usize,
        expected: usize,
        residuals: Vec<f64>,
    },
    #[error("{masked} of {interior} interior nodes are masked")]
    TooManyMasked { masked: usize, interior: usize },
    #[error("evaluation point coincides with an atom at {0}")]
    AtomCollision(Complex64),
    #[error("deflation left {found} exact-period centers, expected {expected}")]
    DeflationMismatch { found: usize, expected: usize },
    #[error("continuation Jacobian is singular (condition {condition:e}) at t = {t}")]
    SingularJacobian { condition: f64, t: Complex64 },
    #[error("step halving limit reached at t = {t}")]
    StepCollapse { t: Complex64 },
    #[error("guide polynomial has {roots_in_disc} roots in the unit disc at t = {t}")]
    LeftGuideRegion { roots_in_disc: usize, t: Complex64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Taxonomy name, e.g. `AmbiguousPeriod`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "NonConvergence",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::Overflow { .. } => "Overflow",
            Error::PeriodTooLarge { .. } => "PeriodTooLarge",
            Error::RootFindingFailed(_) => "RootFindingFailed",
            Error::AmbiguousPeriod { .. } => "AmbiguousPeriod",
            Error::IndeterminatePoint => "IndeterminatePoint",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::CriticalPullback { .. } => "CriticalPullback",
            Error::DegenerateModuli { .. } => "DegenerateModuli",
            Error::NotInComponent { .. } => "NotInComponent",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::TooManyMasked { .. } => "TooManyMasked",
            Error::AtomCollision(_) => "AtomCollision",
            Error::DeflationMismatch { .. } => "DeflationMismatch",
            Error::SingularJacobian { .. } => "SingularJacobian",
            Error::StepCollapse { .. } => "StepCollapse",
            Error::LeftGuideRegion { .. } => "LeftGuideRegion",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
