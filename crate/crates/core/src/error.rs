use thiserror::Error;

/// Every failure mode surfaced by the numerical modules.
///
/// Variant names are stable: the CLI reports them verbatim in failure reports.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("polynomial root finder did not converge: {0}")]
    RootFindingFailed(String),
    #[error("budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("landing point is not repelling: |multiplier| = {modulus}")]
    NotRepelling { modulus: f64 },
    #[error("point is not periodic of the given period (residual {residual:e})")]
    NotPeriodic { residual: f64 },
    #[error("continuation stuck at parameter fraction {fraction} (step {step:e})")]
    ContinuationStuck { fraction: f64, step: f64 },
    #[error("branch collision while transporting preimages (separation {separation:e})")]
    BranchCollision { separation: f64 },
    #[error("all fiber weights vanish")]
    DegenerateFiber,
    #[error("itinerary sets of the matched trees differ")]
    ItineraryMismatch,
    #[error("no sign change of the pressure on [{t_lo}, {t_hi}]")]
    NoBracket { t_lo: f64, t_hi: f64 },
    #[error("linearization disk search failed at the landing point")]
    LinearizationFailed,
    #[error("parameter is not a certified Misiurewicz map: {0}")]
    NotMisiurewicz(String),
    #[error("climb beyond the top floor {k_max}")]
    TruncationHit { k_max: usize },
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("iteration did not converge after {iterations} steps (drift {drift:e})")]
    NoConvergence { iterations: usize, drift: f64 },
    #[error("operator is not at the Bowen parameter (eta = {eta})")]
    NotAtBowenParameter { eta: f64 },
    #[error("equilibrium mass on the critical fiber is {mass:e}")]
    MassOnCriticalFiber { mass: f64 },
    #[error("grid graph is disconnected between the requested nodes")]
    Disconnected,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short variant name, used in CLI failure reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::RootFindingFailed(_) => "RootFindingFailed",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::NewtonDiverged { .. } => "NewtonDiverged",
            Error::NotRepelling { .. } => "NotRepelling",
            Error::NotPeriodic { .. } => "NotPeriodic",
            Error::ContinuationStuck { .. } => "ContinuationStuck",
            Error::BranchCollision { .. } => "BranchCollision",
            Error::DegenerateFiber => "DegenerateFiber",
            Error::ItineraryMismatch => "ItineraryMismatch",
            Error::NoBracket { .. } => "NoBracket",
            Error::LinearizationFailed => "LinearizationFailed",
            Error::NotMisiurewicz(_) => "NotMisiurewicz",
            Error::TruncationHit { .. } => "TruncationHit",
            Error::ParamOutOfRange(_) => "ParamOutOfRange",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotAtBowenParameter { .. } => "NotAtBowenParameter",
            Error::MassOnCriticalFiber { .. } => "MassOnCriticalFiber",
            Error::Disconnected => "Disconnected",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
