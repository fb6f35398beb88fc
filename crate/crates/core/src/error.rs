use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no homoclinic found in bracket: {0}")]
    NoHomoclinic(String),
    #[error("resolution insufficient: residual {residual:.3e} exceeds {tol:.3e}")]
    ResolutionInsufficient { residual: f64, tol: f64 },
    #[error("profile does not decay: phi(L) = {0:.3e}")]
    NotDecayed(f64),
    #[error("lambda on spectrum: {0}")]
    LambdaOnSpectrum(String),
    #[error("eigensolver failed: {0}")]
    EigenSolver(String),
    #[error("no admissible a: {0}")]
    NoAdmissibleContour(String),
    #[error("s out of range: {0} (need 1/2 < s < 2)")]
    SOutOfRange(f64),
    #[error("Newton diverged after {iters} iterations (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("Jacobian singular: d/dalpha mass = {0:.3e}")]
    JacobianSingular(f64),
    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),
    #[error("blow-up detected at t = {t}: max |u| = {max_amp:.3e}")]
    BlowUp { t: f64, max_amp: f64 },
    #[error("step-size underflow: {0}")]
    StepUnderflow(String),
    #[error("stiff integration failure: {0}")]
    Integration(String),
    #[error("run failed at t = {t}: {cause}; last state: {snapshot}")]
    RunFailed { t: f64, cause: Box<Error>, snapshot: String },
}

impl Error {
    /// True for failures caused by bad inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_) | Error::Precondition(_) | Error::SOutOfRange(_)
        )
    }
}
