use thiserror::Error;

/// Crate-wide error type.
///
/// Numeric routines never panic on bad geometry; they report which
/// hypothesis failed so callers can decide whether to retry elsewhere.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// f1 and f2 fail the linear-independence test at the point, or the
    /// first-order lifts all vanish there; the classification hypotheses
    /// do not hold.
    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    /// Equilibrium angles requested where r^2 <= h12^2; the switching
    /// function has no pair of simple zeros.
    #[error("no real equilibrium angles: r^2 - h12^2 = {discriminant:e} <= 0")]
    NoRealAngles { discriminant: f64 },

    /// Jump controls requested outside the one-switching case.
    #[error("no control jump: requires r^2 > h12^2, got r^2 = {r2:e}, h12^2 = {h12_sq:e}")]
    NoJump { r2: f64, h12_sq: f64 },

    /// The feedback control on the degenerate locus divides by h12.
    #[error("singular control undefined: |h12| = {h12_abs:e} below tolerance")]
    SingularControlUndefined { h12_abs: f64 },

    /// A residual computation was requested at a covector not on {h1=h2=0}.
    #[error("not on singular locus: |h1| = {h1_abs:e}, |h2| = {h2_abs:e}")]
    NotOnSingularLocus { h1_abs: f64, h2_abs: f64 },

    /// The real-time vector field divides by rho and was evaluated at rho = 0.
    #[error("chart singular: real-time right-hand side needs rho > 0, got rho = {rho:e}")]
    ChartSingular { rho: f64 },

    /// The adaptive step controller could not meet the error target.
    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    /// A monitored residual left its admissible band during a degenerate-locus arc.
    #[error("drift exceeded at t = {t}: {monitor} = {value:e} > {tol:e}")]
    DriftExceeded {
        t: f64,
        monitor: &'static str,
        value: f64,
        tol: f64,
    },

    /// A scalar model integration failed.
    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    /// Direct search exhausted its budget without matching the target.
    #[error("unreachable: no control in the family hit the target within {tol:e} (best miss {best_miss:e})")]
    Unreachable { tol: f64, best_miss: f64 },

    /// No positive envelope constant exists for the supplied runs.
    #[error("envelope violated: {0}")]
    EnvelopeViolated(String),

    /// Invalid caller-supplied configuration or data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// System description file could not be parsed or resolved.
    #[error("system file error: {0}")]
    SpecFile(String),

    /// Filesystem error while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
