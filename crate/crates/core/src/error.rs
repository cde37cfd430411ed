use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sound speed is not positive: c = {c} at x = {x:?}")]
    NonPositiveSpeed { c: f64, x: Vec<f64> },

    #[error("momentum magnitude {norm:e} is below the floor {p_min:e}")]
    MomentumUnderflow { norm: f64, p_min: f64 },

    #[error("Im(M) lost positive definiteness: smallest eigenvalue {min_eig:e} at t = {t}")]
    LostPositivity { min_eig: f64, t: f64 },

    #[error("adaptive integrator failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("initial phase has vanishing gradient at x0 = {x0:?}")]
    ZeroGradientPhase { x0: Vec<f64> },

    #[error("initial manifold is empty: no node carries a nonzero amplitude")]
    EmptySupport,

    #[error("grid spacing {h:e} exceeds the resolution limit {limit:e}")]
    GridTooCoarse { h: f64, limit: f64 },

    #[error("characteristic backtrace left the phase grid at (x, p) = ({x}, {p})")]
    OutOfDomain { x: f64, p: f64 },

    #[error("|g_p| = {value:e} is below 1e-8 at (x, p) = ({x}, {p})")]
    SingularGp { value: f64, x: f64, p: f64 },

    #[error("level set w crosses zero over fewer than two cells near (x, p) = ({x}, {p})")]
    DeltaUnresolved { x: f64, p: f64 },

    #[error("CFL condition violated: dt = {dt:e} exceeds {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("unknown initial-data preset `{0}` (expected plane1d, chirp1d, radial3d or focus2d)")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownPreset(_) | Error::DimensionMismatch { .. } | Error::Json(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
