use thiserror::Error;

/// Which edge of the transonic window a wedge angle fell outside of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum WindowSide {
    /// At or below the sonic angle: the weak downstream state is not subsonic.
    BelowSonic,
    /// At or above the detachment angle.
    AboveDetachment,
}

impl std::fmt::Display for WindowSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowSide::BelowSonic => write!(f, "wedge angle at or below the sonic angle"),
            WindowSide::AboveDetachment => write!(f, "wedge angle at or above the detachment angle"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("squared speed {q2} outside the admissible range [0, {limit}]")]
    Vacuum { q2: f64, limit: f64 },

    #[error("shock detached: wedge angle {theta_w} rad is not below the detachment angle {theta_w_star} rad")]
    Detached { theta_w: f64, theta_w_star: f64 },

    #[error("weak downstream state stays supersonic up to detachment; no transonic window")]
    NoTransonicWindow,

    #[error("not on the weak transonic branch: {side} (window is ({theta_s_star}, {theta_w_star}) rad, got {theta_w})")]
    NotTransonic {
        side: WindowSide,
        theta_w: f64,
        theta_s_star: f64,
        theta_w_star: f64,
    },

    #[error("state is not strictly subsonic")]
    NotSubsonic,

    #[error("stability condition violated: {0}")]
    NotWeakTransonic(String),

    #[error("coordinate transform singular: {0}")]
    TransformSingular(String),

    #[error("linear solver failed after {iterations} iterations, relative residual {residual:e}")]
    SolverFailed {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("shock update failed at y2 = {y2}, y3 = {y3}")]
    ShockUpdateFailed { y2: f64, y3: f64 },

    #[error("iteration not contracting: kappa >= 1 for {steps} consecutive steps (last kappa {kappa})")]
    NotContracting { steps: usize, kappa: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
