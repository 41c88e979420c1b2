use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no obstacle: {0}")]
    NoObstacle(String),

    #[error("exponent {exponent:.3} exceeds cap {cap}; rescale t")]
    ExponentOverflow { exponent: f64, cap: f64 },

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("conflicting essential constraints at node {node}, component {component}")]
    ConstraintConflict { node: usize, component: usize },

    #[error(
        "solver did not converge: iters={iterations} relres={relative_residual:.3e} \
         cond_est={cond_est:.3e} (possible resonance)"
    )]
    NotConverged {
        iterations: usize,
        relative_residual: f64,
        cond_est: f64,
    },

    #[error("zero pivot at row {0} in direct factorization (possible resonance)")]
    ZeroPivot(usize),

    #[error("solver: {0}")]
    Solver(String),

    #[error("mismatched quadrature sets: {0}")]
    QuadratureMismatch(String),

    #[error("no obstacle detected along direction ({:.4}, {:.4}, {:.4})", .0[0], .0[1], .0[2])]
    NoObstacleDetected([f64; 3]),

    #[error("inconsistent estimates: {0}")]
    InconsistentEstimates(String),

    #[error("unknown {kind} strategy '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
