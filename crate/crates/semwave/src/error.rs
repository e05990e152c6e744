use thiserror::Error;

/// Coarse phase of a time step, used to annotate failures and to key the
/// per-routine wall-clock accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Routine {
    /// Potential solve: boundary conditions, linear solve, vertical velocity
    /// recovery, surface extraction.
    LaplaceSolve,
    /// Evaluation of the free-surface right-hand sides.
    EvaluateRhs,
    /// Vertical repositioning of the volume mesh under the current surface.
    LaplaceUpdate,
}

impl Routine {
    pub fn name(self) -> &'static str {
        match self {
            Routine::LaplaceSolve => "LaplaceSolve",
            Routine::EvaluateRhs => "EvaluateRHS",
            Routine::LaplaceUpdate => "LaplaceUpdate",
        }
    }
}

impl std::fmt::Display for Routine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural input fails validation. `what` names the
    /// offending parameter the way the caller spelled it (e.g. a config key).
    #[error("invalid parameter {what}: {why}")]
    InvalidParameter { what: String, why: String },

    /// Mesh geometry became unusable: zero/negative column height, tangled
    /// layers, degenerate element.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// An iterative solve stopped without meeting its tolerance.
    #[error("{routine}: linear solve failed to converge after {iterations} iterations (relative residual {rel_residual:.3e}, target {rtol:.1e})")]
    SolveFailure {
        routine: Routine,
        iterations: usize,
        rel_residual: f64,
        rtol: f64,
    },

    /// The operator handed to the conjugate gradient loop is not positive
    /// definite (p'Ap <= 0 observed).
    #[error("{routine}: operator is not positive definite (p'Ap = {curvature:.3e} at iteration {iteration})")]
    IndefiniteOperator {
        routine: Routine,
        curvature: f64,
        iteration: usize,
    },

    /// Non-finite values appeared in the evolved fields.
    #[error("{routine}: non-finite field values at t = {time:.6} (step {step}, stage {stage})")]
    BlowUp {
        routine: Routine,
        time: f64,
        step: usize,
        stage: usize,
    },

    /// A nonlinear solve (dispersion, stream function) did not converge.
    #[error("nonlinear solve '{what}' did not converge: {why}")]
    NonlinearFailure { what: String, why: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(what: impl Into<String>, why: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what: what.into(),
            why: why.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 validation,
    /// 3 numerical failure, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) => 2,
            Error::DegenerateGeometry(_)
            | Error::SolveFailure { .. }
            | Error::IndefiniteOperator { .. }
            | Error::BlowUp { .. }
            | Error::NonlinearFailure { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
