use thiserror::Error;

/// Errors raised by problem construction and the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {field}: expected {expected}, got {found}")]
    DimensionMismatch {
        field: String,
        expected: String,
        found: String,
    },
    #[error("non-finite entry in {field}")]
    NonFiniteEntry { field: String },
    #[error("{field} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    AsymmetryTooLarge { field: String, asymmetry: f64 },
    #[error("{field} is not positive definite (smallest eigenvalue {min_eigenvalue:.6e}){}", assumption_suffix(.assumption))]
    NotPositiveDefinite {
        field: String,
        min_eigenvalue: f64,
        assumption: Option<&'static str>,
    },
    #[error("{field} must be positive, got {value}")]
    NonPositiveParameter { field: String, value: f64 },
    #[error("assumption ({0}) violated: {1}")]
    AssumptionViolated(&'static str, String),
    #[error("integration failed at t = {t:.6e}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("fast dynamics block A22 is singular")]
    SingularFastBlock,
    #[error("reduced state weight is not positive semidefinite (smallest eigenvalue {0:.6e})")]
    NotPsd(f64),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("eigenvalue split failed: {stable} eigenvalues with negative real part, expected {expected}")]
    EigSplit { stable: usize, expected: usize },
    #[error("block diagonalization residual {residual:.3e} exceeds {tolerance:.3e}")]
    DecompositionResidual { residual: f64, tolerance: f64 },
    #[error("{matrix} is numerically singular (condition number {condition:.3e})")]
    Nonsingularity { matrix: &'static str, condition: f64 },
    #[error("trajectory violates the primal dynamics (residual {residual:.3e} > {tolerance:.3e})")]
    InfeasibleTrajectory { residual: f64, tolerance: f64 },
    #[error("grid has {points} points; at least {required} are needed for differentiation")]
    GridTooCoarse { points: usize, required: usize },
    #[error("expansion order {0} is not implemented (only order 0)")]
    UnsupportedOrder(usize),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

fn assumption_suffix(a: &Option<&'static str>) -> String {
    match a {
        Some(tag) => format!(" [assumption ({tag})]"),
        None => String::new(),
    }
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
