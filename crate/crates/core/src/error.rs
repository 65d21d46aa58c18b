use thiserror::Error;

/// Every failure the laboratory can report.
///
/// Numeric failures carry the quantity that tripped them so a run manifest
/// can record it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst relative residual {worst_residual:.3e})")]
    NonConvergence { iterations: usize, worst_residual: f64 },

    #[error("ground state positivity violated (min/max ratio {ratio:.3e})")]
    PositivityViolated { ratio: f64 },

    #[error("field is identically zero")]
    ZeroField,

    #[error("patch too large for lambda (min psi {min_psi:.3e})")]
    PatchTooLarge { min_psi: f64 },

    #[error("input is not divergence-free in the weighted sense (gradient residual {residual:.3e})")]
    NotDivergenceFree { residual: f64 },

    #[error("Beltrami coefficient not strictly contracting (sup |mu| = {k_sup})")]
    DistortionTooLarge { k_sup: f64 },

    #[error("Beltrami iteration stalled at step {iteration} (increment ratio {ratio:.4})")]
    BeltramiStall { iteration: usize, ratio: f64 },

    #[error("map not injective on grid (min Jacobian {jacobian_min:.3e})")]
    NotInjective { jacobian_min: f64 },

    #[error("Newton inversion failed at {failed} of {total} target points")]
    InversionFailure { failed: usize, total: usize },

    #[error("cylinder extension residual {residual:.3e} above tolerance")]
    ExtensionResidual { residual: f64 },

    #[error("unique continuation alarm: sup over control set vanished (lambda = {lambda})")]
    UcpViolation { lambda: f64 },

    #[error("support precondition violated: {0}")]
    Support(String),

    #[error("invalid radii: {0}")]
    Radii(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
