use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("non-finite value in stage {stage} ({op})")]
    StageNonFinite { stage: usize, op: &'static str },

    #[error("loss is not a scalar (shape {0:?})")]
    NotScalar(Vec<usize>),

    #[error("loss does not depend on any trainable leaf")]
    Detached,

    #[error("ADMM diverged at iteration {iteration}: objective {objective:e} exceeds 10x the minimum {minimum:e}")]
    Divergence {
        iteration: usize,
        objective: f64,
        minimum: f64,
        trace: Vec<f64>,
    },

    #[error("SVD did not converge after {0} sweeps")]
    SvdNoConvergence(usize),

    #[error("dense operator of {0} columns exceeds the 4096-column guard")]
    SizeGuard(usize),

    #[error("necessary condition violated: {rotations} rotations x gamma {gamma} = {product} <= 1; the stacked operator cannot reach full column rank")]
    RankCondition {
        rotations: usize,
        gamma: f64,
        product: f64,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    TrainingNonFinite { epoch: usize, batch: usize },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors that come from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::StageNonFinite { .. }
                | Error::Divergence { .. }
                | Error::SvdNoConvergence(_)
                | Error::TrainingNonFinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
