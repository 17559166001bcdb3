//! Row-blocked kernels driven by the worker pool: connected components by
//! label propagation, and ridge regression through the normal equations.

mod cc;
mod linreg;

use thiserror::Error;

use crate::queueing::QueueError;
use crate::telemetry::RunReport;
use crate::workerpool::PoolError;

pub use cc::{cc_iterate_block, connected_components, CcOutput, CC_OP};
pub use linreg::{
    gram_block, linreg_direct, linreg_train, solve_spd, DenseMatrix, ExactSum, GramPartial, LinregOutput,
    RegressionModel, DEFAULT_LAMBDA, LINREG_OP,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("labels still changing after {iterations} iterations")]
    NotConverged { iterations: usize, labels: Vec<u32>, report: Box<RunReport> },
    #[error("matrix is not positive definite (pivot {pivot})")]
    SingularSystem { pivot: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}
