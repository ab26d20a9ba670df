//! Checks of the IRT assumptions: unidimensionality through a one-factor
//! model on tetrachoric correlations, local independence through Q3.

mod factor;
mod q3;
mod tetrachoric;

use thiserror::Error;

pub use factor::{
    rmsea_interval, single_factor_fit, smooth_correlation, FactorCriteria, FactorSolution,
    UnidimensionalityThresholds, PSI_FLOOR,
};
pub use q3::{q3, q3_from_residuals, Q3Pair, Q3Report, DEFAULT_Q3_THRESHOLD};
pub use tetrachoric::{
    tetrachoric, tetrachoric_matrix, PairFlag, TetrachoricEstimate, TetrachoricMatrix, TwoByTwo, BOUNDARY_RHO,
};

#[derive(Debug, Error, PartialEq)]
pub enum DimensionalityError {
    #[error("an item in the pair has no response variation")]
    UndefinedPair,
    #[error("single-factor model needs at least 4 items, found {0}")]
    TooFewItems(usize),
    #[error("correlation matrix is not positive definite after smoothing")]
    NotPositiveDefinite,
    #[error("factor model did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("no degrees of freedom remain after excluding flagged pairs")]
    NoDegreesOfFreedom,
    #[error("fit and response matrix cover different items")]
    ItemMismatch,
    #[error("expected {expected} ability estimates, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}
