//! Standardized OLS with the usual residual diagnostics.

mod diagnostics;
mod ols;

use thiserror::Error;

pub use diagnostics::{
    breusch_pagan, diagnostics, durbin_watson, durbin_watson_annotation, shapiro_wilk, BreuschPagan,
    BreuschPaganVariant, DiagnosticsReport, DurbinWatson, ShapiroWilk,
};
pub use ols::{
    interaction_terms, nested_f_test, ols, regress_table, Coefficient, NestedFTest, OlsOptions, RegressionResult,
    INTERCEPT,
};

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("predictors are collinear: {0:?}")]
    CollinearPredictors(Vec<String>),
    #[error("auxiliary regression is rank deficient: {0:?}")]
    AuxiliaryRankDeficient(Vec<String>),
    #[error("{n} observations are too few for {k} predictors")]
    TooFewObservations { n: usize, k: usize },
    #[error("at least one predictor is required")]
    NoPredictors,
    #[error("column {0} has the wrong length")]
    LengthMismatch(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("non-finite value in regression input")]
    NonFinite,
    #[error("outcome has zero variance")]
    ConstantOutcome,
    #[error("residuals are constant")]
    ConstantResiduals,
    #[error("sample size {0} is outside the supported range")]
    SampleSize(usize),
    #[error("models are not nested")]
    NotNested,
}
