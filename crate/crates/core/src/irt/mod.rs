//! Dichotomous IRT models (Rasch, 2PL, 3PL): response and information
//! functions, MML-EM estimation and person scoring.

mod em;
mod model;
mod quadrature;
mod scoring;

pub use em::{fit_mml, marginal_log_likelihood, FitConfig, GuessingPrior, IrtError, IrtFit, MONOTONE_SLACK};
pub use model::{icc, item_information, ItemParams, ModelKind};
pub use quadrature::{QuadratureGrid, QuadratureSpec};
pub use scoring::{eap_scores, test_information, theta_grid, AbilityEstimate, InfoPoint, TestInformation};

pub(crate) use em::probability_table;
