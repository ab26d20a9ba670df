//! Reliability summary: alpha, omega total and the test information curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctt::{cronbach_alpha, CttError};
use crate::dimensionality::FactorSolution;
use crate::ingest::ResponseMatrix;
use crate::irt::{test_information, IrtFit, TestInformation};

/// Logistic-to-normal-ogive scaling constant.
pub const D_SCALE: f64 = 1.702;
pub const DEFAULT_RELIABILITY_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum ReliabilityError {
    #[error("omega needs at least 2 items, found {0}")]
    TooFewItems(usize),
    #[error("loading or uniqueness for item {0} is not finite")]
    UndefinedLoading(usize),
    #[error("loadings and uniquenesses differ in length")]
    LengthMismatch,
    #[error("solution, fit and data cover different items")]
    ItemMismatch,
    #[error(transparent)]
    Ctt(#[from] CttError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaSource {
    #[default]
    Factor,
    IrtSlopes,
}

/// ω_t = (Σλ)² / ((Σλ)² + Σψ).
pub fn omega_from_loadings(loadings: &[f64], uniquenesses: &[f64]) -> Result<f64, ReliabilityError> {
    if loadings.len() != uniquenesses.len() {
        return Err(ReliabilityError::LengthMismatch);
    }
    if loadings.len() < 2 {
        return Err(ReliabilityError::TooFewItems(loadings.len()));
    }
    if let Some(i) = loadings.iter().zip(uniquenesses).position(|(l, p)| !l.is_finite() || !p.is_finite()) {
        return Err(ReliabilityError::UndefinedLoading(i));
    }
    let common = loadings.iter().sum::<f64>().powi(2);
    Ok(common / (common + uniquenesses.iter().sum::<f64>()))
}

pub fn omega_total(sol: &FactorSolution) -> Result<f64, ReliabilityError> {
    omega_from_loadings(&sol.loadings, &sol.uniquenesses)
}

/// Omega from IRT slopes converted to normal-ogive loadings.
pub fn omega_from_irt(fit: &IrtFit) -> Result<f64, ReliabilityError> {
    let loadings: Vec<f64> = fit.items.iter().map(|p| p.a / (p.a * p.a + D_SCALE * D_SCALE).sqrt()).collect();
    let uniq: Vec<f64> = loadings.iter().map(|l| 1.0 - l * l).collect();
    omega_from_loadings(&loadings, &uniq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub alpha: f64,
    pub omega_total: f64,
    pub omega_source: OmegaSource,
    /// The other omega route, for cross-checking.
    pub omega_alternate: Option<f64>,
    pub tif_peak_theta: f64,
    pub tif_peak_value: f64,
    pub se_at_peak: f64,
    pub threshold: f64,
    pub alpha_adequate: bool,
    pub omega_adequate: bool,
    pub warnings: Vec<String>,
    pub information: TestInformation,
}

pub fn reliability_report(
    m: &ResponseMatrix,
    sol: &FactorSolution,
    fit: &IrtFit,
    thetas: &[f64],
    source: OmegaSource,
    threshold: f64,
) -> Result<ReliabilityReport, ReliabilityError> {
    if sol.item_ids.as_slice() != m.item_ids() || fit.item_ids.as_slice() != m.item_ids() {
        return Err(ReliabilityError::ItemMismatch);
    }
    let alpha = cronbach_alpha(&m.to_f64_matrix())?;
    let factor = omega_total(sol)?;
    let irt = omega_from_irt(fit)?;
    let (omega, alternate) = match source {
        OmegaSource::Factor => (factor, irt),
        OmegaSource::IrtSlopes => (irt, factor),
    };
    let information = test_information(fit, thetas);
    let mut warnings = Vec::new();
    if alpha < 0.0 {
        warnings.push(format!("negative alpha ({alpha:.3}): items covary negatively on average"));
    }
    if omega < 0.0 {
        warnings.push(format!("negative omega ({omega:.3})"));
    }
    if !sol.heywood_items.is_empty() {
        warnings.push(format!("Heywood cases in factor solution: {}", sol.heywood_items.join(", ")));
    }
    Ok(ReliabilityReport {
        alpha,
        omega_total: omega,
        omega_source: source,
        omega_alternate: Some(alternate),
        tif_peak_theta: information.peak_theta,
        tif_peak_value: information.peak_value,
        se_at_peak: information.se_at_peak(),
        threshold,
        alpha_adequate: alpha >= threshold,
        omega_adequate: omega >= threshold,
        warnings,
        information,
    })
}
