use serde::{Deserialize, Serialize};

use super::FitError;
use crate::irt::IrtFit;
use crate::stats::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

/// AIC = −2ℓ + 2k, BIC = −2ℓ + k ln N.
pub fn information_criteria_raw(loglik: f64, k: usize, n: f64) -> InformationCriteria {
    let k = k as f64;
    let aic = -2.0 * loglik + 2.0 * k;
    let bic = if k == 0.0 { -2.0 * loglik } else { -2.0 * loglik + k * n.ln() };
    InformationCriteria { aic, bic }
}

pub fn information_criteria(fit: &IrtFit) -> InformationCriteria {
    information_criteria_raw(fit.loglik, fit.k, fit.n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub restricted: String,
    pub unrestricted: String,
    /// Deviance difference, floored at zero.
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    /// The unrestricted model fit worse than the restricted one.
    pub negative_difference: bool,
}

/// Likelihood-ratio test of nested models (Rasch ⊂ 2PL ⊂ 3PL).
pub fn lrt(restricted: &IrtFit, unrestricted: &IrtFit) -> Result<LrtResult, FitError> {
    if restricted.kind >= unrestricted.kind || unrestricted.k <= restricted.k {
        return Err(FitError::NonNested { restricted: restricted.kind, unrestricted: unrestricted.kind });
    }
    if restricted.item_ids != unrestricted.item_ids || restricted.n != unrestricted.n {
        return Err(FitError::DataMismatch);
    }
    let diff = restricted.deviance() - unrestricted.deviance();
    let chi2 = diff.max(0.0);
    let df = unrestricted.k - restricted.k;
    Ok(LrtResult {
        restricted: restricted.kind.to_string(),
        unrestricted: unrestricted.kind.to_string(),
        chi2,
        df,
        p_value: chi2_sf(chi2, df as f64),
        negative_difference: diff < 0.0,
    })
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(ps: &[f64]) -> Vec<f64> {
    let m = ps.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(ps[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0).max(ps[i]);
    }
    adjusted
}
