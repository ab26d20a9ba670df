use serde::{Deserialize, Serialize};

use super::em::{pattern_log_likelihoods, IrtError, IrtFit};
use super::model::{item_information, ItemParams};
use crate::ingest::ResponseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub theta: f64,
    pub posterior_sd: f64,
}

/// Expected a posteriori abilities under the fit's quadrature prior.
pub fn eap_scores(m: &ResponseMatrix, fit: &IrtFit) -> Result<Vec<AbilityEstimate>, IrtError> {
    fit.check_items(m)?;
    let grid = fit.grid();
    let nodes = grid.nodes();
    let nq = nodes.len();
    let ll = pattern_log_likelihoods(m, &fit.items, nodes);
    let log_w: Vec<f64> = grid.weights().iter().map(|w| w.ln()).collect();
    Ok(ll
        .chunks_exact(nq)
        .map(|row| {
            let max = row.iter().zip(&log_w).map(|(l, w)| l + w).fold(f64::NEG_INFINITY, f64::max);
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for ((l, w), &t) in row.iter().zip(&log_w).zip(nodes) {
                let p = (l + w - max).exp();
                s0 += p;
                s1 += p * t;
                s2 += p * t * t;
            }
            let theta = s1 / s0;
            let var = (s2 / s0 - theta * theta).max(0.0);
            AbilityEstimate { theta, posterior_sd: var.sqrt() }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoPoint {
    pub theta: f64,
    pub information: f64,
    pub se: f64,
}

/// Test information curve over a θ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInformation {
    pub points: Vec<InfoPoint>,
    pub peak_theta: f64,
    pub peak_value: f64,
}

impl TestInformation {
    /// Sums item information over `thetas`; the first maximum wins ties.
    pub fn from_items(items: &[ItemParams], thetas: &[f64]) -> Self {
        assert!(!thetas.is_empty(), "theta grid must be nonempty");
        let points: Vec<InfoPoint> = thetas
            .iter()
            .map(|&theta| {
                let information: f64 = items.iter().map(|p| item_information(p, theta)).sum();
                InfoPoint { theta, information, se: 1.0 / information.sqrt() }
            })
            .collect();
        let peak = points
            .iter()
            .fold(points[0], |best, p| if p.information > best.information { *p } else { best });
        Self { points, peak_theta: peak.theta, peak_value: peak.information }
    }

    pub fn se_at_peak(&self) -> f64 {
        1.0 / self.peak_value.sqrt()
    }
}

pub fn test_information(fit: &IrtFit, thetas: &[f64]) -> TestInformation {
    TestInformation::from_items(&fit.items, thetas)
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn theta_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}
