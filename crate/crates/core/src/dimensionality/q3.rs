use serde::{Deserialize, Serialize};

use super::DimensionalityError;
use crate::ingest::ResponseMatrix;
use crate::irt::{icc, AbilityEstimate, IrtFit};
use crate::stats::pearson;

pub const DEFAULT_Q3_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Pair {
    pub item_a: String,
    pub item_b: String,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Report {
    pub item_ids: Vec<String>,
    /// Symmetric residual correlations; `None` on the diagonal and for
    /// pairs involving a constant residual column.
    pub values: Vec<Vec<Option<f64>>>,
    pub flagged: Vec<Q3Pair>,
    pub max_abs: f64,
    pub threshold: f64,
    /// Person estimator used for the residuals.
    pub estimator: String,
}

/// Pairwise Pearson correlations of residual columns, with flags for
/// `|Q3| > threshold` (off-diagonal pairs only).
pub fn q3_from_residuals(item_ids: &[String], residuals: &[Vec<f64>], threshold: f64) -> Q3Report {
    let j = residuals.len();
    let mut values = vec![vec![None; j]; j];
    let mut flagged = Vec::new();
    let mut max_abs: f64 = 0.0;
    for a in 0..j {
        for b in (a + 1)..j {
            let v = pearson(&residuals[a], &residuals[b]);
            values[a][b] = v;
            values[b][a] = v;
            if let Some(q) = v {
                max_abs = max_abs.max(q.abs());
                if q.abs() > threshold {
                    flagged.push(Q3Pair { item_a: item_ids[a].clone(), item_b: item_ids[b].clone(), q3: q });
                }
            }
        }
    }
    Q3Report { item_ids: item_ids.to_vec(), values, flagged, max_abs, threshold, estimator: "EAP".into() }
}

/// Yen's Q3 on residuals `x_ij − P_j(θ̂_i)`.
pub fn q3(
    m: &ResponseMatrix,
    fit: &IrtFit,
    thetas: &[AbilityEstimate],
    threshold: f64,
) -> Result<Q3Report, DimensionalityError> {
    if fit.item_ids.as_slice() != m.item_ids() {
        return Err(DimensionalityError::ItemMismatch);
    }
    if thetas.len() != m.n_examinees() {
        return Err(DimensionalityError::LengthMismatch { expected: m.n_examinees(), found: thetas.len() });
    }
    let residuals: Vec<Vec<f64>> = fit
        .items
        .iter()
        .enumerate()
        .map(|(j, p)| {
            m.rows().zip(thetas).map(|(row, t)| f64::from(row[j]) - icc(p, t.theta)).collect()
        })
        .collect();
    Ok(q3_from_residuals(m.item_ids(), &residuals, threshold))
}
