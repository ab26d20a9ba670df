//! One-factor maximum-likelihood factor analysis of a correlation matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::tetrachoric::{PairFlag, TetrachoricMatrix};
use super::DimensionalityError;
use crate::stats::noncentral_chi2_cdf;

pub const PSI_FLOOR: f64 = 0.001;
const EIGEN_FLOOR: f64 = 1e-6;
const MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnidimensionalityThresholds {
    pub chi2_over_df: f64,
    pub rmsea: f64,
    pub srmsr: f64,
}

impl Default for UnidimensionalityThresholds {
    fn default() -> Self {
        Self { chi2_over_df: 2.0, rmsea: 0.05, srmsr: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorCriteria {
    pub chi2_over_df: bool,
    pub rmsea: bool,
    pub srmsr: bool,
}

impl FactorCriteria {
    pub fn all(&self) -> bool {
        self.chi2_over_df && self.rmsea && self.srmsr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSolution {
    pub item_ids: Vec<String>,
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    /// Minimized ML discrepancy.
    pub discrepancy: f64,
    pub chi2: f64,
    pub df: f64,
    pub chi2_over_df: f64,
    pub rmsea: f64,
    /// 90% interval by noncentrality-parameter inversion.
    pub rmsea_ci90: (f64, f64),
    pub srmsr: f64,
    pub n: usize,
    pub criteria: FactorCriteria,
    /// Items whose uniqueness hit the floor (Heywood cases).
    pub heywood_items: Vec<String>,
    /// Whether the input needed eigenvalue smoothing.
    pub smoothed: bool,
    /// Item pairs excluded from fitting (boundary or undefined estimates).
    pub excluded_pairs: usize,
    pub iterations: usize,
}

/// Raises eigenvalues below 1e-6 and rescales to unit diagonal.
/// Returns `None` when no repair was necessary.
pub fn smooth_correlation(r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(r.clone());
    if eig.eigenvalues.iter().all(|&v| v >= EIGEN_FLOOR) {
        return None;
    }
    let vals = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
    let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..r.nrows()).map(|i| fixed[(i, i)].sqrt()).collect();
    Some(DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| if i == j { 1.0 } else { fixed[(i, j)] / (d[i] * d[j]) }))
}

fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Loadings maximizing the likelihood for fixed uniquenesses.
fn loadings_given(s: &DMatrix<f64>, psi: &[f64]) -> DVector<f64> {
    let j = psi.len();
    let inv_sqrt: Vec<f64> = psi.iter().map(|p| 1.0 / p.sqrt()).collect();
    let scaled = DMatrix::from_fn(j, j, |a, b| s[(a, b)] * inv_sqrt[a] * inv_sqrt[b]);
    let eig = SymmetricEigen::new(scaled);
    let (top, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let theta = eig.eigenvalues[top];
    let v = eig.eigenvectors.column(top);
    let scale = (theta - 1.0).max(0.0).sqrt();
    DVector::from_fn(j, |a, _| psi[a].sqrt() * v[a] * scale)
}

fn implied(lambda: &DVector<f64>, psi: &[f64]) -> DMatrix<f64> {
    let mut sigma = lambda * lambda.transpose();
    for (i, p) in psi.iter().enumerate() {
        sigma[(i, i)] += p;
    }
    sigma
}

fn discrepancy(s: &DMatrix<f64>, log_det_s: f64, sigma: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let chol = sigma.clone().cholesky()?;
    let inv = chol.inverse();
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let tr = (s * &inv).trace();
    Some((log_det - log_det_s + tr - s.nrows() as f64, inv))
}

struct MlFit {
    loadings: DVector<f64>,
    psi: Vec<f64>,
    f: f64,
    iterations: usize,
}

/// Projected Gauss-Newton on the uniquenesses with the loadings profiled
/// out; the metric is the expected Hessian `Σ⁻¹ ∘ Σ⁻¹`.
fn ml_one_factor(s: &DMatrix<f64>) -> Result<MlFit, DimensionalityError> {
    let j = s.nrows();
    let log_det_s = log_det_spd(s).ok_or(DimensionalityError::NotPositiveDefinite)?;
    let s_inv = s.clone().cholesky().ok_or(DimensionalityError::NotPositiveDefinite)?.inverse();
    let mut psi: Vec<f64> =
        (0..j).map(|a| ((1.0 - 0.5 / j as f64) / s_inv[(a, a)]).clamp(PSI_FLOOR, 1.0)).collect();
    let eval = |psi: &[f64]| -> Option<(f64, DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let lambda = loadings_given(s, psi);
        let sigma = implied(&lambda, psi);
        let (f, inv) = discrepancy(s, log_det_s, &sigma)?;
        Some((f, lambda, sigma, inv))
    };
    let (mut f, mut lambda, mut sigma, mut inv) = eval(&psi).ok_or(DimensionalityError::NotPositiveDefinite)?;
    for iter in 1..=MAX_ITERS {
        let resid = &inv * (&sigma - s) * &inv;
        let grad: Vec<f64> = (0..j).map(|a| resid[(a, a)]).collect();
        let free: Vec<usize> = (0..j)
            .filter(|&a| !(psi[a] <= PSI_FLOOR && grad[a] > 0.0) && !(psi[a] >= 1.0 && grad[a] < 0.0))
            .collect();
        if free.iter().all(|&a| grad[a].abs() < 1e-10) {
            return Ok(MlFit { loadings: lambda, psi, f, iterations: iter });
        }
        let h = DMatrix::from_fn(free.len(), free.len(), |x, y| inv[(free[x], free[y])].powi(2));
        let g = DVector::from_fn(free.len(), |x, _| grad[free[x]]);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let mut cand = psi.clone();
            for (x, &a) in free.iter().enumerate() {
                cand[a] = (psi[a] - scale * step[x]).clamp(PSI_FLOOR, 1.0);
            }
            if let Some((fc, lc, sc, ic)) = eval(&cand) {
                if fc <= f {
                    let change = cand.iter().zip(&psi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    psi = cand;
                    f = fc;
                    lambda = lc;
                    sigma = sc;
                    inv = ic;
                    accepted = true;
                    if change < 1e-12 {
                        return Ok(MlFit { loadings: lambda, psi, f, iterations: iter });
                    }
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            // no descent along the projected direction: stationary
            return Ok(MlFit { loadings: lambda, psi, f, iterations: iter });
        }
    }
    Err(DimensionalityError::NonConvergence(MAX_ITERS))
}

/// Fits the one-factor model by maximum likelihood and reports fit indices
/// against the unidimensionality criteria.
///
/// Flagged pairs (boundary or undefined tetrachorics) are excluded: their
/// entries are replaced by the model-implied value until the solution
/// stabilizes, and they are dropped from the degrees of freedom and SRMSR.
pub fn single_factor_fit(
    r: &TetrachoricMatrix,
    n: usize,
    thresholds: &UnidimensionalityThresholds,
) -> Result<FactorSolution, DimensionalityError> {
    let j = r.n_items();
    if j < 4 {
        return Err(DimensionalityError::TooFewItems(j));
    }
    let flagged: Vec<(usize, usize)> = (0..j)
        .flat_map(|a| (0..a).map(move |b| (a, b)))
        .filter(|&(a, b)| r.flags[(a, b)] != PairFlag::Interior)
        .collect();
    let mut work = r.values.clone();
    for &(a, b) in &flagged {
        if r.flags[(a, b)] == PairFlag::Undefined {
            work[(a, b)] = 0.0;
            work[(b, a)] = 0.0;
        }
    }
    let mut smoothed = false;
    let mut fit;
    let mut outer = 0;
    loop {
        let s = match smooth_correlation(&work) {
            Some(fixed) => {
                smoothed = true;
                fixed
            }
            None => work.clone(),
        };
        fit = ml_one_factor(&s)?;
        outer += 1;
        if flagged.is_empty() || outer >= 200 {
            break;
        }
        let mut change: f64 = 0.0;
        for &(a, b) in &flagged {
            let v = fit.loadings[a] * fit.loadings[b];
            change = change.max((work[(a, b)] - v).abs());
            work[(a, b)] = v;
            work[(b, a)] = v;
        }
        if change < 1e-9 {
            break;
        }
    }

    let mut loadings: Vec<f64> = fit.loadings.iter().copied().collect();
    if loadings.iter().sum::<f64>() < 0.0 {
        loadings.iter_mut().for_each(|l| *l = -*l);
    }
    let sigma = implied(&DVector::from_column_slice(&loadings), &fit.psi);
    let mut sq = 0.0;
    let mut count = 0usize;
    for a in 0..j {
        for b in 0..a {
            if r.flags[(a, b)] == PairFlag::Interior {
                sq += (r.values[(a, b)] - sigma[(a, b)]).powi(2);
                count += 1;
            }
        }
    }
    let srmsr = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
    let df = (j * (j - 3) / 2) as f64 - flagged.len() as f64;
    if df <= 0.0 {
        return Err(DimensionalityError::NoDegreesOfFreedom);
    }
    let f = fit.f.max(0.0);
    let chi2 = (n as f64 - 1.0) * f;
    let rmsea = ((chi2 - df) / (df * (n as f64 - 1.0))).max(0.0).sqrt();
    let rmsea_ci90 = rmsea_interval(chi2, df, n);
    let heywood_items = fit
        .psi
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= PSI_FLOOR * (1.0 + 1e-9))
        .map(|(i, _)| r.item_ids[i].clone())
        .collect();
    let chi2_over_df = chi2 / df;
    Ok(FactorSolution {
        item_ids: r.item_ids.clone(),
        loadings,
        uniquenesses: fit.psi,
        discrepancy: f,
        chi2,
        df,
        chi2_over_df,
        rmsea,
        rmsea_ci90,
        srmsr,
        n,
        criteria: FactorCriteria {
            chi2_over_df: chi2_over_df < thresholds.chi2_over_df,
            rmsea: rmsea < thresholds.rmsea,
            srmsr: srmsr < thresholds.srmsr,
        },
        heywood_items,
        smoothed,
        excluded_pairs: flagged.len(),
        iterations: fit.iterations,
    })
}

/// 90% RMSEA interval: noncentrality values placing the observed chi-squared
/// at the 95th and 5th percentiles.
pub fn rmsea_interval(chi2: f64, df: f64, n: usize) -> (f64, f64) {
    let solve = |target: f64| -> f64 {
        if noncentral_chi2_cdf(chi2, df, 0.0) < target {
            return 0.0;
        }
        let mut hi = (chi2 - df).max(1.0) * 2.0 + 10.0;
        while noncentral_chi2_cdf(chi2, df, hi) > target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if noncentral_chi2_cdf(chi2, df, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let scale = df * (n as f64 - 1.0);
    ((solve(0.95) / scale).sqrt(), (solve(0.05) / scale).sqrt())
}
