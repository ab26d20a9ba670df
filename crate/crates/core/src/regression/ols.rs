use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::RegressionError;
use crate::ingest::{column_standardize, ScoreTable};
use crate::stats::{mean, sample_variance};

pub const INTERCEPT: &str = "(Intercept)";

/// Relative residual norm below which a column counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsOptions {
    pub standardize: bool,
    /// Leave the outcome on its raw scale even when standardizing.
    pub raw_dv: bool,
}

impl Default for OlsOptions {
    fn default() -> Self {
        Self { standardize: true, raw_dv: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub f_statistic: f64,
    pub df_model: usize,
    pub df_resid: usize,
    pub f_p_value: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub rss: f64,
    pub n: usize,
    pub standardized: bool,
    pub observed: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Predictor columns as entered into the model (after any scaling).
    #[serde(skip)]
    pub design: Vec<Vec<f64>>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn k(&self) -> usize {
        self.df_model
    }
}

/// Names of columns that are linear combinations of the intercept and the
/// columns before them.
fn collinear_columns(names: &[String], columns: &[Vec<f64>]) -> Vec<String> {
    let n = columns.first().map_or(0, Vec::len);
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut bad = Vec::new();
    for (name, col) in names.iter().zip(columns) {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0.max(1.0) {
            bad.push(name.clone());
        } else {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    bad
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    column_standardize(xs).expect("variance checked by caller")
}

/// Least squares with intercept via Householder QR.
pub fn ols(y: &[f64], predictors: &[(String, Vec<f64>)], options: OlsOptions) -> Result<RegressionResult, RegressionError> {
    let n = y.len();
    let k = predictors.len();
    if k == 0 {
        return Err(RegressionError::NoPredictors);
    }
    if n < k + 2 {
        return Err(RegressionError::TooFewObservations { n, k });
    }
    if let Some((name, _)) = predictors.iter().find(|(_, c)| c.len() != n) {
        return Err(RegressionError::LengthMismatch(name.clone()));
    }
    if y.iter().chain(predictors.iter().flat_map(|(_, c)| c)).any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite);
    }
    let names: Vec<String> = predictors.iter().map(|(n, _)| n.clone()).collect();
    let degenerate: Vec<String> =
        predictors.iter().filter(|(_, c)| sample_variance(c) == 0.0).map(|(n, _)| n.clone()).collect();
    if !degenerate.is_empty() {
        return Err(RegressionError::CollinearPredictors(degenerate));
    }
    let columns: Vec<Vec<f64>> = predictors
        .iter()
        .map(|(_, c)| if options.standardize { standardize(c) } else { c.clone() })
        .collect();
    let bad = collinear_columns(&names, &columns);
    if !bad.is_empty() {
        return Err(RegressionError::CollinearPredictors(bad));
    }
    let yv: Vec<f64> = if options.standardize && !options.raw_dv {
        if sample_variance(y) == 0.0 {
            return Err(RegressionError::ConstantOutcome);
        }
        standardize(y)
    } else {
        y.to_vec()
    };

    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let yvec = DVector::from_column_slice(&yv);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yvec;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| RegressionError::CollinearPredictors(names.clone()))?;
    let fitted_v = &x * &beta;
    let resid_v = &yvec - &fitted_v;
    let rss = resid_v.norm_squared();
    let ybar = mean(&yv);
    let tss: f64 = yv.iter().map(|v| (v - ybar).powi(2)).sum();
    let df_resid = n - k - 1;
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_resid as f64;
    let sigma2 = rss / df_resid as f64;

    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k + 1, k + 1))
        .ok_or_else(|| RegressionError::CollinearPredictors(names.clone()))?;
    let cov = &r_inv * r_inv.transpose() * sigma2;
    let t_dist = StudentsT::new(0.0, 1.0, df_resid as f64).expect("positive df");
    let coefficients = std::iter::once(INTERCEPT.to_string())
        .chain(names.iter().cloned())
        .enumerate()
        .map(|(j, name)| {
            let se = cov[(j, j)].max(0.0).sqrt();
            let t = beta[j] / se;
            let p = if t.is_finite() { 2.0 * t_dist.sf(t.abs()) } else { 0.0 };
            Coefficient { name, estimate: beta[j], std_error: se, t, p_value: p }
        })
        .collect();
    let f_statistic = (r_squared / k as f64) / ((1.0 - r_squared) / df_resid as f64);
    let f_p_value = if f_statistic.is_finite() {
        FisherSnedecor::new(k as f64, df_resid as f64).expect("positive df").sf(f_statistic)
    } else {
        0.0
    };
    Ok(RegressionResult {
        coefficients,
        f_statistic,
        df_model: k,
        df_resid,
        f_p_value,
        r_squared,
        adj_r_squared,
        rss,
        n,
        standardized: options.standardize,
        observed: yv,
        fitted: fitted_v.iter().copied().collect(),
        residuals: resid_v.iter().copied().collect(),
        design: columns,
    })
}

/// Pulls `dv` and `ivs` from a score table and runs [`ols`].
pub fn regress_table(table: &ScoreTable, dv: &str, ivs: &[String], options: OlsOptions) -> Result<RegressionResult, RegressionError> {
    let col = |name: &str| table.column(name).map(<[f64]>::to_vec).ok_or_else(|| RegressionError::UnknownColumn(name.to_string()));
    let y = col(dv)?;
    let preds = ivs.iter().map(|n| Ok((n.clone(), col(n)?))).collect::<Result<Vec<_>, RegressionError>>()?;
    ols(&y, &preds, options)
}

/// All products of two or more predictors, named `a:b`, `a:b:c`, ….
pub fn interaction_terms(predictors: &[(String, Vec<f64>)]) -> Vec<(String, Vec<f64>)> {
    let k = predictors.len();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k)).filter(|m| m.count_ones() >= 2).map(|m| (0..k).filter(|&i| m & (1 << i) != 0).collect()).collect();
    subsets.sort_by_key(|s| (s.len(), s.clone()));
    subsets
        .into_iter()
        .map(|s| {
            let name = s.iter().map(|&i| predictors[i].0.as_str()).collect::<Vec<_>>().join(":");
            let n = predictors[0].1.len();
            let values = (0..n).map(|r| s.iter().map(|&i| predictors[i].1[r]).product()).collect();
            (name, values)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedFTest {
    pub f: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
}

/// F-test of a restricted model against a larger one fit to the same outcome.
pub fn nested_f_test(restricted: &RegressionResult, full: &RegressionResult) -> Result<NestedFTest, RegressionError> {
    if full.df_model <= restricted.df_model || full.n != restricted.n {
        return Err(RegressionError::NotNested);
    }
    let df_num = full.df_model - restricted.df_model;
    let df_den = full.df_resid;
    let f = ((restricted.rss - full.rss).max(0.0) / df_num as f64) / (full.rss / df_den as f64);
    let p_value = FisherSnedecor::new(df_num as f64, df_den as f64).expect("positive df").sf(f);
    Ok(NestedFTest { f, df_num, df_den, p_value })
}
