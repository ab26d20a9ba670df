use serde::{Deserialize, Serialize};

use super::ols::{ols, OlsOptions, RegressionResult};
use super::RegressionError;
use crate::stats::{chi2_sf, mean, normal_quantile, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Half of the antisymmetric coefficient vector, largest first.
fn sw_coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let mut a: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / (an + 0.25))).collect();
    let summ2 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - a[0] / ssumm2;
    let (first, fac) = if n > 5 {
        let a2 = -a[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for v in &mut a[first..] {
        *v /= -fac;
    }
    a
}

/// Shapiro-Wilk W with Royston's normalizing approximation for the p-value.
pub fn shapiro_wilk(xs: &[f64]) -> Result<ShapiroWilk, RegressionError> {
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let n = xs.len();
    if !(3..=5000).contains(&n) {
        return Err(RegressionError::SampleSize(n));
    }
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range < 1e-19 * x[n - 1].abs().max(1.0) {
        return Err(RegressionError::ConstantResiduals);
    }
    let a = sw_coefficients(n);
    let coef: Vec<f64> = (0..n)
        .map(|i| {
            let j = n - 1 - i;
            match i.cmp(&j) {
                std::cmp::Ordering::Less => -a[i],
                std::cmp::Ordering::Greater => a[j],
                std::cmp::Ordering::Equal => 0.0,
            }
        })
        .collect();
    // W as the squared correlation of data and coefficients.
    let xbar = mean(&x);
    let cbar = mean(&coef);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (xi, ci) in x.iter().zip(&coef) {
        let dx = (xi - xbar) / range;
        let dc = ci - cbar;
        sxy += dx * dc;
        sxx += dx * dx;
        syy += dc * dc;
    }
    let w1 = 1.0 - sxy * sxy / (sxx * syy);
    let w = 1.0 - w1;

    let p_value = if n == 3 {
        (6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::PI / 3.0)).max(0.0)
    } else {
        let an = n as f64;
        let mut y = w1.ln();
        let (m, s) = if n <= 11 {
            let gamma = poly(&G, an);
            if y >= gamma {
                return Ok(ShapiroWilk { w, p_value: 1e-99 });
            }
            y = -(gamma - y).ln();
            (poly(&C3, an), poly(&C4, an).exp())
        } else {
            let ln = an.ln();
            (poly(&C5, ln), poly(&C6, ln).exp())
        };
        normal_sf((y - m) / s)
    };
    Ok(ShapiroWilk { w, p_value: p_value.clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreuschPaganVariant {
    /// Studentized n·R² form.
    #[default]
    Koenker,
    /// Half the explained sum of squares of the scaled squared residuals.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreuschPagan {
    pub lm: f64,
    pub df: usize,
    pub p_value: f64,
    pub variant: BreuschPaganVariant,
}

/// Regresses squared residuals on the model's predictors.
pub fn breusch_pagan(result: &RegressionResult, variant: BreuschPaganVariant) -> Result<BreuschPagan, RegressionError> {
    let k = result.design.len();
    let n = result.residuals.len() as f64;
    let e2: Vec<f64> = result.residuals.iter().map(|e| e * e).collect();
    let sigma2 = mean(&e2);
    let e2bar = sigma2;
    let spread: f64 = e2.iter().map(|v| (v - e2bar).powi(2)).sum();
    let lm = if spread <= 1e-24 * n * e2bar.powi(2).max(f64::MIN_POSITIVE) {
        0.0
    } else {
        let preds: Vec<(String, Vec<f64>)> =
            result.design.iter().enumerate().map(|(i, c)| (format!("x{i}"), c.clone())).collect();
        let aux = ols(&e2, &preds, OlsOptions { standardize: false, raw_dv: false }).map_err(|e| match e {
            RegressionError::CollinearPredictors(c) => RegressionError::AuxiliaryRankDeficient(c),
            other => other,
        })?;
        match variant {
            BreuschPaganVariant::Koenker => n * aux.r_squared,
            BreuschPaganVariant::Classical => {
                let ess = aux.r_squared * spread;
                ess / (2.0 * sigma2 * sigma2)
            }
        }
    };
    let lm = lm.max(0.0);
    Ok(BreuschPagan { lm, df: k, p_value: chi2_sf(lm, k as f64), variant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurbinWatson {
    pub d: f64,
    pub annotation: String,
}

/// Rule-of-thumb reading of the statistic.
pub fn durbin_watson_annotation(d: f64) -> &'static str {
    if d < 1.5 {
        "positive autocorrelation suspected"
    } else if d > 2.5 {
        "negative autocorrelation suspected"
    } else {
        "no autocorrelation (d near 2)"
    }
}

pub fn durbin_watson(residuals: &[f64]) -> Result<DurbinWatson, RegressionError> {
    if residuals.len() < 2 {
        return Err(RegressionError::SampleSize(residuals.len()));
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if ss == 0.0 {
        return Err(RegressionError::ConstantResiduals);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let d = num / ss;
    Ok(DurbinWatson { d, annotation: durbin_watson_annotation(d).into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub shapiro_wilk: ShapiroWilk,
    pub breusch_pagan: BreuschPagan,
    pub durbin_watson: DurbinWatson,
    /// Predicted-versus-observed plot, when one was written.
    pub linearity_plot: Option<String>,
}

pub fn diagnostics(result: &RegressionResult, variant: BreuschPaganVariant) -> Result<DiagnosticsReport, RegressionError> {
    Ok(DiagnosticsReport {
        shapiro_wilk: shapiro_wilk(&result.residuals)?,
        breusch_pagan: breusch_pagan(result, variant)?,
        durbin_watson: durbin_watson(&result.residuals)?,
        linearity_plot: None,
    })
}
