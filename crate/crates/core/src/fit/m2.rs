//! Limited-information goodness of fit from first- and second-order margins.
//!
//! `M2 = N eᵀ C e` with `C = Ξ⁺ − Ξ⁺Δ(ΔᵀΞ⁺Δ)⁺ΔᵀΞ⁺`, where `e` stacks observed
//! minus implied univariate and bivariate proportions, `Ξ` is their
//! per-observation covariance under the model and `Δ` the margin Jacobian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::compare::{information_criteria, InformationCriteria};
use super::FitError;
use crate::ingest::ResponseMatrix;
use crate::irt::{IrtFit, ModelKind};
use crate::irt::probability_table;
use crate::stats::chi2_sf;

const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitThresholds {
    pub rmsea: f64,
    pub srmsr: f64,
    pub acceptable: f64,
    pub excellent: f64,
}

impl Default for FitThresholds {
    fn default() -> Self {
        Self { rmsea: 0.06, srmsr: 0.08, acceptable: 0.90, excellent: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexRating {
    Poor,
    Acceptable,
    Excellent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitVerdict {
    pub rmsea_good: bool,
    pub srmsr_good: bool,
    pub tli: IndexRating,
    pub cfi: IndexRating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    /// `None` when the weight matrix was singular.
    pub m2: Option<f64>,
    pub df: i64,
    pub p_value: Option<f64>,
    pub rmsea: Option<f64>,
    pub srmsr: f64,
    pub tli: Option<f64>,
    pub cfi: Option<f64>,
    pub baseline_m2: Option<f64>,
    pub baseline_df: i64,
    pub aic: f64,
    pub bic: f64,
    pub loglik: f64,
    pub n: usize,
    pub k: usize,
    pub singular: bool,
    pub verdict: Option<FitVerdict>,
}

/// Index sets of the stacked margins: singletons then pairs `a < b`.
fn margin_sets(j: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..j).map(|a| vec![a]).collect();
    for a in 0..j {
        for b in (a + 1)..j {
            sets.push(vec![a, b]);
        }
    }
    sets
}

fn union(u: &[usize], v: &[usize]) -> Vec<usize> {
    let mut out = u.to_vec();
    for x in v {
        if !out.contains(x) {
            out.push(*x);
        }
    }
    out
}

/// Observed univariate and bivariate proportions.
fn observed_margins(m: &ResponseMatrix) -> Vec<f64> {
    let j = m.n_items();
    let n = m.n_examinees() as f64;
    let mut counts = vec![0u64; j + j * (j - 1) / 2];
    for row in m.rows() {
        let mut k = j;
        for a in 0..j {
            counts[a] += u64::from(row[a]);
        }
        for a in 0..j {
            for b in (a + 1)..j {
                counts[k] += u64::from(row[a] & row[b]);
                k += 1;
            }
        }
    }
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Symmetric pseudo-inverse dropping eigenvalues below the cutoff relative
/// to the largest. Returns the inverse and the retained rank.
fn pinv_sym(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = PINV_CUTOFF * max.max(1e-300);
    let mut rank = 0;
    let inv_vals = eig.eigenvalues.map(|v| {
        if v > cut {
            rank += 1;
            1.0 / v
        } else {
            0.0
        }
    });
    (&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose(), rank)
}

struct Quadratic {
    value: f64,
    singular: bool,
}

fn m2_quadratic(e: &DVector<f64>, xi: &DMatrix<f64>, delta: &DMatrix<f64>, n: f64) -> Quadratic {
    let (xi_inv, xi_rank) = pinv_sym(xi);
    let a = &xi_inv * delta;
    let (m_inv, m_rank) = pinv_sym(&(delta.transpose() * &a));
    let ate = a.transpose() * e;
    let value = n * ((e.transpose() * &xi_inv * e)[(0, 0)] - (ate.transpose() * m_inv * &ate)[(0, 0)]);
    Quadratic { value: value.max(0.0), singular: xi_rank < xi.nrows() || m_rank < delta.ncols() }
}

/// Covariance of the stacked margin indicators given a function returning
/// the probability that every item of a set is correct.
fn margin_covariance(sets: &[Vec<usize>], pi: &[f64], joint: impl Fn(&[usize]) -> f64) -> DMatrix<f64> {
    let s = sets.len();
    let mut xi = DMatrix::zeros(s, s);
    for u in 0..s {
        for v in 0..=u {
            let val = joint(&union(&sets[u], &sets[v])) - pi[u] * pi[v];
            xi[(u, v)] = val;
            xi[(v, u)] = val;
        }
    }
    xi
}

fn pairwise_correlations(margins: &[f64], j: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(j * (j - 1) / 2);
    let mut k = j;
    for a in 0..j {
        for b in (a + 1)..j {
            let (pa, pb) = (margins[a], margins[b]);
            let cov = margins[k] - pa * pb;
            out.push(cov / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt());
            k += 1;
        }
    }
    out
}

/// Computes M2, RMSEA, SRMSR, TLI and CFI plus information criteria.
pub fn m2_family(fit: &IrtFit, m: &ResponseMatrix, thresholds: &FitThresholds) -> Result<FitReport, FitError> {
    let j = m.n_items();
    if j < 3 {
        return Err(FitError::TooFewItems(j));
    }
    if fit.item_ids.as_slice() != m.item_ids() {
        return Err(FitError::DataMismatch);
    }
    let n = m.n_examinees() as f64;
    let grid = fit.grid();
    let nodes = grid.nodes();
    let w = grid.weights();
    let nq = nodes.len();
    let probs = probability_table(&fit.items, nodes);
    let sets = margin_sets(j);
    let s = sets.len();

    let joint = |set: &[usize]| -> f64 {
        (0..nq)
            .map(|q| w[q] * set.iter().map(|&i| probs[i * nq + q]).product::<f64>())
            .sum()
    };
    let pi: Vec<f64> = sets.iter().map(|u| joint(u)).collect();
    let observed = observed_margins(m);
    let e = DVector::from_fn(s, |u, _| observed[u] - pi[u]);
    let xi = margin_covariance(&sets, &pi, joint);

    // Jacobian in (a, d = −ab, logit c) per item; Rasch adds the latent SD.
    let per_item = fit.kind.item_param_count();
    let k = fit.k;
    let mut delta = DMatrix::zeros(s, k);
    for (jj, p) in fit.items.iter().enumerate() {
        let mut derivs = vec![vec![0.0; nq]; per_item];
        for (q, &t) in nodes.iter().enumerate() {
            let sig = crate::irt::icc(&crate::irt::ItemParams::two_pl(p.a, p.b), t);
            let dz = (1.0 - p.c) * sig * (1.0 - sig);
            match fit.kind {
                ModelKind::Rasch => derivs[0][q] = dz,
                _ => {
                    derivs[0][q] = dz * t;
                    derivs[1][q] = dz;
                    if fit.kind == ModelKind::ThreePl {
                        derivs[2][q] = p.c * (1.0 - p.c) * (1.0 - sig);
                    }
                }
            }
        }
        for (u, set) in sets.iter().enumerate() {
            if !set.contains(&jj) {
                continue;
            }
            for (c, d) in derivs.iter().enumerate() {
                delta[(u, jj * per_item + c)] = (0..nq)
                    .map(|q| {
                        w[q] * d[q]
                            * set.iter().filter(|&&i| i != jj).map(|&i| probs[i * nq + q]).product::<f64>()
                    })
                    .sum();
            }
        }
    }
    if fit.kind == ModelKind::Rasch {
        let sd = fit.latent_sd;
        let mean_sq: f64 = nodes.iter().zip(w).map(|(t, wq)| wq * t * t).sum();
        let dw: Vec<f64> = nodes.iter().zip(w).map(|(t, wq)| wq * (t * t - mean_sq) / sd.powi(3)).collect();
        for (u, set) in sets.iter().enumerate() {
            delta[(u, k - 1)] =
                (0..nq).map(|q| dw[q] * set.iter().map(|&i| probs[i * nq + q]).product::<f64>()).sum();
        }
    }

    let model = m2_quadratic(&e, &xi, &delta, n);
    let df = s as i64 - k as i64;

    // Independence baseline with free marginals.
    let p_obs = &observed[..j];
    let base_joint = |set: &[usize]| -> f64 { set.iter().map(|&i| p_obs[i]).product() };
    let base_pi: Vec<f64> = sets.iter().map(|u| base_joint(u)).collect();
    let base_e = DVector::from_fn(s, |u, _| observed[u] - base_pi[u]);
    let base_xi = margin_covariance(&sets, &base_pi, base_joint);
    let base_delta = DMatrix::from_fn(s, j, |u, c| {
        let set = &sets[u];
        if set.contains(&c) {
            set.iter().filter(|&&i| i != c).map(|&i| p_obs[i]).product()
        } else {
            0.0
        }
    });
    let base = m2_quadratic(&base_e, &base_xi, &base_delta, n);
    let base_df = s as i64 - j as i64;

    let srmsr = {
        let obs_r = pairwise_correlations(&observed, j);
        let mod_r = pairwise_correlations(&pi, j);
        let sq: f64 = obs_r.iter().zip(&mod_r).map(|(a, b)| (a - b).powi(2)).sum();
        (sq / obs_r.len() as f64).sqrt()
    };
    let InformationCriteria { aic, bic } = information_criteria(fit);
    let singular = model.singular || df <= 0;

    let (m2, p_value, rmsea, tli, cfi, baseline_m2) = if singular {
        (None, None, None, None, None, None)
    } else {
        let dff = df as f64;
        let bdf = base_df as f64;
        let rmsea = ((model.value - dff).max(0.0) / (dff * n)).sqrt();
        let (tli, cfi) = if base.singular {
            (None, None)
        } else {
            let base_ratio = base.value / bdf;
            let tli = ((base_ratio - model.value / dff) / (base_ratio - 1.0)).min(1.0);
            let denom = (base.value - bdf).max(model.value - dff).max(0.0);
            let cfi = if denom == 0.0 { 1.0 } else { (1.0 - (model.value - dff).max(0.0) / denom).clamp(0.0, 1.0) };
            (Some(tli), Some(cfi))
        };
        (Some(model.value), Some(chi2_sf(model.value, dff)), Some(rmsea), tli, cfi, Some(base.value))
    };
    let rate = |v: f64| {
        if v > thresholds.excellent {
            IndexRating::Excellent
        } else if v > thresholds.acceptable {
            IndexRating::Acceptable
        } else {
            IndexRating::Poor
        }
    };
    let verdict = match (rmsea, tli, cfi) {
        (Some(r), Some(t), Some(c)) => Some(FitVerdict {
            rmsea_good: r < thresholds.rmsea,
            srmsr_good: srmsr < thresholds.srmsr,
            tli: rate(t),
            cfi: rate(c),
        }),
        _ => None,
    };
    Ok(FitReport {
        model: fit.kind,
        m2,
        df,
        p_value,
        rmsea,
        srmsr,
        tli,
        cfi,
        baseline_m2,
        baseline_df: base_df,
        aic,
        bic,
        loglik: fit.loglik,
        n: m.n_examinees(),
        k,
        singular,
        verdict,
    })
}
