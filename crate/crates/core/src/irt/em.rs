//! Marginal maximum likelihood estimation by EM over a fixed quadrature grid.
//!
//! The E-step accumulates, per item and node, the expected number of
//! examinees (`n_q`) and expected number correct (`r_jq`). The M-step then
//! maximizes each item's expected complete-data log-likelihood by Fisher
//! scoring with step halving, in slope-intercept form `z = aθ + d` with
//! `logit(c)` for the 3PL asymptote.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{icc, logistic, ItemParams, ModelKind};
use super::quadrature::{normal_weights, QuadratureGrid, QuadratureSpec};
use crate::ingest::ResponseMatrix;
use crate::stats::normal_quantile;

const A_BOUNDS: (f64, f64) = (0.05, 6.0);
const B_BOUNDS: (f64, f64) = (-6.0, 6.0);
const LOGIT_C_BOUNDS: (f64, f64) = (-15.0, 0.0);
const SD_BOUNDS: (f64, f64) = (0.05, 10.0);
/// Allowed per-iteration decrease of the EM objective.
pub const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum IrtError {
    #[error("items with no response variation: {0:?}")]
    DegenerateItem(Vec<String>),
    #[error("at least 10 examinees are required, found {0}")]
    TooFewExaminees(usize),
    #[error("start values cover {found} items, data has {expected}")]
    StartMismatch { found: usize, expected: usize },
    #[error("fit covers items {fit:?}, data has {data:?}")]
    ItemMismatch { fit: Vec<String>, data: Vec<String> },
}

/// Gaussian prior on `logit(c)` used to stabilize the 3PL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessingPrior {
    pub mean_logit: f64,
    pub sd: f64,
}

impl Default for GuessingPrior {
    fn default() -> Self {
        Self { mean_logit: (0.25f64 / 0.75).ln(), sd: 1.0 }
    }
}

impl GuessingPrior {
    fn log_density(&self, logit_c: f64) -> f64 {
        -0.5 * ((logit_c - self.mean_logit) / self.sd).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub quadrature: QuadratureSpec,
    pub guessing_prior: GuessingPrior,
    /// Optional starting item parameters (e.g. for warm starts).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start: Option<Vec<ItemParams>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_sd: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 500,
            quadrature: QuadratureSpec::default(),
            guessing_prior: GuessingPrior::default(),
            start: None,
            start_sd: None,
        }
    }
}

/// A fitted dichotomous IRT model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtFit {
    pub kind: ModelKind,
    pub item_ids: Vec<String>,
    pub items: Vec<ItemParams>,
    /// Latent standard deviation; estimated for Rasch, fixed at 1 otherwise.
    pub latent_sd: f64,
    /// Observed-data log-likelihood at the final estimates.
    pub loglik: f64,
    /// Log prior density of the guessing parameters (3PL only, else 0).
    pub log_prior: f64,
    pub k: usize,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// EM objective (log-likelihood plus log prior) at each visited iterate.
    pub trace: Vec<f64>,
    pub quadrature: QuadratureSpec,
}

impl IrtFit {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Quadrature grid carrying this fit's latent prior.
    pub fn grid(&self) -> QuadratureGrid {
        QuadratureGrid::new(self.quadrature, self.latent_sd)
    }

    pub fn deviance(&self) -> f64 {
        -2.0 * self.loglik
    }

    /// True when the trace never drops by more than [`MONOTONE_SLACK`].
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK)
    }

    pub(crate) fn check_items(&self, m: &ResponseMatrix) -> Result<(), IrtError> {
        if self.item_ids.as_slice() != m.item_ids() {
            return Err(IrtError::ItemMismatch { fit: self.item_ids.clone(), data: m.item_ids().to_vec() });
        }
        Ok(())
    }
}

/// Sufficient statistics of one E-step.
pub(crate) struct Expected {
    /// Expected examinees per node.
    pub n_q: Vec<f64>,
    /// Expected correct responses, item-major `j * Q + q`.
    pub r_jq: Vec<f64>,
    pub loglik: f64,
}

/// Per-examinee log-likelihood at every node, row-major `i * Q + q`.
pub(crate) fn pattern_log_likelihoods(m: &ResponseMatrix, items: &[ItemParams], nodes: &[f64]) -> Vec<f64> {
    let nq = nodes.len();
    let (base, diff) = log_tables(items, nodes);
    let mut out = Vec::with_capacity(m.n_examinees() * nq);
    for row in m.rows() {
        let start = out.len();
        out.extend_from_slice(&base);
        let ll = &mut out[start..];
        for (j, &x) in row.iter().enumerate() {
            if x == 1 {
                for (l, d) in ll.iter_mut().zip(&diff[j * nq..(j + 1) * nq]) {
                    *l += d;
                }
            }
        }
    }
    out
}

/// `base[q] = Σ_j ln(1 − P_jq)` and `diff[j, q] = ln P_jq − ln(1 − P_jq)`.
fn log_tables(items: &[ItemParams], nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nq = nodes.len();
    let mut base = vec![0.0; nq];
    let mut diff = vec![0.0; items.len() * nq];
    for (j, p) in items.iter().enumerate() {
        for (q, &t) in nodes.iter().enumerate() {
            let (lp, lq) = log_probs(p, t);
            base[q] += lq;
            diff[j * nq + q] = lp - lq;
        }
    }
    (base, diff)
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `(ln P, ln(1 − P))` computed without cancellation.
#[inline]
fn log_probs(p: &ItemParams, theta: f64) -> (f64, f64) {
    let z = p.a * (theta - p.b);
    if p.c == 0.0 {
        (log_sigmoid(z), log_sigmoid(-z))
    } else {
        let lq = (1.0 - p.c).ln() + log_sigmoid(-z);
        let lp = (p.c + (1.0 - p.c) * logistic(z)).ln();
        (lp, lq)
    }
}

pub(crate) fn e_step(m: &ResponseMatrix, items: &[ItemParams], grid: &QuadratureGrid) -> Expected {
    let nq = grid.len();
    let j = items.len();
    let log_w: Vec<f64> = grid.weights().iter().map(|w| w.ln()).collect();
    let (base, diff) = log_tables(items, grid.nodes());
    let mut n_q = vec![0.0; nq];
    let mut r_jq = vec![0.0; j * nq];
    let mut loglik = 0.0;
    let mut post = vec![0.0; nq];
    for row in m.rows() {
        post.copy_from_slice(&base);
        for (jj, &x) in row.iter().enumerate() {
            if x == 1 {
                for (l, d) in post.iter_mut().zip(&diff[jj * nq..(jj + 1) * nq]) {
                    *l += d;
                }
            }
        }
        let mut max = f64::NEG_INFINITY;
        for (l, lw) in post.iter_mut().zip(&log_w) {
            *l += lw;
            max = max.max(*l);
        }
        let mut total = 0.0;
        for l in post.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        loglik += max + total.ln();
        for (l, n) in post.iter_mut().zip(n_q.iter_mut()) {
            *l /= total;
            *n += *l;
        }
        for (jj, &x) in row.iter().enumerate() {
            if x == 1 {
                for (r, l) in r_jq[jj * nq..(jj + 1) * nq].iter_mut().zip(&post) {
                    *r += l;
                }
            }
        }
    }
    Expected { n_q, r_jq, loglik }
}

/// Observed-data marginal log-likelihood.
pub fn marginal_log_likelihood(m: &ResponseMatrix, items: &[ItemParams], grid: &QuadratureGrid) -> f64 {
    e_step(m, items, grid).loglik
}

/// Working parameterization of one item during the M-step.
#[derive(Debug, Clone, Copy)]
struct Working {
    a: f64,
    d: f64,
    logit_c: f64,
}

impl Working {
    fn from_params(p: &ItemParams, kind: ModelKind) -> Self {
        let logit_c = if kind == ModelKind::ThreePl {
            let c = p.c.clamp(1e-6, 0.5);
            (c / (1.0 - c)).ln()
        } else {
            f64::NEG_INFINITY
        };
        Self { a: p.a, d: -p.a * p.b, logit_c }
    }

    fn c(&self) -> f64 {
        if self.logit_c == f64::NEG_INFINITY {
            0.0
        } else {
            logistic(self.logit_c)
        }
    }

    fn to_params(self) -> ItemParams {
        ItemParams { a: self.a, b: -self.d / self.a, c: self.c() }
    }

    /// Projects onto the admissible box.
    fn clamp(self, kind: ModelKind) -> Self {
        let a = if kind == ModelKind::Rasch { 1.0 } else { self.a.clamp(A_BOUNDS.0, A_BOUNDS.1) };
        let b = (-self.d / self.a).clamp(B_BOUNDS.0, B_BOUNDS.1);
        let logit_c = if kind == ModelKind::ThreePl {
            self.logit_c.clamp(LOGIT_C_BOUNDS.0, LOGIT_C_BOUNDS.1)
        } else {
            f64::NEG_INFINITY
        };
        Self { a, d: -a * b, logit_c }
    }
}

struct ItemObjective<'a> {
    kind: ModelKind,
    nodes: &'a [f64],
    n_q: &'a [f64],
    r_q: &'a [f64],
    prior: GuessingPrior,
}

impl ItemObjective<'_> {
    fn value(&self, w: &Working) -> f64 {
        let p = w.to_params();
        let mut v = 0.0;
        for ((&t, &n), &r) in self.nodes.iter().zip(self.n_q).zip(self.r_q) {
            let (lp, lq) = log_probs(&p, t);
            v += r * lp + (n - r) * lq;
        }
        if self.kind == ModelKind::ThreePl {
            v += self.prior.log_density(w.logit_c);
        }
        v
    }

    /// Gradient and expected information in the free coordinates.
    fn score_and_info(&self, w: &Working) -> (Vec<f64>, Vec<f64>) {
        let dim = self.kind.item_param_count();
        let mut g = vec![0.0; dim];
        let mut h = vec![0.0; dim * dim];
        let c = w.c();
        for ((&t, &n), &r) in self.nodes.iter().zip(self.n_q).zip(self.r_q) {
            let s = logistic(w.a * t + w.d);
            let p = c + (1.0 - c) * s;
            let u = r - n * p;
            // dP/dz / (P(1-P)) = s / P and dP/dlogit_c / (P(1-P)) = c / P
            let gz = u * s / p;
            let izz = n * (1.0 - c) * s * s * (1.0 - s) / p;
            match self.kind {
                ModelKind::Rasch => {
                    g[0] += gz;
                    h[0] += izz;
                }
                ModelKind::TwoPl | ModelKind::ThreePl => {
                    g[0] += gz * t;
                    g[1] += gz;
                    h[0] += izz * t * t;
                    h[1] += izz * t;
                    h[dim + 1] += izz;
                    if self.kind == ModelKind::ThreePl {
                        let gc = u * c / p;
                        let izc = n * c * (1.0 - c) * s * (1.0 - s) / p;
                        let icc_ = n * c * c * (1.0 - c) * (1.0 - s) / p;
                        g[2] += gc;
                        h[2] += izc * t;
                        h[dim + 2] += izc;
                        h[2 * dim + 2] += icc_;
                    }
                }
            }
        }
        if self.kind == ModelKind::ThreePl {
            g[2] -= (w.logit_c - self.prior.mean_logit) / self.prior.sd.powi(2);
            h[2 * dim + 2] += 1.0 / self.prior.sd.powi(2);
        }
        for r in 0..dim {
            for c2 in 0..r {
                h[r * dim + c2] = h[c2 * dim + r];
            }
        }
        (g, h)
    }
}

fn solve_spd(h: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let dim = g.len();
    let mut mat = nalgebra::DMatrix::from_row_slice(dim, dim, h);
    let scale = (0..dim).map(|i| mat[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..dim {
        mat[(i, i)] += 1e-10 * scale;
    }
    let chol = mat.cholesky()?;
    Some(chol.solve(&nalgebra::DVector::from_column_slice(g)).as_slice().to_vec())
}

fn apply(w: &Working, kind: ModelKind, step: &[f64], scale: f64) -> Working {
    let mut out = *w;
    match kind {
        ModelKind::Rasch => out.d += scale * step[0],
        _ => {
            out.a += scale * step[0];
            out.d += scale * step[1];
            if kind == ModelKind::ThreePl {
                out.logit_c += scale * step[2];
            }
        }
    }
    out.clamp(kind)
}

/// Fisher scoring with step halving; never decreases the objective.
fn maximize_item(obj: &ItemObjective<'_>, start: Working) -> Working {
    let mut w = start.clamp(obj.kind);
    let mut value = obj.value(&w);
    for _ in 0..100 {
        let (g, h) = obj.score_and_info(&w);
        let Some(step) = solve_spd(&h, &g) else { break };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = apply(&w, obj.kind, &step, scale);
            let v = obj.value(&cand);
            if v >= value {
                let change = (cand.a - w.a).abs().max((cand.d - w.d).abs()).max(
                    if obj.kind == ModelKind::ThreePl { (cand.logit_c - w.logit_c).abs() } else { 0.0 },
                );
                w = cand;
                let gain = v - value;
                value = v;
                improved = change > 1e-10 && gain > 1e-13;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

/// Maximizes `Σ_q n_q ln w_q(sd)` over the latent standard deviation.
fn maximize_latent_sd(nodes: &[f64], n_q: &[f64]) -> f64 {
    let objective = |log_sd: f64| -> f64 {
        let w = normal_weights(nodes, log_sd.exp());
        n_q.iter().zip(&w).map(|(n, wq)| n * wq.ln()).sum()
    };
    // golden-section search on log sd
    let (mut lo, mut hi) = (SD_BOUNDS.0.ln(), SD_BOUNDS.1.ln());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        }
    }
    ((lo + hi) / 2.0).exp()
}

fn start_values(m: &ResponseMatrix, kind: ModelKind) -> Vec<ItemParams> {
    let n = m.n_examinees() as f64;
    (0..m.n_items())
        .map(|j| {
            let p = m.rows().filter(|r| r[j] == 1).count() as f64 / n;
            let b = (1.7 * normal_quantile(1.0 - p)).clamp(B_BOUNDS.0, B_BOUNDS.1);
            let c = if kind == ModelKind::ThreePl { 0.2 } else { 0.0 };
            ItemParams { a: 1.0, b, c }
        })
        .collect()
}

fn validate(m: &ResponseMatrix) -> Result<(), IrtError> {
    if m.n_examinees() < 10 {
        return Err(IrtError::TooFewExaminees(m.n_examinees()));
    }
    let n = m.n_examinees();
    let degenerate: Vec<String> = (0..m.n_items())
        .filter(|&j| {
            let s = m.rows().filter(|r| r[j] == 1).count();
            s == 0 || s == n
        })
        .map(|j| m.item_ids()[j].clone())
        .collect();
    if degenerate.is_empty() {
        Ok(())
    } else {
        Err(IrtError::DegenerateItem(degenerate))
    }
}

fn log_prior_total(kind: ModelKind, items: &[ItemParams], prior: &GuessingPrior) -> f64 {
    if kind != ModelKind::ThreePl {
        return 0.0;
    }
    items
        .iter()
        .map(|p| {
            let c = p.c.clamp(1e-300, 1.0 - 1e-16);
            prior.log_density((c / (1.0 - c)).ln())
        })
        .sum()
}

/// Fits a Rasch, 2PL or 3PL model by marginal maximum likelihood.
///
/// Non-convergence within `max_iters` is not an error: the fit is returned
/// with `converged == false`.
pub fn fit_mml(m: &ResponseMatrix, kind: ModelKind, config: &FitConfig) -> Result<IrtFit, IrtError> {
    validate(m)?;
    let j = m.n_items();
    let mut items = match &config.start {
        Some(s) if s.len() != j => return Err(IrtError::StartMismatch { found: s.len(), expected: j }),
        Some(s) => s
            .iter()
            .map(|p| {
                let mut p = *p;
                if kind != ModelKind::ThreePl {
                    p.c = 0.0;
                }
                if kind == ModelKind::Rasch {
                    p.a = 1.0;
                }
                Working::from_params(&p, kind).clamp(kind).to_params()
            })
            .collect(),
        None => start_values(m, kind),
    };
    let mut sd = if kind == ModelKind::Rasch { config.start_sd.unwrap_or(1.0) } else { 1.0 };
    let base_grid = QuadratureGrid::new(config.quadrature, 1.0);
    let nq = base_grid.len();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let grid = base_grid.with_sd(sd);
        let expected = e_step(m, &items, &grid);
        trace.push(expected.loglik + log_prior_total(kind, &items, &config.guessing_prior));
        iterations += 1;

        let mut max_change: f64 = 0.0;
        let updated: Vec<ItemParams> = items
            .iter()
            .enumerate()
            .map(|(jj, p)| {
                let obj = ItemObjective {
                    kind,
                    nodes: grid.nodes(),
                    n_q: &expected.n_q,
                    r_q: &expected.r_jq[jj * nq..(jj + 1) * nq],
                    prior: config.guessing_prior,
                };
                maximize_item(&obj, Working::from_params(p, kind)).to_params()
            })
            .collect();
        for (old, new) in items.iter().zip(&updated) {
            max_change = max_change.max((old.a - new.a).abs()).max((old.b - new.b).abs()).max((old.c - new.c).abs());
        }
        items = updated;
        if kind == ModelKind::Rasch {
            let new_sd = maximize_latent_sd(grid.nodes(), &expected.n_q);
            max_change = max_change.max((new_sd - sd).abs());
            sd = new_sd;
        }
        if max_change < config.tol {
            converged = true;
            break;
        }
    }

    let grid = base_grid.with_sd(sd);
    let loglik = marginal_log_likelihood(m, &items, &grid);
    let log_prior = log_prior_total(kind, &items, &config.guessing_prior);
    trace.push(loglik + log_prior);
    Ok(IrtFit {
        kind,
        item_ids: m.item_ids().to_vec(),
        items,
        latent_sd: sd,
        loglik,
        log_prior,
        k: kind.param_count(j),
        n: m.n_examinees(),
        iterations,
        converged,
        trace,
        quadrature: config.quadrature,
    })
}

/// Model-implied probability of a correct response at each node, item-major.
pub(crate) fn probability_table(items: &[ItemParams], nodes: &[f64]) -> Vec<f64> {
    items.iter().flat_map(|p| nodes.iter().map(move |&t| icc(p, t))).collect()
}
