//! Report sections and the pass/fail criteria derived from them.
//!
//! Every verdict is recomputed from numbers stored in the report itself, so
//! an external checker can re-derive them from `report.json` alone.

use psychfit_core::ctt::{ItemStats, SelectionReport};
use psychfit_core::dimensionality::{FactorCriteria, FactorSolution, Q3Pair, Q3Report};
use psychfit_core::fit::{FitReport, ItemFitRow, LrtResult};
use psychfit_core::irt::{IrtFit, ItemParams, ModelKind};
use psychfit_core::regression::{DiagnosticsReport, NestedFTest, RegressionResult};
use psychfit_core::reliability::ReliabilityReport;
use serde::{Deserialize, Serialize};

use crate::config::Thresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CttSection {
    pub n_examinees: usize,
    pub n_items: usize,
    pub upper_lower_group_size: usize,
    pub stats: Vec<ItemStats>,
    pub selection: SelectionReport,
    /// Whether excluded items were dropped before the IRT stages.
    pub filtered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionsSection {
    pub chi2: f64,
    pub df: f64,
    pub chi2_over_df: f64,
    pub rmsea: f64,
    pub rmsea_ci90: (f64, f64),
    pub srmsr: f64,
    pub criteria_pass: FactorCriteria,
    pub q3_max: f64,
    pub q3_threshold: f64,
    pub q3_flagged_pairs: Vec<Q3Pair>,
    /// Model whose EAP scores fed the Q3 residuals.
    pub q3_model: ModelKind,
    pub factor: FactorSolution,
    pub q3: Q3Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitItem {
    pub id: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: ModelKind,
    pub loglik: f64,
    pub log_prior: f64,
    pub k: usize,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub latent_sd: f64,
    pub items: Vec<FitItem>,
}

impl FitSummary {
    pub fn from_fit(fit: &IrtFit) -> Self {
        Self {
            model: fit.kind,
            loglik: fit.loglik,
            log_prior: fit.log_prior,
            k: fit.k,
            n: fit.n,
            converged: fit.converged,
            iterations: fit.iterations,
            latent_sd: fit.latent_sd,
            items: fit
                .item_ids
                .iter()
                .zip(&fit.items)
                .map(|(id, p)| FitItem { id: id.clone(), a: p.a, b: p.b, c: p.c })
                .collect(),
        }
    }

    pub fn item_params(&self) -> Vec<ItemParams> {
        self.items.iter().map(|i| ItemParams::new(i.a, i.b, i.c)).collect()
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSection {
    pub fit_reports: Vec<FitReport>,
    pub lrt: Vec<LrtResult>,
    pub alpha: f64,
    pub selected: ModelKind,
}

impl CompareSection {
    pub fn report_for(&self, model: ModelKind) -> Option<&FitReport> {
        self.fit_reports.iter().find(|r| r.model == model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelItemFit {
    pub model: ModelKind,
    pub rows: Vec<ItemFitRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSection {
    pub result: RegressionResult,
    /// Interaction model against the main-effects model.
    pub f_test: NestedFTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSection {
    pub dv: String,
    pub ivs: Vec<String>,
    pub result: RegressionResult,
    pub diagnostics: DiagnosticsReport,
    pub interactions: Option<InteractionSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Below(f64),
    AtMost(f64),
    Above(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Rule {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Rule::Below(t) => v < t,
            Rule::AtMost(t) => v <= t,
            Rule::Above(t) => v > t,
            Rule::AtLeast(t) => v >= t,
            Rule::Within(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub name: String,
    /// `None` when the statistic is undefined; such criteria fail.
    pub value: Option<f64>,
    pub rule: Rule,
    pub pass: bool,
}

impl CriterionVerdict {
    fn new(name: &str, value: Option<f64>, rule: Rule) -> Self {
        let value = value.filter(|v| v.is_finite());
        Self { name: name.into(), value, rule, pass: value.is_some_and(|v| rule.holds(v)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub n_examinees: usize,
    /// Items entering the IRT stages (after any filtering).
    pub items_analyzed: Vec<String>,
    pub ctt: Option<CttSection>,
    pub assumptions: Option<AssumptionsSection>,
    pub fits: Vec<FitSummary>,
    pub comparison: Option<CompareSection>,
    pub item_fit: Vec<ModelItemFit>,
    pub reliability: Option<ReliabilityReport>,
    pub regression: Option<RegressionSection>,
    pub selected_model: Option<ModelKind>,
    pub criteria: Vec<CriterionVerdict>,
    pub all_pass: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn new(seed: u64, thresholds: Thresholds) -> Self {
        Self {
            seed,
            thresholds,
            n_examinees: 0,
            items_analyzed: Vec::new(),
            ctt: None,
            assumptions: None,
            fits: Vec::new(),
            comparison: None,
            item_fit: Vec::new(),
            reliability: None,
            regression: None,
            selected_model: None,
            criteria: Vec::new(),
            all_pass: true,
            warnings: Vec::new(),
        }
    }

    pub fn fit(&self, model: ModelKind) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.model == model)
    }

    /// Recomputes `criteria` and `all_pass` from the numeric sections.
    pub fn finalize(&mut self) {
        self.criteria = evaluate_criteria(self);
        self.all_pass = self.criteria.iter().all(|c| c.pass);
    }
}

/// Criteria for every section present in the report.
pub fn evaluate_criteria(report: &ValidationReport) -> Vec<CriterionVerdict> {
    let t = &report.thresholds;
    let mut out = Vec::new();
    if let Some(a) = &report.assumptions {
        let u = &t.unidimensionality;
        out.push(CriterionVerdict::new("unidimensionality.chi2_over_df", Some(a.chi2_over_df), Rule::Below(u.chi2_over_df)));
        out.push(CriterionVerdict::new("unidimensionality.rmsea", Some(a.rmsea), Rule::Below(u.rmsea)));
        out.push(CriterionVerdict::new("unidimensionality.srmsr", Some(a.srmsr), Rule::Below(u.srmsr)));
        out.push(CriterionVerdict::new("local_independence.q3_max", Some(a.q3_max), Rule::AtMost(t.q3)));
    }
    let selected = report.selected_model;
    if let (Some(cmp), Some(model)) = (&report.comparison, selected) {
        let fr = cmp.report_for(model);
        out.push(CriterionVerdict::new("model_fit.rmsea", fr.and_then(|r| r.rmsea), Rule::Below(t.fit.rmsea)));
        out.push(CriterionVerdict::new("model_fit.srmsr", fr.map(|r| r.srmsr), Rule::Below(t.fit.srmsr)));
        out.push(CriterionVerdict::new("model_fit.tli", fr.and_then(|r| r.tli), Rule::Above(t.fit.acceptable)));
        out.push(CriterionVerdict::new("model_fit.cfi", fr.and_then(|r| r.cfi), Rule::Above(t.fit.acceptable)));
    }
    if let Some(model) = selected {
        if let Some(itemfit) = report.item_fit.iter().find(|f| f.model == model) {
            let min_adj = itemfit.rows.iter().filter_map(|r| r.p_adjusted).reduce(f64::min);
            out.push(CriterionVerdict::new("item_fit.min_adjusted_p", min_adj, Rule::AtLeast(t.item_fit_alpha)));
        }
    }
    if let Some(r) = &report.reliability {
        out.push(CriterionVerdict::new("reliability.alpha", Some(r.alpha), Rule::AtLeast(t.reliability)));
        out.push(CriterionVerdict::new("reliability.omega_total", Some(r.omega_total), Rule::AtLeast(t.reliability)));
    }
    if let Some(reg) = &report.regression {
        let d = &reg.diagnostics;
        let alpha = t.regression_alpha;
        out.push(CriterionVerdict::new("regression.f_test_p", Some(reg.result.f_p_value), Rule::Below(alpha)));
        out.push(CriterionVerdict::new("regression.normality_p", Some(d.shapiro_wilk.p_value), Rule::AtLeast(alpha)));
        out.push(CriterionVerdict::new("regression.homoscedasticity_p", Some(d.breusch_pagan.p_value), Rule::AtLeast(alpha)));
        let (lo, hi) = t.durbin_watson;
        out.push(CriterionVerdict::new("regression.durbin_watson", Some(d.durbin_watson.d), Rule::Within(lo, hi)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert!(Rule::Below(0.05).holds(0.049));
        assert!(!Rule::Below(0.05).holds(0.05));
        assert!(Rule::AtMost(0.2).holds(0.2));
        assert!(!Rule::Above(0.9).holds(0.9));
        assert!(Rule::AtLeast(0.7).holds(0.7));
        assert!(Rule::Within(1.5, 2.5).holds(2.5));
        assert!(!Rule::Within(1.5, 2.5).holds(1.49));
    }

    #[test]
    fn undefined_values_fail() {
        let c = CriterionVerdict::new("x", None, Rule::AtLeast(0.0));
        assert!(!c.pass);
        let c = CriterionVerdict::new("x", Some(f64::NAN), Rule::AtLeast(0.0));
        assert!(!c.pass && c.value.is_none());
    }

    #[test]
    fn empty_report_has_no_criteria() {
        let mut r = ValidationReport::new(1, Thresholds::default());
        r.finalize();
        assert!(r.criteria.is_empty());
        assert!(r.all_pass);
    }
}
