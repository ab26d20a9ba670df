//! Stage orchestration: ctt → filter → assumptions → fits → comparison →
//! item fit → reliability → regression, plus the output-directory writers.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use psychfit_core::ctt::{item_stats, select_items};
use psychfit_core::dimensionality::{q3, single_factor_fit, tetrachoric_matrix};
use psychfit_core::fit::{lrt, m2_family, s_chi2, select_model};
use psychfit_core::ingest::{read_response_csv, read_score_csv, IngestError, ItemBank, ResponseMatrix, ScoreTable, ScoringMode};
use psychfit_core::irt::{eap_scores, fit_mml, theta_grid, FitConfig, IrtFit, ModelKind};
use psychfit_core::regression::{
    diagnostics, interaction_terms, nested_f_test, ols, regress_table, OlsOptions,
};
use psychfit_core::reliability::reliability_report;
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig, RegressionConfig};
use crate::output::{ensure_dir, opt6, sig6, write_csv, write_json, write_text, OutputError};
use crate::plots::{icc_grid_svg, pred_vs_obs_svg, tif_svg};
use crate::report::{
    AssumptionsSection, CompareSection, CttSection, FitSummary, InteractionSection, ModelItemFit, RegressionSection,
    ValidationReport,
};
use psychfit_core::reliability::ReliabilityReport;

pub const PRED_VS_OBS_FILE: &str = "pred_vs_obs.svg";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl PipelineError {
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            PipelineError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

fn failed<E: Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

pub struct Inputs {
    pub responses: ResponseMatrix,
    pub scores: Option<ScoreTable>,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, PipelineError> {
    let at = |path: &Path| {
        let path = path.display().to_string();
        move |e: IngestError| PipelineError::Stage { stage: "ingest", message: format!("{path}: {e}") }
    };
    let bank = match &cfg.bank {
        Some(p) => Some(ItemBank::from_path(p).map_err(at(p))?),
        None => None,
    };
    let mode = if bank.is_some() { ScoringMode::Raw } else { ScoringMode::Scored };
    let responses = read_response_csv(&cfg.responses, mode, bank.as_ref()).map_err(at(&cfg.responses))?;
    let scores = match &cfg.scores {
        Some(p) => Some(read_score_csv(p).map_err(at(p))?),
        None => None,
    };
    Ok(Inputs { responses, scores })
}

/// Item statistics and selection; returns the matrix used downstream.
pub fn ctt_stage(m: &ResponseMatrix, cfg: &PipelineConfig) -> Result<(CttSection, ResponseMatrix), PipelineError> {
    let (stats, ul) = item_stats(m, &cfg.ctt).map_err(failed("ctt"))?;
    let t = &cfg.thresholds;
    let selection = select_items(&stats, t.discrimination, t.discrimination_variant);
    let analysed = if cfg.filter_items && !selection.excluded.is_empty() {
        m.select_items(&selection.retained).map_err(failed("filter"))?
    } else {
        m.clone()
    };
    let section = CttSection {
        n_examinees: m.n_examinees(),
        n_items: m.n_items(),
        upper_lower_group_size: ul.group_size,
        stats,
        selection,
        filtered: cfg.filter_items,
    };
    Ok((section, analysed))
}

pub fn fit_stage(m: &ResponseMatrix, cfg: &PipelineConfig, warnings: &mut Vec<String>) -> Result<Vec<IrtFit>, PipelineError> {
    let fc = FitConfig { quadrature: cfg.quadrature, ..FitConfig::default() };
    let mut fits = Vec::new();
    for kind in cfg.model_chain() {
        let fit = fit_mml(m, kind, &fc).map_err(failed("fit"))?;
        if !fit.converged {
            warnings.push(format!("{kind}: EM stopped after {} iterations without converging", fit.iterations));
        }
        if !fit.is_monotone() {
            warnings.push(format!("{kind}: EM objective decreased between iterations"));
        }
        fits.push(fit);
    }
    Ok(fits)
}

/// The fit used for Q3 residuals: the 2PL when available, otherwise the
/// most complex model fitted.
pub fn q3_fit(fits: &[IrtFit]) -> Option<&IrtFit> {
    fits.iter().find(|f| f.kind == ModelKind::TwoPl).or_else(|| fits.iter().max_by_key(|f| f.kind))
}

pub fn assumptions_stage(
    m: &ResponseMatrix,
    fits: &[IrtFit],
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<AssumptionsSection, PipelineError> {
    let t = &cfg.thresholds;
    let tm = tetrachoric_matrix(m);
    let factor = single_factor_fit(&tm, m.n_examinees(), &t.unidimensionality).map_err(failed("assumptions"))?;
    if factor.smoothed {
        warnings.push("tetrachoric matrix was not positive definite and was smoothed".into());
    }
    if factor.excluded_pairs > 0 {
        warnings.push(format!("{} boundary or undefined tetrachoric pair(s) excluded from the factor fit", factor.excluded_pairs));
    }
    if !factor.heywood_items.is_empty() {
        warnings.push(format!("Heywood case(s) in the one-factor solution: {}", factor.heywood_items.join(", ")));
    }
    let fit = q3_fit(fits).ok_or_else(|| failed("assumptions")("no fitted model for Q3"))?;
    let thetas = eap_scores(m, fit).map_err(failed("assumptions"))?;
    let q3 = q3(m, fit, &thetas, t.q3).map_err(failed("assumptions"))?;
    Ok(AssumptionsSection {
        chi2: factor.chi2,
        df: factor.df,
        chi2_over_df: factor.chi2_over_df,
        rmsea: factor.rmsea,
        rmsea_ci90: factor.rmsea_ci90,
        srmsr: factor.srmsr,
        criteria_pass: factor.criteria,
        q3_max: q3.max_abs,
        q3_threshold: q3.threshold,
        q3_flagged_pairs: q3.flagged.clone(),
        q3_model: fit.kind,
        factor,
        q3,
    })
}

pub fn compare_stage(
    m: &ResponseMatrix,
    fits: &[IrtFit],
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<CompareSection, PipelineError> {
    let mut fit_reports = Vec::new();
    for fit in fits {
        let report = m2_family(fit, m, &cfg.thresholds.fit).map_err(failed("compare"))?;
        if report.singular {
            warnings.push(format!("{}: M2 weight matrix singular; limited-information indices suppressed", fit.kind));
        }
        fit_reports.push(report);
    }
    let mut lrts = Vec::new();
    for pair in fits.windows(2) {
        let r = lrt(&pair[0], &pair[1]).map_err(failed("compare"))?;
        if r.negative_difference {
            warnings.push(format!("{} fit worse than nested {}; LRT statistic floored at 0", r.unrestricted, r.restricted));
        }
        lrts.push(r);
    }
    let alpha = cfg.thresholds.selection_alpha;
    let selection = select_model(fits, alpha).map_err(failed("compare"))?;
    Ok(CompareSection { fit_reports, lrt: lrts, alpha, selected: selection.selected })
}

pub fn itemfit_stage(m: &ResponseMatrix, fits: &[IrtFit], warnings: &mut Vec<String>) -> Result<Vec<ModelItemFit>, PipelineError> {
    fits.iter()
        .map(|fit| {
            let rows = s_chi2(fit, m).map_err(failed("itemfit"))?;
            let undefined: Vec<&str> = rows.iter().filter(|r| !r.is_defined()).map(|r| r.item_id.as_str()).collect();
            if !undefined.is_empty() {
                warnings.push(format!("{}: S-χ² undefined for {}", fit.kind, undefined.join(", ")));
            }
            Ok(ModelItemFit { model: fit.kind, rows })
        })
        .collect()
}

pub fn reliability_stage(
    m: &ResponseMatrix,
    assumptions: &AssumptionsSection,
    fit: &IrtFit,
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<ReliabilityReport, PipelineError> {
    let (lo, hi, n) = cfg.information_grid;
    let report = reliability_report(
        m,
        &assumptions.factor,
        fit,
        &theta_grid(lo, hi, n),
        cfg.omega_source,
        cfg.thresholds.reliability,
    )
    .map_err(failed("reliability"))?;
    warnings.extend(report.warnings.iter().cloned());
    Ok(report)
}

pub fn regression_stage(scores: &ScoreTable, rc: &RegressionConfig) -> Result<RegressionSection, PipelineError> {
    let opts = OlsOptions { standardize: true, raw_dv: rc.raw_dv };
    let result = regress_table(scores, &rc.dv, &rc.ivs, opts).map_err(failed("regression"))?;
    let mut diag = diagnostics(&result, rc.breusch_pagan).map_err(failed("regression"))?;
    diag.linearity_plot = Some(PRED_VS_OBS_FILE.into());
    let interactions = if rc.interactions && rc.ivs.len() >= 2 {
        let column = |name: &str| scores.column(name).map(<[f64]>::to_vec).expect("columns checked by regress_table");
        let main: Vec<(String, Vec<f64>)> = rc.ivs.iter().map(|n| (n.clone(), column(n))).collect();
        let mut all = main.clone();
        all.extend(interaction_terms(&main));
        let full = ols(&column(&rc.dv), &all, opts).map_err(failed("regression"))?;
        let f_test = nested_f_test(&result, &full).map_err(failed("regression"))?;
        Some(InteractionSection { result: full, f_test })
    } else {
        None
    };
    Ok(RegressionSection { dv: rc.dv.clone(), ivs: rc.ivs.clone(), result, diagnostics: diag, interactions })
}

/// Runs every stage in memory. The fitted models are returned alongside the
/// report for callers that need more than the serialized summaries.
pub fn analyze(inputs: &Inputs, cfg: &PipelineConfig) -> Result<(ValidationReport, Vec<IrtFit>), PipelineError> {
    cfg.validate()?;
    let mut report = ValidationReport::new(cfg.seed, cfg.thresholds.clone());
    let mut warnings = Vec::new();
    let (ctt, m) = ctt_stage(&inputs.responses, cfg)?;
    report.n_examinees = m.n_examinees();
    report.items_analyzed = m.item_ids().to_vec();
    report.ctt = Some(ctt);

    let fits = fit_stage(&m, cfg, &mut warnings)?;
    let assumptions = assumptions_stage(&m, &fits, cfg, &mut warnings)?;
    let comparison = compare_stage(&m, &fits, cfg, &mut warnings)?;
    let item_fit = itemfit_stage(&m, &fits, &mut warnings)?;
    let selected = fits.iter().find(|f| f.kind == comparison.selected).expect("selected model was fitted");
    let reliability = reliability_stage(&m, &assumptions, selected, cfg, &mut warnings)?;
    report.regression = match (&cfg.regression, &inputs.scores) {
        (Some(rc), Some(scores)) => Some(regression_stage(scores, rc)?),
        (Some(_), None) => return Err(ConfigError::MissingScores.into()),
        _ => None,
    };

    report.selected_model = Some(comparison.selected);
    report.fits = fits.iter().map(FitSummary::from_fit).collect();
    report.assumptions = Some(assumptions);
    report.comparison = Some(comparison);
    report.item_fit = item_fit;
    report.reliability = Some(reliability);
    report.warnings = warnings;
    report.finalize();
    Ok((report, fits))
}

/// Validates the config, runs all stages and writes the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<ValidationReport, PipelineError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let (report, _) = analyze(&inputs, cfg)?;
    write_outputs(&report, &cfg.output_dir)?;
    Ok(report)
}

pub fn write_ctt(dir: &Path, ctt: &CttSection) -> Result<Vec<PathBuf>, OutputError> {
    let header = ["item_id", "difficulty", "pbis", "upper_lower", "retained"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = ctt
        .stats
        .iter()
        .map(|s| {
            let retained = ctt.selection.retained.contains(&s.item_id);
            vec![s.item_id.clone(), sig6(s.difficulty), opt6(s.disc_point_biserial), sig6(s.disc_upper_lower), retained.to_string()]
        })
        .collect();
    let (stats, selection) = (dir.join("itemstats.csv"), dir.join("selection.json"));
    write_csv(&stats, &header, &rows)?;
    write_json(&selection, &ctt.selection)?;
    Ok(vec![stats, selection])
}

pub fn write_assumptions(dir: &Path, a: &AssumptionsSection) -> Result<Vec<PathBuf>, OutputError> {
    let path = dir.join("assumptions.json");
    write_json(&path, a)?;
    Ok(vec![path])
}

/// `fit_<model>.json` and the model's ICC grid.
pub fn write_fit(dir: &Path, fit: &FitSummary) -> Result<Vec<PathBuf>, OutputError> {
    let (json, svg) = (dir.join(format!("fit_{}.json", fit.model)), dir.join(format!("icc_{}.svg", fit.model)));
    write_json(&json, fit)?;
    write_text(&svg, &icc_grid_svg(&format!("Item characteristic curves ({})", fit.model), &fit.item_ids(), &fit.item_params()))?;
    Ok(vec![json, svg])
}

pub fn write_compare(dir: &Path, c: &CompareSection) -> Result<Vec<PathBuf>, OutputError> {
    let path = dir.join("compare.json");
    write_json(&path, c)?;
    Ok(vec![path])
}

/// One row per item with S-χ², df, p and BH-adjusted p for each model.
pub fn write_itemfit(dir: &Path, fits: &[ModelItemFit]) -> Result<Vec<PathBuf>, OutputError> {
    let mut header = vec!["item_id".to_string()];
    for f in fits {
        for col in ["s_chi2", "df", "p", "p_adj"] {
            header.push(format!("{}_{col}", f.model));
        }
    }
    let n_items = fits.first().map_or(0, |f| f.rows.len());
    let rows: Vec<Vec<String>> = (0..n_items)
        .map(|i| {
            let mut row = vec![fits[0].rows[i].item_id.clone()];
            for f in fits {
                let r = &f.rows[i];
                row.extend([opt6(r.s_chi2), r.df.to_string(), opt6(r.p_value), opt6(r.p_adjusted)]);
            }
            row
        })
        .collect();
    let path = dir.join("itemfit.csv");
    write_csv(&path, &header, &rows)?;
    Ok(vec![path])
}

pub fn write_reliability(dir: &Path, r: &ReliabilityReport) -> Result<Vec<PathBuf>, OutputError> {
    let (json, svg) = (dir.join("reliability.json"), dir.join("tif.svg"));
    write_json(&json, r)?;
    write_text(&svg, &tif_svg(&r.information))?;
    Ok(vec![json, svg])
}

pub fn write_regression(dir: &Path, r: &RegressionSection) -> Result<Vec<PathBuf>, OutputError> {
    let (json, svg) = (dir.join("regression.json"), dir.join(PRED_VS_OBS_FILE));
    write_json(&json, r)?;
    write_text(&svg, &pred_vs_obs_svg(&r.result.observed, &r.result.fitted))?;
    Ok(vec![json, svg])
}

/// Writes every section present in the report, then `report.json`.
pub fn write_outputs(report: &ValidationReport, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    if let Some(c) = &report.ctt {
        written.extend(write_ctt(dir, c)?);
    }
    if let Some(a) = &report.assumptions {
        written.extend(write_assumptions(dir, a)?);
    }
    for f in &report.fits {
        written.extend(write_fit(dir, f)?);
    }
    if let Some(c) = &report.comparison {
        written.extend(write_compare(dir, c)?);
    }
    if !report.item_fit.is_empty() {
        written.extend(write_itemfit(dir, &report.item_fit)?);
    }
    if let Some(r) = &report.reliability {
        written.extend(write_reliability(dir, r)?);
    }
    if let Some(r) = &report.regression {
        written.extend(write_regression(dir, r)?);
    }
    let path = dir.join("report.json");
    write_json(&path, report)?;
    written.push(path);
    Ok(written)
}
