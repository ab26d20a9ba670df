//! Pipeline configuration, loadable from a single JSON file.

use std::path::{Path, PathBuf};

use psychfit_core::ctt::{CttConfig, DiscriminationVariant};
use psychfit_core::dimensionality::{UnidimensionalityThresholds, DEFAULT_Q3_THRESHOLD};
use psychfit_core::fit::FitThresholds;
use psychfit_core::irt::{ModelKind, QuadratureSpec};
use psychfit_core::regression::BreuschPaganVariant;
use psychfit_core::reliability::{OmegaSource, DEFAULT_RELIABILITY_THRESHOLD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no IRT models requested")]
    NoModels,
    #[error("threshold `{name}` must be positive and finite, got {value}")]
    NonPositiveThreshold { name: &'static str, value: f64 },
    #[error("upper-lower group fraction must lie in (0, 0.5], got {0}")]
    GroupFraction(f64),
    #[error("quadrature needs at least 5 nodes on an increasing interval")]
    Quadrature,
    #[error("regression needs a dependent variable and at least one predictor")]
    EmptyRegression,
    #[error("regression settings given without a score table")]
    MissingScores,
    #[error("reading config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub discrimination: f64,
    pub discrimination_variant: DiscriminationVariant,
    pub q3: f64,
    pub reliability: f64,
    pub unidimensionality: UnidimensionalityThresholds,
    pub fit: FitThresholds,
    /// Significance level of the nested likelihood-ratio tests.
    pub selection_alpha: f64,
    /// Level applied to BH-adjusted item-fit p-values.
    pub item_fit_alpha: f64,
    /// Level for the regression F-test and the residual diagnostics.
    pub regression_alpha: f64,
    /// Acceptable Durbin-Watson band.
    pub durbin_watson: (f64, f64),
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            discrimination: 0.3,
            discrimination_variant: DiscriminationVariant::PointBiserial,
            q3: DEFAULT_Q3_THRESHOLD,
            reliability: DEFAULT_RELIABILITY_THRESHOLD,
            unidimensionality: UnidimensionalityThresholds::default(),
            fit: FitThresholds::default(),
            selection_alpha: 0.05,
            item_fit_alpha: 0.05,
            regression_alpha: 0.05,
            durbin_watson: (1.5, 2.5),
        }
    }
}

impl Thresholds {
    fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("discrimination", self.discrimination),
            ("q3", self.q3),
            ("reliability", self.reliability),
            ("unidimensionality.chi2_over_df", self.unidimensionality.chi2_over_df),
            ("unidimensionality.rmsea", self.unidimensionality.rmsea),
            ("unidimensionality.srmsr", self.unidimensionality.srmsr),
            ("fit.rmsea", self.fit.rmsea),
            ("fit.srmsr", self.fit.srmsr),
            ("fit.acceptable", self.fit.acceptable),
            ("fit.excellent", self.fit.excellent),
            ("selection_alpha", self.selection_alpha),
            ("item_fit_alpha", self.item_fit_alpha),
            ("regression_alpha", self.regression_alpha),
            ("durbin_watson.lower", self.durbin_watson.0),
            ("durbin_watson.upper", self.durbin_watson.1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub dv: String,
    pub ivs: Vec<String>,
    /// Also fit the full interaction model and test it against the main effects.
    #[serde(default)]
    pub interactions: bool,
    #[serde(default)]
    pub raw_dv: bool,
    #[serde(default)]
    pub breusch_pagan: BreuschPaganVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub responses: PathBuf,
    /// Item bank with answer keys; when present, responses are raw option labels.
    pub bank: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub regression: Option<RegressionConfig>,
    pub models: Vec<ModelKind>,
    pub thresholds: Thresholds,
    /// Drop low-discrimination items before the IRT stages.
    pub filter_items: bool,
    pub ctt: CttConfig,
    pub quadrature: QuadratureSpec,
    pub omega_source: OmegaSource,
    /// θ range and sample count for the test information curve.
    pub information_grid: (f64, f64, usize),
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            responses: PathBuf::from("responses.csv"),
            bank: None,
            scores: None,
            regression: None,
            models: ModelKind::ALL.to_vec(),
            thresholds: Thresholds::default(),
            filter_items: true,
            ctt: CttConfig::default(),
            quadrature: QuadratureSpec::default(),
            omega_source: OmegaSource::default(),
            information_grid: (-4.0, 4.0, 161),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        // Relative input paths are taken from the config file's directory.
        if let Some(dir) = path.parent() {
            for p in [Some(&mut cfg.responses), cfg.bank.as_mut(), cfg.scores.as_mut()].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.models.is_empty() {
            return Err(ConfigError::NoModels);
        }
        for (name, value) in self.thresholds.named() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::NonPositiveThreshold { name, value });
            }
        }
        let g = self.ctt.group_fraction;
        if !(g > 0.0 && g <= 0.5) {
            return Err(ConfigError::GroupFraction(g));
        }
        let q = &self.quadrature;
        let (lo, hi, n) = self.information_grid;
        if q.n_nodes < 5 || !(q.lo < q.hi) || !(lo < hi) || n < 2 {
            return Err(ConfigError::Quadrature);
        }
        if let Some(r) = &self.regression {
            if r.dv.is_empty() || r.ivs.is_empty() {
                return Err(ConfigError::EmptyRegression);
            }
            if self.scores.is_none() {
                return Err(ConfigError::MissingScores);
            }
        }
        Ok(())
    }

    /// Models in chain order, deduplicated.
    pub fn model_chain(&self) -> Vec<ModelKind> {
        let mut models = self.models.clone();
        models.sort();
        models.dedup();
        models
    }
}
