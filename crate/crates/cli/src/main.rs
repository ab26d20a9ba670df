use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use psychfit_cli::config::{PipelineConfig, RegressionConfig};
use psychfit_cli::forms::export_forms;
use psychfit_cli::output::{ensure_dir, write_json, write_text};
use psychfit_cli::pipeline::{
    assumptions_stage, compare_stage, ctt_stage, fit_stage, itemfit_stage, load_inputs, regression_stage,
    reliability_stage, run_pipeline, write_assumptions, write_compare, write_ctt, write_fit, write_itemfit,
    write_regression, write_reliability, Inputs,
};
use psychfit_cli::report::{FitSummary, ValidationReport};
use psychfit_cli::exit;
use psychfit_core::ingest::{read_score_csv, ItemBank};
use psychfit_core::irt::ModelKind;
use psychfit_core::regression::BreuschPaganVariant;
use psychfit_core::simulate::{simulate_responses, SimSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "psychfit", version, about = "Test validation: item analysis, IRT fitting, fit statistics, reliability and criterion regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Item difficulty and discrimination; writes itemstats.csv and selection.json.
    Ctt(Common),
    /// Unidimensionality and local independence; writes assumptions.json.
    Assume(Common),
    /// Fit one IRT model; writes fit.json and its ICC grid.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
    },
    /// Fit the model chain, compare by LRT and M2 indices; writes compare.json and itemfit.csv.
    Compare(Common),
    /// S-χ² item fit with Benjamini-Hochberg adjustment; writes itemfit.csv.
    Itemfit(Common),
    /// Alpha, omega and the test information function; writes reliability.json and tif.svg.
    Reliability(Common),
    /// Standardized OLS with residual diagnostics; writes regression.json and pred_vs_obs.svg.
    Regress(RegressArgs),
    /// Simulate dichotomous responses; writes responses.csv and truth.json.
    Simulate {
        /// Simulation spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Randomized forms with answer-key sidecars.
    Forms {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_forms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full pipeline; writes every stage's files plus report.json.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        regression: RegressionFlags,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON); flags given alongside override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Item bank with keys; responses are then raw option labels.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated model list (rasch, 2pl, 3pl).
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Vec<ModelKind>,
    /// Keep low-discrimination items in the IRT stages.
    #[arg(long)]
    no_filter: bool,
    #[arg(long)]
    discrimination: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct RegressionFlags {
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    dv: Option<String>,
    #[arg(long, value_delimiter = ',')]
    ivs: Vec<String>,
    /// Also fit all interaction terms and test them jointly.
    #[arg(long)]
    interactions: bool,
    /// Leave the dependent variable unstandardized.
    #[arg(long)]
    raw_dv: bool,
    #[arg(long, value_enum)]
    bp: Option<BpVariant>,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: RegressionFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum BpVariant {
    Koenker,
    Classical,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::from_path(p)?,
        None => PipelineConfig::default(),
    })
}

fn build_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = load_config(c.config.as_deref())?;
    if let Some(r) = &c.responses {
        cfg.responses = r.clone();
    }
    if c.bank.is_some() {
        cfg.bank = c.bank.clone();
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if !c.models.is_empty() {
        cfg.models = c.models.clone();
    }
    if c.no_filter {
        cfg.filter_items = false;
    }
    if let Some(d) = c.discrimination {
        cfg.thresholds.discrimination = d;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.config.is_none() && c.responses.is_none() {
        bail!("either --config or --responses is required");
    }
    Ok(cfg)
}

fn apply_regression(cfg: &mut PipelineConfig, f: &RegressionFlags) {
    if f.scores.is_some() {
        cfg.scores = f.scores.clone();
    }
    if let Some(dv) = &f.dv {
        let mut rc = cfg.regression.clone().unwrap_or(RegressionConfig {
            dv: dv.clone(),
            ivs: Vec::new(),
            interactions: false,
            raw_dv: false,
            breusch_pagan: BreuschPaganVariant::default(),
        });
        rc.dv = dv.clone();
        cfg.regression = Some(rc);
    }
    if let Some(rc) = cfg.regression.as_mut() {
        if !f.ivs.is_empty() {
            rc.ivs = f.ivs.clone();
        }
        rc.interactions |= f.interactions;
        rc.raw_dv |= f.raw_dv;
        if let Some(bp) = f.bp {
            rc.breusch_pagan = match bp {
                BpVariant::Koenker => BreuschPaganVariant::Koenker,
                BpVariant::Classical => BreuschPaganVariant::Classical,
            };
        }
    }
}

/// Prints one line per criterion and maps the verdicts to an exit code.
fn conclude(mut report: ValidationReport) -> i32 {
    report.finalize();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.criteria {
        let value = c.value.map_or("undefined".to_string(), |v| format!("{v:.4}"));
        println!("{} {} = {value} ({:?})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.rule);
    }
    if report.all_pass {
        exit::PASS
    } else {
        exit::CRITERIA_FAILED
    }
}

struct Prepared {
    cfg: PipelineConfig,
    report: ValidationReport,
    inputs: Inputs,
}

fn prepare(c: &Common) -> Result<Prepared> {
    let cfg = build_config(c)?;
    cfg.validate()?;
    let inputs = load_inputs(&cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let report = ValidationReport::new(cfg.seed, cfg.thresholds.clone());
    Ok(Prepared { cfg, report, inputs })
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ctt(c) => {
            let Prepared { cfg, inputs, .. } = prepare(&c)?;
            let (ctt, _) = ctt_stage(&inputs.responses, &cfg)?;
            write_ctt(&cfg.output_dir, &ctt)?;
            println!("retained {} of {} items; excluded: {}", ctt.selection.retained.len(), ctt.n_items, ctt.selection.excluded.join(", "));
            Ok(exit::PASS)
        }
        Command::Assume(c) => {
            let Prepared { mut cfg, mut report, inputs } = prepare(&c)?;
            if c.models.is_empty() && c.config.is_none() {
                cfg.models = vec![ModelKind::TwoPl];
            }
            let (_, m) = ctt_stage(&inputs.responses, &cfg)?;
            let fits = fit_stage(&m, &cfg, &mut report.warnings)?;
            let a = assumptions_stage(&m, &fits, &cfg, &mut report.warnings)?;
            write_assumptions(&cfg.output_dir, &a)?;
            report.assumptions = Some(a);
            Ok(conclude(report))
        }
        Command::Fit { common, model } => {
            let Prepared { mut cfg, mut report, inputs } = prepare(&common)?;
            cfg.models = vec![model];
            let (_, m) = ctt_stage(&inputs.responses, &cfg)?;
            let fits = fit_stage(&m, &cfg, &mut report.warnings)?;
            let summary = FitSummary::from_fit(&fits[0]);
            write_fit(&cfg.output_dir, &summary)?;
            write_json(&cfg.output_dir.join("fit.json"), &summary)?;
            println!("{model}: loglik {:.3}, k {}, converged {}", summary.loglik, summary.k, summary.converged);
            Ok(conclude(report))
        }
        Command::Compare(c) => {
            let Prepared { cfg, mut report, inputs } = prepare(&c)?;
            let (_, m) = ctt_stage(&inputs.responses, &cfg)?;
            let fits = fit_stage(&m, &cfg, &mut report.warnings)?;
            let cmp = compare_stage(&m, &fits, &cfg, &mut report.warnings)?;
            let item_fit = itemfit_stage(&m, &fits, &mut report.warnings)?;
            for f in &fits {
                write_fit(&cfg.output_dir, &FitSummary::from_fit(f))?;
            }
            write_compare(&cfg.output_dir, &cmp)?;
            write_itemfit(&cfg.output_dir, &item_fit)?;
            println!("selected model: {}", cmp.selected);
            report.selected_model = Some(cmp.selected);
            report.comparison = Some(cmp);
            report.item_fit = item_fit;
            Ok(conclude(report))
        }
        Command::Itemfit(c) => {
            let Prepared { cfg, mut report, inputs } = prepare(&c)?;
            let (_, m) = ctt_stage(&inputs.responses, &cfg)?;
            let fits = fit_stage(&m, &cfg, &mut report.warnings)?;
            let item_fit = itemfit_stage(&m, &fits, &mut report.warnings)?;
            write_itemfit(&cfg.output_dir, &item_fit)?;
            Ok(conclude(report))
        }
        Command::Reliability(c) => {
            let Prepared { cfg, mut report, inputs } = prepare(&c)?;
            let (_, m) = ctt_stage(&inputs.responses, &cfg)?;
            let fits = fit_stage(&m, &cfg, &mut report.warnings)?;
            let a = assumptions_stage(&m, &fits, &cfg, &mut report.warnings)?;
            let cmp = compare_stage(&m, &fits, &cfg, &mut report.warnings)?;
            let fit = fits.iter().find(|f| f.kind == cmp.selected).expect("selected model was fitted");
            let r = reliability_stage(&m, &a, fit, &cfg, &mut report.warnings)?;
            write_reliability(&cfg.output_dir, &r)?;
            println!("alpha {:.3}, omega {:.3}, information peak {:.3} at θ = {:.3} ({})", r.alpha, r.omega_total, r.tif_peak_value, r.tif_peak_theta, cmp.selected);
            report.reliability = Some(r);
            Ok(conclude(report))
        }
        Command::Regress(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_regression(&mut cfg, &args.flags);
            if let Some(o) = &args.out {
                cfg.output_dir = o.clone();
            }
            let rc = cfg.regression.clone().context("--dv and --ivs (or a config with `regression`) are required")?;
            let scores_path = cfg.scores.clone().context("--scores is required")?;
            cfg.validate()?;
            let scores = read_score_csv(&scores_path).with_context(|| format!("reading {}", scores_path.display()))?;
            let section = regression_stage(&scores, &rc)?;
            ensure_dir(&cfg.output_dir)?;
            write_regression(&cfg.output_dir, &section)?;
            let r = &section.result;
            println!("F({}, {}) = {:.3}, p = {:.4}, R² = {:.3}", r.df_model, r.df_resid, r.f_statistic, r.f_p_value, r.r_squared);
            let mut report = ValidationReport::new(cfg.seed, cfg.thresholds.clone());
            report.regression = Some(section);
            Ok(conclude(report))
        }
        Command::Simulate { spec, seed, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut spec: SimSpec = serde_json::from_str(&text).context("parsing simulation spec")?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let data = simulate_responses(&spec);
            ensure_dir(&out)?;
            write_text(&out.join("responses.csv"), &data.responses.to_csv())?;
            #[derive(Serialize)]
            struct Truth<'a> {
                spec: &'a SimSpec,
                item_ids: &'a [String],
                items: &'a [psychfit_core::irt::ItemParams],
                thetas: &'a [f64],
            }
            write_json(
                &out.join("truth.json"),
                &Truth { spec: &spec, item_ids: data.responses.item_ids(), items: &data.items, thetas: &data.thetas },
            )?;
            println!("simulated {} examinees × {} items", data.responses.n_examinees(), data.responses.n_items());
            Ok(exit::PASS)
        }
        Command::Forms { bank, n_forms, seed, out } => {
            let bank = ItemBank::from_path(&bank).with_context(|| format!("reading {}", bank.display()))?;
            let written = export_forms(&bank, n_forms, seed, &out)?;
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(exit::PASS)
        }
        Command::Report { common, regression } => {
            let mut cfg = build_config(&common)?;
            apply_regression(&mut cfg, &regression);
            let report = run_pipeline(&cfg)?;
            if let Some(m) = report.selected_model {
                println!("selected model: {m}");
            }
            Ok(conclude(report))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
