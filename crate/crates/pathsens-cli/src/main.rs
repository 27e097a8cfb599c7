//! Command-line surface: classify bias, reproduce the placement grid,
//! correct and sweep effect estimates, solve for explain-away parameters,
//! query the analytic oracle, simulate, and fit.
//!
//! Exit codes: 0 success, 1 domain error (invalid model, roles, or
//! parameters), 2 usage error. Failures never write to stdout.

mod output;
mod spec;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathsens_core::dsl;
use pathsens_core::effects::{
    effect_triple_from_fit, EffectEstimate, EffectKind, EffectTriple,
};
use pathsens_core::estimation::{fit_sem, Dataset};
use pathsens_core::graph::{biased_edges, classify_bias, table1_grid, BiasReport, Table1Grid};
use pathsens_core::model::{PathModel, RoleAssignment};
use pathsens_core::scenarios::Scenario;
use pathsens_core::sensitivity::{
    bias_factor, correct, explain_away, sweep, RangeSpec, SensitivityParams,
};
use pathsens_core::simulation::{replicate, run_experiment, FittedSpec, SimulationConfig};

use output::Format;
use spec::{parse_edge_spec, parse_fit_spec, parse_formula, parse_range};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError::Domain(message.into())
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "pathsens",
    about = "Bias classification and sensitivity analysis for linear path models \
             with an unmeasured confounder",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the total, direct, and indirect effects as biased or not
    Classify(ClassifyArgs),
    /// Print the derived confounder-placement grid
    Table1(Table1Args),
    /// Apply a bias-factor correction to supplied effect estimates
    Correct(CorrectArgs),
    /// Correct over a (gamma, shift) grid and report robustness verdicts
    Sweep(SweepArgs),
    /// Solve for the bias factor that would eliminate an effect
    Solve(SolveArgs),
    /// Population coefficients and biases of a fitted equation
    Oracle(OracleArgs),
    /// Generate data from the model and fit one or more specifications
    Simulate(SimulateArgs),
    /// Fit a model to CSV data by per-equation least squares
    Fit(FitArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Model file in the line-oriented format (roles required)
    model: PathBuf,
    /// Rerun the classification with this effect edge absent, e.g. A->Y
    #[arg(long = "missing-edge")]
    missing_edge: Vec<String>,
    /// Rerun with each of the three effect edges absent in turn
    #[arg(long = "all-missing")]
    all_missing: bool,
    /// Append the per-edge bias list for the fitted specification
    #[arg(long)]
    edges: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct Table1Args {
    /// Exit nonzero if the derived grid disagrees with the expected pattern
    #[arg(long)]
    check: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct EffectInputs {
    /// Total effect point estimate
    #[arg(long, allow_negative_numbers = true)]
    total: Option<f64>,
    /// Total effect 95% interval: low high
    #[arg(long = "total-ci", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    total_ci: Option<Vec<f64>>,
    /// Direct effect point estimate
    #[arg(long, allow_negative_numbers = true)]
    direct: Option<f64>,
    #[arg(long = "direct-ci", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    direct_ci: Option<Vec<f64>>,
    /// Indirect effect point estimate
    #[arg(long, allow_negative_numbers = true)]
    indirect: Option<f64>,
    #[arg(long = "indirect-ci", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    indirect_ci: Option<Vec<f64>>,
}

#[derive(Args)]
struct CorrectArgs {
    /// Confounding scenario: exposure-mediator, exposure-outcome, or
    /// mediator-outcome
    #[arg(long)]
    scenario: Scenario,
    #[command(flatten)]
    effects: EffectInputs,
    /// Effect of the confounder on the outcome
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    /// Difference in the confounder's mean between the compared exposure
    /// levels (conditional on the mediator in the mediator-outcome scenario)
    #[arg(long, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: Scenario,
    #[command(flatten)]
    effects: EffectInputs,
    /// Gamma range as lo:hi:step (inclusive endpoints)
    #[arg(long = "gamma-range", allow_hyphen_values = true)]
    gamma_range: String,
    /// Shift range as lo:hi:step (inclusive endpoints)
    #[arg(long = "shift-range", allow_hyphen_values = true)]
    shift_range: String,
    /// Print only the verdict summary (JSON) to stdout
    #[arg(long)]
    summary: bool,
    /// Output format; csv prints the grid with verdicts on stderr
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: Scenario,
    /// Which effect to eliminate: total, direct, or indirect
    #[arg(long)]
    effect: String,
    /// The effect's point estimate
    #[arg(long, allow_negative_numbers = true)]
    point: f64,
    /// Shift values at which to factor the required bias, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.1", allow_negative_numbers = true)]
    shifts: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct OracleArgs {
    /// Fully annotated model file
    model: PathBuf,
    /// Fitted equation as a formula, e.g. "Y ~ C + A + M" (repeatable)
    #[arg(long = "fit", required = true)]
    fits: Vec<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Fully annotated model file
    model: PathBuf,
    /// Number of rows to generate
    #[arg(short = 'n', long = "rows")]
    n: usize,
    /// Generator seed
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Drop these columns after generation (repeatable), e.g. --exclude U
    #[arg(long = "exclude")]
    exclude: Vec<String>,
    /// Fitted specification "label: Y ~ C + A + M; M ~ C + A" (repeatable;
    /// default is the model's measured topology)
    #[arg(long = "fit")]
    fits: Vec<String>,
    /// Replicate the experiment this many times and summarize
    #[arg(long)]
    replications: Option<usize>,
    /// Master seed for replication streams
    #[arg(long = "master-seed", default_value = "1")]
    master_seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct FitArgs {
    /// Observed-variable model file (topology is what gets fitted)
    model: PathBuf,
    /// CSV data file with a header of variable names
    #[arg(long)]
    data: PathBuf,
    /// Z-score every column before fitting
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Classify(args) => cmd_classify(args),
        Command::Table1(args) => cmd_table1(args),
        Command::Correct(args) => cmd_correct(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
    }
}

fn format_of(arg: FormatArg, csv_allowed: bool) -> Result<Format, CliError> {
    match arg {
        FormatArg::Text => Ok(Format::Text),
        FormatArg::Json => Ok(Format::Json),
        FormatArg::Csv if csv_allowed => Ok(Format::Csv),
        FormatArg::Csv => Err(CliError::usage("csv output is not defined for this command")),
    }
}

fn load_document(path: &PathBuf) -> Result<dsl::ModelDocument, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::domain(format!("cannot read {}: {e}", path.display())))?;
    dsl::parse_bytes(&bytes)
        .map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn load_model_with_roles(path: &PathBuf) -> Result<(PathModel, RoleAssignment), CliError> {
    let doc = load_document(path)?;
    let roles = doc.roles.ok_or_else(|| {
        CliError::domain(format!("{}: model file declares no roles", path.display()))
    })?;
    Ok((doc.model, roles))
}

// --- classify ----------------------------------------------------------------

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let format = format_of(args.format, false)?;
    let (model, roles) = load_model_with_roles(&args.model)?;
    let mediator = roles
        .mediator
        .clone()
        .ok_or_else(|| CliError::domain("classification needs a mediator role"))?;

    let base = classify_bias(&model, &roles, &[])?;

    let mut missing: Vec<(String, String)> = Vec::new();
    for spec in &args.missing_edge {
        missing.push(parse_edge_spec(spec)?);
    }
    if args.all_missing {
        for (f, t) in [
            (roles.exposure.clone(), roles.outcome.clone()),
            (roles.exposure.clone(), mediator.clone()),
            (mediator.clone(), roles.outcome.clone()),
        ] {
            if !missing.contains(&(f.clone(), t.clone())) {
                missing.push((f, t));
            }
        }
    }
    let mut reruns: Vec<(String, BiasReport)> = Vec::new();
    for (f, t) in &missing {
        let report = classify_bias(&model, &roles, &[(f.as_str(), t.as_str())])?;
        reruns.push((format!("{f}->{t}"), report));
    }

    let edge_list = if args.edges {
        Some(biased_edges(&model, &roles)?)
    } else {
        None
    };

    output::render_classify(format, &base, &reruns, edge_list.as_deref());
    Ok(())
}

// --- table1 ------------------------------------------------------------------

fn cmd_table1(args: Table1Args) -> Result<(), CliError> {
    let format = format_of(args.format, false)?;
    let grid = table1_grid();
    if args.check && grid != Table1Grid::expected() {
        return Err(CliError::domain(
            "derived placement grid disagrees with the expected pattern",
        ));
    }
    output::render_table1(format, &grid);
    Ok(())
}

// --- correct and sweep --------------------------------------------------------

struct SuppliedEffects {
    total: Option<EffectEstimate>,
    direct: Option<EffectEstimate>,
    indirect: Option<EffectEstimate>,
}

impl SuppliedEffects {
    fn count(&self) -> usize {
        [self.total.is_some(), self.direct.is_some(), self.indirect.is_some()]
            .iter()
            .filter(|b| **b)
            .count()
    }
}

fn gather_effects(inputs: &EffectInputs) -> Result<SuppliedEffects, CliError> {
    let build = |kind: EffectKind,
                 point: Option<f64>,
                 ci: &Option<Vec<f64>>|
     -> Result<Option<EffectEstimate>, CliError> {
        let Some(point) = point else {
            if ci.is_some() {
                return Err(CliError::usage(format!(
                    "--{kind}-ci given without --{kind}"
                )));
            }
            return Ok(None);
        };
        let estimate = match ci {
            Some(limits) => EffectEstimate::with_ci(kind, point, limits[0], limits[1])
                .map_err(|e| CliError::domain(e.to_string()))?,
            None => EffectEstimate::exact(kind, point),
        };
        Ok(Some(estimate))
    };
    Ok(SuppliedEffects {
        total: build(EffectKind::Total, inputs.total, &inputs.total_ci)?,
        direct: build(EffectKind::Direct, inputs.direct, &inputs.direct_ci)?,
        indirect: build(EffectKind::Indirect, inputs.indirect, &inputs.indirect_ci)?,
    })
}

/// Completes a triple from two supplied members by additivity, with
/// interval-arithmetic limits for the inferred one.
fn complete_triple(supplied: &SuppliedEffects) -> Result<EffectTriple, CliError> {
    let infer_sum = |kind: EffectKind, a: &EffectEstimate, b: &EffectEstimate| {
        EffectEstimate::with_ci(kind, a.point + b.point, a.ci_low + b.ci_low, a.ci_high + b.ci_high)
    };
    let infer_diff = |kind: EffectKind, whole: &EffectEstimate, part: &EffectEstimate| {
        EffectEstimate::with_ci(
            kind,
            whole.point - part.point,
            whole.ci_low - part.ci_high,
            whole.ci_high - part.ci_low,
        )
    };
    let (total, direct, indirect) = match (&supplied.total, &supplied.direct, &supplied.indirect) {
        (Some(t), Some(d), Some(i)) => (t.clone(), d.clone(), i.clone()),
        (None, Some(d), Some(i)) => (
            infer_sum(EffectKind::Total, d, i).map_err(|e| CliError::domain(e.to_string()))?,
            d.clone(),
            i.clone(),
        ),
        (Some(t), None, Some(i)) => (
            t.clone(),
            infer_diff(EffectKind::Direct, t, i).map_err(|e| CliError::domain(e.to_string()))?,
            i.clone(),
        ),
        (Some(t), Some(d), None) => (
            t.clone(),
            d.clone(),
            infer_diff(EffectKind::Indirect, t, d).map_err(|e| CliError::domain(e.to_string()))?,
        ),
        _ => {
            return Err(CliError::usage(
                "supply at least two of --total/--direct/--indirect (or one to correct it alone)",
            ))
        }
    };
    EffectTriple::new(total, direct, indirect).map_err(|e| CliError::domain(e.to_string()))
}

fn warn_if_untouched(scenario: Scenario, supplied: &SuppliedEffects) {
    let supplied_kinds: Vec<EffectKind> = [
        supplied.total.as_ref().map(|e| e.kind),
        supplied.direct.as_ref().map(|e| e.kind),
        supplied.indirect.as_ref().map(|e| e.kind),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !supplied_kinds.is_empty() && supplied_kinds.iter().all(|k| !scenario.biases(*k)) {
        let names: Vec<String> = supplied_kinds.iter().map(|k| k.to_string()).collect();
        eprintln!(
            "warning: {} unbiased under {scenario} confounding; passed through unchanged",
            names.join(", ")
        );
    }
}

fn cmd_correct(args: CorrectArgs) -> Result<(), CliError> {
    let format = format_of(args.format, false)?;
    let supplied = gather_effects(&args.effects)?;
    let params = SensitivityParams::new(args.gamma, args.shift);
    let factor = bias_factor(params)?;
    warn_if_untouched(args.scenario, &supplied);

    if supplied.count() == 1 {
        // single-effect correction
        let original = supplied
            .total
            .clone()
            .or(supplied.direct.clone())
            .or(supplied.indirect.clone())
            .unwrap();
        let corrected = if args.scenario.biases(original.kind) {
            let delta = if args.scenario == Scenario::MediatorOutcome
                && original.kind == EffectKind::Indirect
            {
                factor.value
            } else {
                -factor.value
            };
            original.shifted(delta)
        } else {
            original.clone()
        };
        output::render_correct_single(format, args.scenario, factor.value, &original, &corrected);
        return Ok(());
    }

    let triple = complete_triple(&supplied)?;
    let corrected = correct(&triple, args.scenario, params)?;
    output::render_correct(format, args.scenario, factor.value, &triple, &corrected);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let format = format_of(args.format, true)?;
    let supplied = gather_effects(&args.effects)?;
    let triple = complete_triple(&supplied)?;
    let gamma_range: RangeSpec = parse_range(&args.gamma_range)?;
    let shift_range: RangeSpec = parse_range(&args.shift_range)?;
    for range in [&gamma_range, &shift_range] {
        range
            .values()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let grid = sweep(&triple, args.scenario, &gamma_range, &shift_range)?;
    output::render_sweep(format, &grid, args.summary);
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let format = format_of(args.format, false)?;
    let kind: EffectKind = args
        .effect
        .parse()
        .map_err(|e: String| CliError::usage(e))?;
    let estimate = EffectEstimate::exact(kind, args.point);
    let solved = explain_away(&estimate, args.scenario, &args.shifts)?;
    output::render_solve(format, &solved);
    Ok(())
}

// --- oracle ------------------------------------------------------------------

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let format = format_of(args.format, true)?;
    let doc = load_document(&args.model)?;
    let mut fitted_spec = Vec::new();
    for formula in &args.fits {
        let (target, regressors) = parse_formula(formula)?;
        fitted_spec.push((target, regressors));
    }
    let rows = pathsens_core::covariance::asymptotic_edge_bias(&doc.model, &fitted_spec)?;
    output::render_oracle(format, &rows);
    Ok(())
}

// --- simulate ----------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let format = format_of(args.format, true)?;
    let doc = load_document(&args.model)?;
    let mut fitted_specs = Vec::new();
    for spec_text in &args.fits {
        fitted_specs.push(parse_fit_spec(spec_text)?);
    }
    if fitted_specs.is_empty() {
        fitted_specs.push(FittedSpec::from_measured_topology("model", &doc.model));
    }
    let config = SimulationConfig {
        model: doc.model,
        n: args.n,
        seed: args.seed,
        fitted_specs,
        exclude_from_data: args.exclude.iter().cloned().collect::<BTreeSet<String>>(),
    };
    match args.replications {
        None => {
            let report = run_experiment(&config)?;
            output::render_experiment(format, &report);
        }
        Some(replications) => {
            let summary = replicate(&config, replications, args.master_seed)?;
            output::render_replications(format, &summary);
        }
    }
    Ok(())
}

// --- fit ----------------------------------------------------------------------

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let format = format_of(args.format, false)?;
    let doc = load_document(&args.model)?;
    let mut data = Dataset::from_csv_path(&args.data)
        .map_err(|e| CliError::domain(format!("{}: {e}", args.data.display())))?;
    if args.standardize {
        data = data.standardize()?;
    }
    let fit = fit_sem(&doc.model, &data)?;
    let effects = match &doc.roles {
        Some(roles) if roles.mediator.is_some() => {
            Some(effect_triple_from_fit(&fit, roles)?)
        }
        _ => None,
    };
    output::render_fit(format, &fit, effects.as_ref());
    Ok(())
}
