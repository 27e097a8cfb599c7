//! Rendering of command results as text tables, JSON documents, or CSV.
//!
//! JSON field names are part of the command-line contract and stay stable;
//! every document is emitted with a single trailing newline.

use serde::Serialize;

use pathsens_core::covariance::EdgeBias;
use pathsens_core::effects::{EffectEstimate, EffectTriple};
use pathsens_core::graph::{BiasReport, BiasedEdge, Table1Grid, Verdict, POSITION_ORDER};
use pathsens_core::scenarios::Scenario;
use pathsens_core::sensitivity::{ExplainAway, SweepGrid, VerdictFlags};
use pathsens_core::simulation::{ExperimentReport, ReplicationSummary};

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

fn emit_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report types serialize")
    );
}

// --- classify ----------------------------------------------------------------

#[derive(Serialize)]
struct VerdictDoc {
    verdict: &'static str,
    witness: Option<String>,
}

impl VerdictDoc {
    fn from(verdict: &Verdict) -> Self {
        VerdictDoc {
            verdict: if verdict.is_biased() { "biased" } else { "unbiased" },
            witness: verdict.witness().map(|w| w.render()),
        }
    }
}

#[derive(Serialize)]
struct ReportDoc {
    total: VerdictDoc,
    direct: VerdictDoc,
    indirect: VerdictDoc,
}

impl ReportDoc {
    fn from(report: &BiasReport) -> Self {
        ReportDoc {
            total: VerdictDoc::from(&report.total),
            direct: VerdictDoc::from(&report.direct),
            indirect: VerdictDoc::from(&report.indirect),
        }
    }
}

#[derive(Serialize)]
struct ClassifyDoc {
    #[serde(flatten)]
    report: ReportDoc,
    missing_edge_reports: Vec<MissingEdgeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    biased_edges: Option<Vec<BiasedEdgeDoc>>,
}

#[derive(Serialize)]
struct MissingEdgeDoc {
    missing: String,
    #[serde(flatten)]
    report: ReportDoc,
}

#[derive(Serialize)]
struct BiasedEdgeDoc {
    edge: String,
    witness: String,
}

fn verdict_line(name: &str, verdict: &Verdict) -> String {
    match verdict.witness() {
        Some(w) => format!("{name:<9} biased      open path: {}", w.render()),
        None => format!("{name:<9} unbiased"),
    }
}

pub fn render_classify(
    format: Format,
    base: &BiasReport,
    reruns: &[(String, BiasReport)],
    edges: Option<&[BiasedEdge]>,
) {
    match format {
        Format::Json => {
            let doc = ClassifyDoc {
                report: ReportDoc::from(base),
                missing_edge_reports: reruns
                    .iter()
                    .map(|(missing, report)| MissingEdgeDoc {
                        missing: missing.clone(),
                        report: ReportDoc::from(report),
                    })
                    .collect(),
                biased_edges: edges.map(|list| {
                    list.iter()
                        .map(|b| BiasedEdgeDoc {
                            edge: format!("{}->{}", b.edge.from, b.edge.to),
                            witness: b.witness.render(),
                        })
                        .collect()
                }),
            };
            emit_json(&doc);
        }
        _ => {
            println!("{}", verdict_line("total", &base.total));
            println!("{}", verdict_line("direct", &base.direct));
            println!("{}", verdict_line("indirect", &base.indirect));
            for (missing, report) in reruns {
                println!();
                println!("with {missing} absent from the true model:");
                println!("  {}", verdict_line("total", &report.total));
                println!("  {}", verdict_line("direct", &report.direct));
                println!("  {}", verdict_line("indirect", &report.indirect));
            }
            if let Some(list) = edges {
                println!();
                if list.is_empty() {
                    println!("biased fitted edges: none");
                } else {
                    println!("biased fitted edges:");
                    for b in list {
                        println!(
                            "  {} -> {:<4} open path: {}",
                            b.edge.from,
                            b.edge.to,
                            b.witness.render()
                        );
                    }
                }
            }
        }
    }
}

// --- table1 ------------------------------------------------------------------

#[derive(Serialize)]
struct GridCellDoc {
    left: String,
    right: String,
    total: &'static str,
    direct: &'static str,
    indirect: &'static str,
}

#[derive(Serialize)]
struct GridDoc {
    positions: Vec<String>,
    cells: Vec<GridCellDoc>,
}

pub fn render_table1(format: Format, grid: &Table1Grid) {
    let label = |biased: bool| if biased { "biased" } else { "unbiased" };
    match format {
        Format::Json => {
            let mut cells = Vec::new();
            for left in POSITION_ORDER {
                for right in POSITION_ORDER {
                    if let Some(cell) = grid.cell(left, right) {
                        cells.push(GridCellDoc {
                            left: left.to_string(),
                            right: right.to_string(),
                            total: label(cell.total_biased),
                            direct: label(cell.direct_biased),
                            indirect: label(cell.indirect_biased),
                        });
                    }
                }
            }
            emit_json(&GridDoc {
                positions: POSITION_ORDER.iter().map(|p| p.to_string()).collect(),
                cells,
            });
        }
        _ => {
            let describe = |cell: pathsens_core::graph::CellVerdicts| {
                let mut parts = Vec::new();
                if cell.total_biased {
                    parts.push("total");
                }
                if cell.direct_biased {
                    parts.push("direct");
                }
                if cell.indirect_biased {
                    parts.push("indirect");
                }
                if parts.is_empty() {
                    "not biased".to_string()
                } else {
                    format!("{} biased", parts.join(" + "))
                }
            };
            println!("confounder placement (left arrow x right arrow):");
            for left in POSITION_ORDER {
                for right in POSITION_ORDER {
                    let body = match grid.cell(left, right) {
                        None => continue,
                        Some(cell) => describe(cell),
                    };
                    println!("  {left:>13} x {right:<13} {body}");
                }
            }
        }
    }
}

// --- correct -----------------------------------------------------------------

#[derive(Serialize)]
struct EstimateDoc {
    point: f64,
    ci_low: f64,
    ci_high: f64,
}

impl EstimateDoc {
    fn from(e: &EffectEstimate) -> Self {
        EstimateDoc {
            point: e.point,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
        }
    }
}

#[derive(Serialize)]
struct TripleDoc {
    total: EstimateDoc,
    direct: EstimateDoc,
    indirect: EstimateDoc,
}

impl TripleDoc {
    fn from(t: &EffectTriple) -> Self {
        TripleDoc {
            total: EstimateDoc::from(&t.total),
            direct: EstimateDoc::from(&t.direct),
            indirect: EstimateDoc::from(&t.indirect),
        }
    }
}

#[derive(Serialize)]
struct CorrectDoc {
    scenario: Scenario,
    bias_factor: f64,
    original: TripleDoc,
    corrected: TripleDoc,
}

fn estimate_line(name: &str, e: &EffectEstimate) -> String {
    format!(
        "{name:<9} {:>12.6}  ({:.6}, {:.6})",
        e.point, e.ci_low, e.ci_high
    )
}

pub fn render_correct(
    format: Format,
    scenario: Scenario,
    bias: f64,
    original: &EffectTriple,
    corrected: &EffectTriple,
) {
    match format {
        Format::Json => emit_json(&CorrectDoc {
            scenario,
            bias_factor: bias,
            original: TripleDoc::from(original),
            corrected: TripleDoc::from(corrected),
        }),
        _ => {
            println!("scenario:    {scenario}");
            println!("bias factor: {bias}");
            println!("corrected:");
            println!("  {}", estimate_line("total", &corrected.total));
            println!("  {}", estimate_line("direct", &corrected.direct));
            println!("  {}", estimate_line("indirect", &corrected.indirect));
        }
    }
}

#[derive(Serialize)]
struct CorrectSingleDoc {
    scenario: Scenario,
    bias_factor: f64,
    effect: String,
    original: EstimateDoc,
    corrected: EstimateDoc,
}

pub fn render_correct_single(
    format: Format,
    scenario: Scenario,
    bias: f64,
    original: &EffectEstimate,
    corrected: &EffectEstimate,
) {
    match format {
        Format::Json => emit_json(&CorrectSingleDoc {
            scenario,
            bias_factor: bias,
            effect: original.kind.to_string(),
            original: EstimateDoc::from(original),
            corrected: EstimateDoc::from(corrected),
        }),
        _ => {
            println!("scenario:    {scenario}");
            println!("bias factor: {bias}");
            println!("corrected:");
            println!("  {}", estimate_line(&original.kind.to_string(), corrected));
        }
    }
}

// --- sweep -------------------------------------------------------------------

#[derive(Serialize)]
struct SweepVerdictsDoc {
    total: VerdictFlags,
    direct: VerdictFlags,
    indirect: VerdictFlags,
}

#[derive(Serialize)]
struct SweepCellDoc {
    gamma: f64,
    shift: f64,
    bias: f64,
    total: EstimateDoc,
    direct: EstimateDoc,
    indirect: EstimateDoc,
}

#[derive(Serialize)]
struct SweepDoc {
    scenario: Scenario,
    cells: Vec<SweepCellDoc>,
    verdicts: SweepVerdictsDoc,
}

pub const SWEEP_CSV_HEADER: &str = "gamma,shift,bias,total,total_low,total_high,\
direct,direct_low,direct_high,indirect,indirect_low,indirect_high";

fn sweep_csv_row(cell: &pathsens_core::sensitivity::SweepCell) -> String {
    let t = &cell.corrected.total;
    let d = &cell.corrected.direct;
    let i = &cell.corrected.indirect;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        cell.gamma,
        cell.shift,
        cell.bias,
        t.point,
        t.ci_low,
        t.ci_high,
        d.point,
        d.ci_low,
        d.ci_high,
        i.point,
        i.ci_low,
        i.ci_high
    )
}

pub fn render_sweep(format: Format, grid: &SweepGrid, summary_only: bool) {
    let verdicts = SweepVerdictsDoc {
        total: grid.total,
        direct: grid.direct,
        indirect: grid.indirect,
    };
    if summary_only {
        emit_json(&verdicts);
        return;
    }
    match format {
        Format::Json => {
            let cells = grid
                .cells
                .iter()
                .map(|c| SweepCellDoc {
                    gamma: c.gamma,
                    shift: c.shift,
                    bias: c.bias,
                    total: EstimateDoc::from(&c.corrected.total),
                    direct: EstimateDoc::from(&c.corrected.direct),
                    indirect: EstimateDoc::from(&c.corrected.indirect),
                })
                .collect();
            emit_json(&SweepDoc {
                scenario: grid.scenario,
                cells,
                verdicts,
            });
        }
        Format::Csv => {
            println!("{SWEEP_CSV_HEADER}");
            for cell in &grid.cells {
                println!("{}", sweep_csv_row(cell));
            }
            // verdicts on stderr so the stdout stream stays plot-ready
            eprintln!(
                "{}",
                serde_json::to_string(&verdicts).expect("verdicts serialize")
            );
        }
        Format::Text => {
            println!("scenario: {}", grid.scenario);
            println!(
                "{:>8} {:>8} {:>9} {:>11} {:>11} {:>11}",
                "gamma", "shift", "bias", "total", "direct", "indirect"
            );
            for cell in &grid.cells {
                println!(
                    "{:>8.4} {:>8.4} {:>9.4} {:>11.4} {:>11.4} {:>11.4}",
                    cell.gamma,
                    cell.shift,
                    cell.bias,
                    cell.corrected.total.point,
                    cell.corrected.direct.point,
                    cell.corrected.indirect.point
                );
            }
            println!(
                "verdicts: total {}, direct {}, indirect {}",
                grid.total.primary, grid.direct.primary, grid.indirect.primary
            );
        }
    }
}

// --- solve -------------------------------------------------------------------

pub fn render_solve(format: Format, solved: &ExplainAway) {
    match format {
        Format::Json => emit_json(solved),
        _ => {
            println!("scenario:      {}", solved.scenario);
            println!("effect:        {}", solved.effect);
            println!("required bias: {}", solved.required_bias);
            println!("gamma * shift = {} along:", solved.required_bias);
            for pair in &solved.pairs {
                println!("  shift {:>8}  gamma {:>12.6}", pair.shift, pair.gamma);
            }
        }
    }
}

// --- oracle ------------------------------------------------------------------

#[derive(Serialize)]
struct OracleDoc<'a> {
    rows: &'a [EdgeBias],
}

pub fn render_oracle(format: Format, rows: &[EdgeBias]) {
    match format {
        Format::Json => emit_json(&OracleDoc { rows }),
        Format::Csv => {
            println!("target,regressor,population,truth,bias");
            for row in rows {
                println!(
                    "{},{},{},{},{}",
                    row.to, row.from, row.population, row.truth, row.bias
                );
            }
        }
        Format::Text => {
            println!(
                "{:<8} {:<10} {:>12} {:>8} {:>12}",
                "target", "regressor", "population", "truth", "bias"
            );
            for row in rows {
                println!(
                    "{:<8} {:<10} {:>12.6} {:>8} {:>12.6}",
                    row.to, row.from, row.population, row.truth, row.bias
                );
            }
        }
    }
}

// --- simulate ----------------------------------------------------------------

pub fn render_experiment(format: Format, report: &ExperimentReport) {
    match format {
        Format::Json => emit_json(report),
        Format::Csv => {
            println!("spec,target,from,estimate,std_error,ci_low,ci_high,truth,asymptotic");
            for spec in &report.specs {
                for row in &spec.rows {
                    println!(
                        "{},{},{},{},{},{},{},{},{}",
                        spec.label,
                        row.target,
                        row.from,
                        row.estimate,
                        row.std_error,
                        row.ci_low,
                        row.ci_high,
                        row.truth,
                        row.asymptotic
                    );
                }
            }
        }
        Format::Text => {
            println!("n = {}, seed = {}", report.n, report.seed);
            for spec in &report.specs {
                println!();
                println!("spec: {}", spec.label);
                println!(
                    "  {:<10} {:>10} {:>10} {:>20} {:>7} {:>11}",
                    "edge", "estimate", "se", "95% ci", "truth", "asymptotic"
                );
                for row in &spec.rows {
                    println!(
                        "  {:<10} {:>10.4} {:>10.4} ({:>8.4}, {:>8.4}) {:>7} {:>11.6}",
                        format!("{} -> {}", row.from, row.target),
                        row.estimate,
                        row.std_error,
                        row.ci_low,
                        row.ci_high,
                        row.truth,
                        row.asymptotic
                    );
                }
            }
        }
    }
}

pub fn render_replications(format: Format, summary: &ReplicationSummary) {
    match format {
        Format::Json => emit_json(summary),
        Format::Csv => {
            println!("spec,target,from,truth,asymptotic,mean_estimate,mc_std_error,coverage");
            for row in &summary.rows {
                println!(
                    "{},{},{},{},{},{},{},{}",
                    row.spec,
                    row.target,
                    row.from,
                    row.truth,
                    row.asymptotic,
                    row.mean_estimate,
                    row.mc_std_error,
                    row.coverage
                );
            }
        }
        Format::Text => {
            println!(
                "replications = {}, master seed = {}",
                summary.replications, summary.master_seed
            );
            println!(
                "{:<32} {:<10} {:>12} {:>12} {:>10} {:>9}",
                "spec", "edge", "asymptotic", "mean", "mc se", "coverage"
            );
            for row in &summary.rows {
                println!(
                    "{:<32} {:<10} {:>12.6} {:>12.6} {:>10.6} {:>9.2}",
                    row.spec,
                    format!("{} -> {}", row.from, row.target),
                    row.asymptotic,
                    row.mean_estimate,
                    row.mc_std_error,
                    row.coverage
                );
            }
        }
    }
}

// --- fit ---------------------------------------------------------------------

#[derive(Serialize)]
struct FitDoc<'a> {
    #[serde(flatten)]
    fit: &'a pathsens_core::estimation::FitResult,
    effects: Option<TripleDoc>,
}

pub fn render_fit(
    format: Format,
    fit: &pathsens_core::estimation::FitResult,
    effects: Option<&EffectTriple>,
) {
    match format {
        Format::Json => emit_json(&FitDoc {
            fit,
            effects: effects.map(TripleDoc::from),
        }),
        _ => {
            println!("n = {}", fit.n);
            for eq in &fit.equations {
                println!();
                println!(
                    "{} ~ intercept + {}",
                    eq.target,
                    eq.regressors.join(" + ")
                );
                println!(
                    "  {:<12} {:>10} {:>10} {:>22}",
                    "term", "estimate", "se", "95% ci"
                );
                println!(
                    "  {:<12} {:>10.4} {:>10.4} ({:>9.4}, {:>9.4})",
                    "(intercept)",
                    eq.intercept.estimate,
                    eq.intercept.std_error,
                    eq.intercept.ci_low,
                    eq.intercept.ci_high
                );
                for (name, c) in eq.regressors.iter().zip(&eq.coefficients) {
                    println!(
                        "  {:<12} {:>10.4} {:>10.4} ({:>9.4}, {:>9.4})",
                        name, c.estimate, c.std_error, c.ci_low, c.ci_high
                    );
                }
            }
            if let Some(triple) = effects {
                println!();
                println!("effects:");
                println!("  {}", estimate_line("total", &triple.total));
                println!("  {}", estimate_line("direct", &triple.direct));
                println!("  {}", estimate_line("indirect", &triple.indirect));
            }
        }
    }
}
