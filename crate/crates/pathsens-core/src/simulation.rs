//! Gaussian data generation from annotated models and the
//! correct-versus-misspecified fitting experiment harness.
//!
//! Generation walks the variables in topological order and sets each one to
//! the coefficient-weighted sum of its parents plus a normal draw with the
//! variable's error variance. The generator is ChaCha12 seeded from a
//! 64-bit value, so identical configurations produce byte-identical
//! datasets and reports. Replications derive per-run seeds from the master
//! seed through a SplitMix64 step, keeping parallel streams independent
//! and reproducible.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::covariance::{implied_covariance, population_regression, CovarianceError};
use crate::estimation::{fit_equation, Dataset, EstimationError};
use crate::model::PathModel;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("edge {0} -> {1} has no coefficient")]
    MissingCoefficient(String, String),
    #[error("need at least two rows, got {0}")]
    TooSmall(usize),
    #[error("fitted spec {label}: {problem}")]
    BadSpec { label: String, problem: String },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("need at least two replications, got {0}")]
    TooFewReplications(usize),
}

/// One fitted specification: a labeled set of equations, each target
/// regressed on the listed regressors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedSpec {
    pub label: String,
    pub equations: Vec<(String, Vec<String>)>,
}

impl FittedSpec {
    pub fn new(label: impl Into<String>, equations: Vec<(String, Vec<String>)>) -> Self {
        FittedSpec {
            label: label.into(),
            equations,
        }
    }

    /// The measured topology of a model: every measured variable with at
    /// least one measured parent, regressed on those parents.
    pub fn from_measured_topology(label: impl Into<String>, model: &PathModel) -> Self {
        let equations = model
            .variables()
            .iter()
            .filter(|v| v.measured)
            .filter_map(|v| {
                let parents: Vec<String> = model
                    .parents_of(&v.name)
                    .into_iter()
                    .filter(|p| model.is_measured(p))
                    .map(str::to_string)
                    .collect();
                (!parents.is_empty()).then(|| (v.name.clone(), parents))
            })
            .collect();
        FittedSpec {
            label: label.into(),
            equations,
        }
    }
}

/// Everything needed to run one simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub model: PathModel,
    pub n: usize,
    pub seed: u64,
    pub fitted_specs: Vec<FittedSpec>,
    /// Columns dropped after generation, e.g. the unmeasured confounder.
    pub exclude_from_data: BTreeSet<String>,
}

fn validate_model(model: &PathModel) -> Result<Vec<String>, SimulationError> {
    let violations = model.validate();
    if let Some(v) = violations.first() {
        return Err(SimulationError::InvalidModel(v.to_string()));
    }
    for edge in model.edges() {
        if edge.coefficient.is_none() {
            return Err(SimulationError::MissingCoefficient(
                edge.from.clone(),
                edge.to.clone(),
            ));
        }
    }
    model
        .topological_order()
        .map_err(|e| SimulationError::InvalidModel(e.to_string()))
}

/// Draws `n` joint observations of every model variable. Columns come back
/// in declaration order; draws are consumed in topological order so that
/// dropping a column afterwards never changes the other columns.
pub fn generate(model: &PathModel, n: usize, seed: u64) -> Result<Dataset, SimulationError> {
    if n < 2 {
        return Err(SimulationError::TooSmall(n));
    }
    let order = validate_model(model)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values: HashMap<String, Vec<f64>> = HashMap::new();
    for name in &order {
        let sd = model.error_variance(name).sqrt();
        let parents: Vec<(f64, &Vec<f64>)> = model
            .parents_of(name)
            .into_iter()
            .map(|p| (model.coefficient(p, name).unwrap(), &values[p]))
            .collect();
        let mut column = Vec::with_capacity(n);
        for row in 0..n {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let mut value = sd * noise;
            for (coefficient, parent_column) in &parents {
                value += coefficient * parent_column[row];
            }
            column.push(value);
        }
        values.insert(name.clone(), column);
    }
    let names: Vec<String> = model.variables().iter().map(|v| v.name.clone()).collect();
    let columns = names.iter().map(|name| values.remove(name).unwrap()).collect();
    Ok(Dataset::new(names, columns)?)
}

/// One coefficient row of an experiment report: the sample estimate next
/// to the true structural coefficient and its asymptotic (population)
/// value under the fitted specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub target: String,
    pub from: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub truth: f64,
    pub asymptotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecReport {
    pub label: String,
    pub rows: Vec<CoefficientReport>,
}

impl SpecReport {
    pub fn row(&self, from: &str, target: &str) -> Option<&CoefficientReport> {
        self.rows.iter().find(|r| r.from == from && r.target == target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub seed: u64,
    pub specs: Vec<SpecReport>,
}

impl ExperimentReport {
    pub fn spec(&self, label: &str) -> Option<&SpecReport> {
        self.specs.iter().find(|s| s.label == label)
    }
}

fn check_spec(config: &SimulationConfig, spec: &FittedSpec) -> Result<(), SimulationError> {
    for (target, regressors) in &spec.equations {
        for name in std::iter::once(target).chain(regressors) {
            if !config.model.contains(name) {
                return Err(SimulationError::BadSpec {
                    label: spec.label.clone(),
                    problem: format!("unknown variable {name}"),
                });
            }
            // a retained column is fitable even when the model marks it
            // unmeasured, so a correctly specified benchmark can include it
            if config.exclude_from_data.contains(name) {
                return Err(SimulationError::BadSpec {
                    label: spec.label.clone(),
                    problem: format!("{name} is excluded from the data"),
                });
            }
        }
    }
    Ok(())
}

/// Generates one dataset, drops the excluded columns, fits every spec, and
/// attaches true and asymptotic coefficient values.
pub fn run_experiment(config: &SimulationConfig) -> Result<ExperimentReport, SimulationError> {
    for spec in &config.fitted_specs {
        check_spec(config, spec)?;
    }
    let full = generate(&config.model, config.n, config.seed)?;
    let dropped: Vec<&str> = config.exclude_from_data.iter().map(String::as_str).collect();
    let data = if dropped.is_empty() {
        full
    } else {
        full.drop_columns(&dropped)?
    };
    let sigma = implied_covariance(&config.model)?;

    let mut specs = Vec::with_capacity(config.fitted_specs.len());
    for spec in &config.fitted_specs {
        let mut rows = Vec::new();
        for (target, regressors) in &spec.equations {
            let regressor_names: Vec<&str> = regressors.iter().map(String::as_str).collect();
            let fit = fit_equation(&data, target, &regressor_names)?;
            let asymptotic = population_regression(&sigma, target, &regressor_names)?;
            for (j, from) in regressors.iter().enumerate() {
                let c = fit.coefficient(from).unwrap();
                rows.push(CoefficientReport {
                    target: target.clone(),
                    from: from.clone(),
                    estimate: c.estimate,
                    std_error: c.std_error,
                    ci_low: c.ci_low,
                    ci_high: c.ci_high,
                    truth: config.model.coefficient(from, target).unwrap_or(0.0),
                    asymptotic: asymptotic[j],
                });
            }
        }
        specs.push(SpecReport {
            label: spec.label.clone(),
            rows,
        });
    }
    Ok(ExperimentReport {
        n: config.n,
        seed: config.seed,
        specs,
    })
}

/// SplitMix64 step: the per-replication seed stream.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master_seed`.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Monte Carlo summary of one coefficient across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub spec: String,
    pub target: String,
    pub from: String,
    pub truth: f64,
    pub asymptotic: f64,
    pub mean_estimate: f64,
    /// Standard error of the mean estimate across replications.
    pub mc_std_error: f64,
    /// Share of per-replication 95% intervals containing the asymptotic value.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub replications: usize,
    pub master_seed: u64,
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationSummary {
    pub fn row(&self, spec: &str, from: &str, target: &str) -> Option<&ReplicationRow> {
        self.rows
            .iter()
            .find(|r| r.spec == spec && r.from == from && r.target == target)
    }
}

/// Repeats the experiment with derived seeds and summarizes each
/// coefficient: mean estimate, Monte Carlo standard error of the mean,
/// and coverage of the asymptotic value by the per-replication intervals.
pub fn replicate(
    config: &SimulationConfig,
    replications: usize,
    master_seed: u64,
) -> Result<ReplicationSummary, SimulationError> {
    if replications < 2 {
        return Err(SimulationError::TooFewReplications(replications));
    }
    let mut reports = Vec::with_capacity(replications);
    for index in 0..replications {
        let mut run = config.clone();
        run.seed = replication_seed(master_seed, index as u64);
        reports.push(run_experiment(&run)?);
    }

    let template = &reports[0];
    let mut rows = Vec::new();
    for (spec_index, spec) in template.specs.iter().enumerate() {
        for (row_index, row) in spec.rows.iter().enumerate() {
            let estimates: Vec<f64> = reports
                .iter()
                .map(|r| r.specs[spec_index].rows[row_index].estimate)
                .collect();
            let r = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / r;
            let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0);
            let covered = reports
                .iter()
                .filter(|rep| {
                    let c = &rep.specs[spec_index].rows[row_index];
                    c.ci_low <= row.asymptotic && row.asymptotic <= c.ci_high
                })
                .count();
            rows.push(ReplicationRow {
                spec: spec.label.clone(),
                target: row.target.clone(),
                from: row.from.clone(),
                truth: row.truth,
                asymptotic: row.asymptotic,
                mean_estimate: mean,
                mc_std_error: (var / r).sqrt(),
                coverage: covered as f64 / r,
            });
        }
    }
    Ok(ReplicationSummary {
        replications,
        master_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, Variable};
    use crate::scenarios::{confounding_scenario, scenario_simulation_config, Scenario};

    #[test]
    fn generation_is_deterministic() {
        let (model, _) = confounding_scenario(Scenario::MediatorOutcome);
        let a = generate(&model, 16, 99).unwrap();
        let b = generate(&model, 16, 99).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = generate(&model, 16, 100).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }

    #[test]
    fn null_model_columns_are_nearly_uncorrelated() {
        let mut model = PathModel::new();
        for v in ["X", "Y", "Z"] {
            model.add_variable(Variable::observed(v)).unwrap();
        }
        for (f, t) in [("X", "Y"), ("Y", "Z")] {
            model.add_edge(Edge::new(f, t, 0.0)).unwrap();
        }
        let n = 4000;
        let data = generate(&model, n, 7).unwrap();
        let bound = 5.0 / (n as f64).sqrt();
        for (a, b) in [("X", "Y"), ("X", "Z"), ("Y", "Z")] {
            let xa = data.column(a).unwrap();
            let xb = data.column(b).unwrap();
            let mean_a = xa.iter().sum::<f64>() / n as f64;
            let mean_b = xb.iter().sum::<f64>() / n as f64;
            let mut cov = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for i in 0..n {
                cov += (xa[i] - mean_a) * (xb[i] - mean_b);
                va += (xa[i] - mean_a).powi(2);
                vb += (xb[i] - mean_b).powi(2);
            }
            let corr = cov / (va * vb).sqrt();
            assert!(corr.abs() < bound, "corr({a},{b}) = {corr}");
        }
    }

    #[test]
    fn exclusion_is_post_hoc_column_dropping() {
        let (model, _) = confounding_scenario(Scenario::MediatorOutcome);
        let full = generate(&model, 32, 5).unwrap();
        let dropped = full.drop_columns(&["U"]).unwrap();
        assert_eq!(dropped.names().len(), 4);
        for name in ["C", "A", "M", "Y"] {
            assert_eq!(full.column(name).unwrap(), dropped.column(name).unwrap());
        }
    }

    #[test]
    fn sample_variance_tracks_the_implied_value() {
        let (model, _) = confounding_scenario(Scenario::MediatorOutcome);
        let n = 20_000;
        let data = generate(&model, n, 11).unwrap();
        let a = data.column("A").unwrap();
        let mean = a.iter().sum::<f64>() / n as f64;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // Var(A) = 1.36; SE of a variance estimate is about var * sqrt(2/n)
        let se = 1.36 * (2.0 / n as f64).sqrt();
        assert!((var - 1.36).abs() < 5.0 * se, "sample Var(A) = {var}");
    }

    #[test]
    fn correctly_specified_fit_recovers_truth() {
        let (model, _) = confounding_scenario(Scenario::MediatorOutcome);
        let config = SimulationConfig {
            model: model.clone(),
            n: 20_000,
            seed: 3,
            fitted_specs: vec![FittedSpec::new(
                "true-model",
                vec![
                    ("M".into(), vec!["C".into(), "A".into(), "U".into()]),
                    ("Y".into(), vec!["A".into(), "M".into(), "U".into()]),
                ],
            )],
            exclude_from_data: BTreeSet::new(),
        };
        let report = run_experiment(&config).unwrap();
        for row in &report.specs[0].rows {
            let gap = (row.estimate - row.truth).abs();
            assert!(
                gap < 5.0 * row.std_error,
                "{} -> {}: estimate {} vs truth {}",
                row.from,
                row.target,
                row.estimate,
                row.truth
            );
        }
    }

    #[test]
    fn specs_referencing_excluded_columns_are_rejected() {
        let (model, _) = confounding_scenario(Scenario::MediatorOutcome);
        let mut config = scenario_simulation_config(Scenario::MediatorOutcome, 100, 1);
        config.model = model;
        config.fitted_specs = vec![FittedSpec::new(
            "bad",
            vec![("Y".into(), vec!["U".into()])],
        )];
        assert!(matches!(
            run_experiment(&config),
            Err(SimulationError::BadSpec { .. })
        ));
    }

    #[test]
    fn replication_summaries_are_deterministic() {
        let config = scenario_simulation_config(Scenario::MediatorOutcome, 400, 1);
        let a = replicate(&config, 3, 17).unwrap();
        let b = replicate(&config, 3, 17).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            replicate(&config, 1, 17),
            Err(SimulationError::TooFewReplications(1))
        ));
    }

    #[test]
    fn replication_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..100).map(|i| replication_seed(42, i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
