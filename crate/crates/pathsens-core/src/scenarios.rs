//! Canonical five-variable confounding scenarios used by the experiment
//! harness and the test suites.
//!
//! Each scenario has a measured covariate C feeding the exposure and the
//! mediator, the three effect paths A -> M -> Y plus A -> Y, and an
//! unmeasured confounder U whose two arrows select the scenario. All
//! structural effects are a moderate 0.6; the covariate-outcome path is
//! present in the fitted specification but its true effect is zero.

use std::collections::BTreeSet;

use crate::model::{Edge, PathModel, RoleAssignment, Variable};
use crate::simulation::{FittedSpec, SimulationConfig};

pub use crate::sensitivity::Scenario;

/// Strength of every nonzero structural effect in the scenario models.
pub const SCENARIO_EFFECT: f64 = 0.6;

/// Builds the scenario model and its role assignment.
pub fn confounding_scenario(scenario: Scenario) -> (PathModel, RoleAssignment) {
    let mut model = PathModel::new();
    for name in ["C", "U", "A", "M", "Y"] {
        let v = if name == "U" {
            Variable::unmeasured(name)
        } else {
            Variable::observed(name)
        };
        model.add_variable(v).unwrap();
    }
    for (from, to) in [
        ("C", "A"),
        ("C", "M"),
        ("A", "M"),
        ("A", "Y"),
        ("M", "Y"),
    ] {
        model.add_edge(Edge::new(from, to, SCENARIO_EFFECT)).unwrap();
    }
    model.add_edge(Edge::new("C", "Y", 0.0)).unwrap();
    let confounded = match scenario {
        Scenario::ExposureMediator => [("U", "A"), ("U", "M")],
        Scenario::ExposureOutcome => [("U", "A"), ("U", "Y")],
        Scenario::MediatorOutcome => [("U", "M"), ("U", "Y")],
    };
    for (from, to) in confounded {
        model.add_edge(Edge::new(from, to, SCENARIO_EFFECT)).unwrap();
    }
    let roles = RoleAssignment::new("A", Some("M"), "Y")
        .with_covariates(["C"])
        .with_unmeasured(["U"]);
    (model, roles)
}

/// Labels of the two fitted specifications in the scenario experiment.
pub const SPEC_WITH_COVARIATE_OUTCOME: &str = "covariate-outcome-in-model";
pub const SPEC_WITHOUT_COVARIATE_OUTCOME: &str = "covariate-outcome-not-in-model";

/// The scenario simulation: generate with the confounder, drop its column,
/// then fit once with the covariate-outcome path in the outcome equation
/// and once without it.
pub fn scenario_simulation_config(scenario: Scenario, n: usize, seed: u64) -> SimulationConfig {
    let (model, _) = confounding_scenario(scenario);
    let with = FittedSpec::new(
        SPEC_WITH_COVARIATE_OUTCOME,
        vec![
            ("A".into(), vec!["C".into()]),
            ("M".into(), vec!["C".into(), "A".into()]),
            ("Y".into(), vec!["C".into(), "A".into(), "M".into()]),
        ],
    );
    let without = FittedSpec::new(
        SPEC_WITHOUT_COVARIATE_OUTCOME,
        vec![
            ("A".into(), vec!["C".into()]),
            ("M".into(), vec!["C".into(), "A".into()]),
            ("Y".into(), vec!["A".into(), "M".into()]),
        ],
    );
    SimulationConfig {
        model,
        n,
        seed,
        fitted_specs: vec![with, without],
        exclude_from_data: BTreeSet::from(["U".to_string()]),
    }
}
