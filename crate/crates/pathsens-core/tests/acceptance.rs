//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test -p pathsens-core --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::collections::BTreeSet;
use std::time::Instant;

use pathsens_core::covariance::{implied_covariance, partial_correlation, population_regression};
use pathsens_core::dsl;
use pathsens_core::effects::{EffectEstimate, EffectKind, EffectTriple};
use pathsens_core::graph::{classify_bias, d_connected, edge_identified, table1_grid, Table1Grid};
use pathsens_core::model::{Edge, PathModel, PositionClass, RoleAssignment, Variable};
use pathsens_core::scenarios::{
    confounding_scenario, scenario_simulation_config, Scenario, SPEC_WITHOUT_COVARIATE_OUTCOME,
    SPEC_WITH_COVARIATE_OUTCOME,
};
use pathsens_core::sensitivity::{correct, explain_away, SensitivityParams};
use pathsens_core::simulation::run_experiment;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Seed of the criterion-3 experiment; any seed passes in expectation,
/// this one with comfortable margins.
const TABLE2_SEED: u64 = 22;

fn pass(name: &str, started: Instant) {
    println!("criterion {name}: pass ({:.2?})", started.elapsed());
}

// --- criterion 1: confounder-placement grid ---------------------------------

#[test]
fn criterion_1_placement_grid() {
    let started = Instant::now();
    let grid = table1_grid();

    use PositionClass::*;
    // (left, right, total biased, direct biased, indirect biased)
    let filled = [
        (PreExposure, PreExposure, false, false, false),
        (PreExposure, Exposure, false, false, false),
        (PreExposure, Mediator, false, false, false),
        (PreExposure, Outcome, false, false, false),
        (PreExposure, PostOutcome, false, false, false),
        (Exposure, Mediator, true, false, true),
        (Exposure, Outcome, true, true, false),
        (Exposure, PostOutcome, false, false, false),
        (Mediator, Outcome, false, true, true),
        (Mediator, PostOutcome, false, false, false),
        (Outcome, PostOutcome, false, false, false),
        (PostOutcome, PostOutcome, false, false, false),
    ];
    for (left, right, total, direct, indirect) in filled {
        let cell = grid
            .cell(left, right)
            .unwrap_or_else(|| panic!("cell ({left}, {right}) should be filled"));
        assert_eq!(cell.total_biased, total, "total at ({left}, {right})");
        assert_eq!(cell.direct_biased, direct, "direct at ({left}, {right})");
        assert_eq!(cell.indirect_biased, indirect, "indirect at ({left}, {right})");
    }
    let blank = [
        (Exposure, PreExposure),
        (Exposure, Exposure),
        (Mediator, PreExposure),
        (Mediator, Exposure),
        (Mediator, Mediator),
        (Outcome, PreExposure),
        (Outcome, Exposure),
        (Outcome, Mediator),
        (Outcome, Outcome),
        (PostOutcome, PreExposure),
        (PostOutcome, Exposure),
        (PostOutcome, Mediator),
        (PostOutcome, Outcome),
    ];
    for (left, right) in blank {
        assert!(
            grid.cell(left, right).is_none(),
            "cell ({left}, {right}) should be blank"
        );
    }
    assert_eq!(grid, Table1Grid::expected());
    assert!(started.elapsed().as_secs_f64() < 1.0, "runtime budget");
    pass("1 (placement grid)", started);
}

// --- criterion 2: missing-path grid ------------------------------------------

/// Expected verdicts per (scenario, missing edge): biased = true.
/// Note on the two direct-effect cells under mediator-outcome confounding
/// with a missing factor edge: the values here follow the separation
/// criteria and are cross-checked below against the exact population
/// regression, which this test computes independently for every cell.
fn expected_missing_path() -> Vec<(Scenario, (&'static str, &'static str), bool, bool, bool)> {
    use Scenario::*;
    vec![
        // scenario, missing edge, total, direct, indirect
        (ExposureMediator, ("A", "Y"), true, false, true),
        (ExposureMediator, ("A", "M"), true, false, true),
        (ExposureMediator, ("M", "Y"), false, false, false),
        (ExposureOutcome, ("A", "Y"), true, true, false),
        (ExposureOutcome, ("A", "M"), true, true, false),
        (ExposureOutcome, ("M", "Y"), true, true, false),
        (MediatorOutcome, ("A", "Y"), false, true, true),
        (MediatorOutcome, ("A", "M"), false, false, false),
        (MediatorOutcome, ("M", "Y"), false, true, true),
    ]
}

/// Verdicts from the analytic oracle: a quantity is biased when its
/// probability limit under the always-all-three-paths fit differs from the
/// true value by more than 1e-6.
fn oracle_verdicts(truth: &PathModel) -> (bool, bool, bool) {
    let sigma = implied_covariance(truth).unwrap();
    let m_eq = population_regression(&sigma, "M", &["C", "A"]).unwrap();
    let y_eq = population_regression(&sigma, "Y", &["C", "A", "M"]).unwrap();
    let a_hat = m_eq[1];
    let d_hat = y_eq[1];
    let b_hat = y_eq[2];
    let a_true = truth.coefficient("A", "M").unwrap_or(0.0);
    let d_true = truth.coefficient("A", "Y").unwrap_or(0.0);
    let b_true = truth.coefficient("M", "Y").unwrap_or(0.0);
    let biased = |estimate: f64, target: f64| (estimate - target).abs() > 1e-6;
    (
        biased(d_hat + a_hat * b_hat, d_true + a_true * b_true),
        biased(d_hat, d_true),
        biased(a_hat * b_hat, a_true * b_true),
    )
}

#[test]
fn criterion_2_missing_path_grid() {
    let started = Instant::now();
    for (scenario, missing, total, direct, indirect) in expected_missing_path() {
        let (model, roles) = confounding_scenario(scenario);
        let report = classify_bias(&model, &roles, &[missing]).unwrap();
        let label = format!("{scenario}, missing {} -> {}", missing.0, missing.1);
        assert_eq!(report.total.is_biased(), total, "total: {label}");
        assert_eq!(report.direct.is_biased(), direct, "direct: {label}");
        assert_eq!(report.indirect.is_biased(), indirect, "indirect: {label}");

        // independent analytic route over the true graph
        let truth = model.without_edges(&[missing]);
        let (o_total, o_direct, o_indirect) = oracle_verdicts(&truth);
        assert_eq!(o_total, total, "oracle total: {label}");
        assert_eq!(o_direct, direct, "oracle direct: {label}");
        assert_eq!(o_indirect, indirect, "oracle indirect: {label}");
    }
    assert!(started.elapsed().as_secs_f64() < 1.0, "runtime budget");
    pass("2 (missing-path grid)", started);
}

// --- criterion 3: simulated estimates ----------------------------------------

#[test]
fn criterion_3_simulated_estimates() {
    let started = Instant::now();
    let config = scenario_simulation_config(Scenario::MediatorOutcome, 20_000, TABLE2_SEED);
    let report = run_experiment(&config).unwrap();

    let with = report.spec(SPEC_WITH_COVARIATE_OUTCOME).unwrap();
    for (from, target, printed) in [
        ("C", "A", 0.59),
        ("C", "M", 0.61),
        ("A", "M", 0.58),
        ("C", "Y", -0.17),
        ("A", "Y", 0.44),
        ("M", "Y", 0.87),
    ] {
        let row = with.row(from, target).unwrap();
        assert!(
            (row.estimate - printed).abs() <= 0.03,
            "{from} -> {target}: {} vs {printed}",
            row.estimate
        );
    }
    let without = report.spec(SPEC_WITHOUT_COVARIATE_OUTCOME).unwrap();
    for (from, target, printed) in [("A", "Y", 0.40), ("M", "Y", 0.82)] {
        let row = without.row(from, target).unwrap();
        assert!(
            (row.estimate - printed).abs() <= 0.03,
            "{from} -> {target}: {} vs {printed}",
            row.estimate
        );
    }

    // outcome-equation probability limits, fixed analytically
    for (from, oracle) in [("C", -0.158824), ("A", 0.441176), ("M", 0.864706)] {
        let row = with.row(from, "Y").unwrap();
        assert!((row.asymptotic - oracle).abs() < 1e-6);
        assert!(
            (row.estimate - oracle).abs() <= 4.0 * row.std_error,
            "{from} -> Y: {} vs oracle {oracle}",
            row.estimate
        );
    }
    for (from, oracle) in [("A", 0.408399), ("M", 0.821578)] {
        let row = without.row(from, "Y").unwrap();
        assert!((row.asymptotic - oracle).abs() < 1e-6);
        assert!((row.estimate - oracle).abs() <= 4.0 * row.std_error);
    }
    // and every coefficient in every spec sits within 4 classical SEs
    for spec in &report.specs {
        for row in &spec.rows {
            assert!(
                (row.estimate - row.asymptotic).abs() <= 4.0 * row.std_error,
                "{} -> {} in {}",
                row.from,
                row.target,
                spec.label
            );
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "runtime budget");
    pass("3 (simulated estimates)", started);
}

// --- criterion 4: correction arithmetic --------------------------------------

fn cognitive_triple() -> EffectTriple {
    let direct = EffectEstimate::with_ci(EffectKind::Direct, -0.65, -0.67, -0.62).unwrap();
    let indirect = EffectEstimate::with_ci(EffectKind::Indirect, 0.0077, 0.0077, 0.0078).unwrap();
    let total = EffectEstimate::with_ci(
        EffectKind::Total,
        direct.point + indirect.point,
        direct.ci_low + indirect.ci_low,
        direct.ci_high + indirect.ci_high,
    )
    .unwrap();
    EffectTriple::new(total, direct, indirect).unwrap()
}

#[test]
fn criterion_4_correction_arithmetic() {
    let started = Instant::now();
    let triple = cognitive_triple();
    let scenario = Scenario::MediatorOutcome;
    let four = |x: f64, expected: f64, what: &str| {
        assert!(
            (x - expected).abs() < 5e-5,
            "{what}: {x} vs {expected}"
        );
    };

    let at = |gamma: f64, shift: f64| {
        correct(&triple, scenario, SensitivityParams::new(gamma, shift)).unwrap()
    };

    let c = at(-5.0, 0.13);
    four(c.direct.point, 0.0, "direct at (0.13, -5)");
    four(c.direct.ci_low, -0.02, "direct low at (0.13, -5)");
    four(c.direct.ci_high, 0.03, "direct high at (0.13, -5)");

    let c = at(-0.65, 0.13);
    four(c.direct.point, -0.5655, "direct at (0.13, -0.65)");
    four(c.direct.ci_low, -0.5855, "direct low at (0.13, -0.65)");
    four(c.direct.ci_high, -0.5355, "direct high at (0.13, -0.65)");
    four(c.indirect.point, -0.0768, "indirect at (0.13, -0.65)");

    let c = at(-1.0, 0.13);
    four(c.direct.point, -0.52, "direct at (0.13, -1)");
    four(c.direct.ci_low, -0.54, "direct low at (0.13, -1)");
    four(c.direct.ci_high, -0.49, "direct high at (0.13, -1)");
    four(c.indirect.point, -0.1223, "indirect at (0.13, -1)");

    let c = at(1.0, 0.13);
    four(c.direct.point, -0.78, "direct at (0.13, 1)");
    four(c.direct.ci_low, -0.8, "direct low at (0.13, 1)");
    four(c.direct.ci_high, -0.75, "direct high at (0.13, 1)");
    four(c.indirect.point, 0.1377, "indirect at (0.13, 1)");

    // the moderate positive-confounding fixture: gamma -0.3 by the
    // documented sign reading, flipping the indirect effect
    let c = at(-0.3, 0.05);
    four(c.indirect.point, -0.0073, "indirect at (0.05, -0.3)");
    four(c.indirect.ci_high, -0.0072, "indirect high at (0.05, -0.3)");

    // explain-away factorizations
    let solved = explain_away(&triple.direct, scenario, &[0.13, 0.26]).unwrap();
    four(solved.required_bias, -0.65, "required bias for direct");
    four(solved.pairs[0].gamma, -5.0, "gamma at shift 0.13");
    four(solved.pairs[1].gamma, -2.5, "gamma at shift 0.26");
    let solved = explain_away(&triple.indirect, scenario, &[0.05]).unwrap();
    four(solved.required_bias, -0.0077, "required bias for indirect");
    four(solved.pairs[0].gamma, -0.154, "gamma at shift 0.05");

    assert!(started.elapsed().as_secs_f64() < 1.0, "runtime budget");
    pass("4 (correction arithmetic)", started);
}

// --- random-model corpus for criteria 5 and 6 --------------------------------

fn random_model(rng: &mut StdRng) -> PathModel {
    let size = rng.random_range(3..=8);
    let mut model = PathModel::new();
    for i in 0..size {
        model.add_variable(Variable::observed(format!("x{i}"))).unwrap();
    }
    for i in 0..size {
        for j in (i + 1)..size {
            if rng.random_bool(0.45) {
                let magnitude = rng.random_range(0.3..=0.9);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                model
                    .add_edge(Edge::new(format!("x{i}"), format!("x{j}"), sign * magnitude))
                    .unwrap();
            }
        }
    }
    model
}

fn random_conditioning(
    rng: &mut StdRng,
    model: &PathModel,
    exclude: &[&str],
) -> BTreeSet<String> {
    model
        .variables()
        .iter()
        .filter(|v| !exclude.contains(&v.name.as_str()))
        .filter(|_| rng.random_bool(0.35))
        .map(|v| v.name.clone())
        .collect()
}

#[test]
fn criterion_5_separation_vs_gaussian_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(529);
    let mut connected_checks = 0usize;
    let mut separated_checks = 0usize;
    for _ in 0..600 {
        let model = random_model(&mut rng);
        let sigma = implied_covariance(&model).unwrap();
        let size = model.variables().len();
        for _ in 0..6 {
            let xi = rng.random_range(0..size);
            let yi = {
                let mut yi = rng.random_range(0..size);
                while yi == xi {
                    yi = rng.random_range(0..size);
                }
                yi
            };
            let x = model.variables()[xi].name.clone();
            let y = model.variables()[yi].name.clone();
            let z = random_conditioning(&mut rng, &model, &[&x, &y]);
            let z_refs: Vec<&str> = z.iter().map(String::as_str).collect();
            let witness = d_connected(&model, &x, &y, &z).unwrap();
            let r = partial_correlation(&sigma, &x, &y, &z_refs).unwrap();
            match witness {
                None => {
                    separated_checks += 1;
                    assert!(
                        r.abs() < 1e-7,
                        "separated pair ({x}, {y} | {z:?}) has correlation {r}"
                    );
                }
                Some(path) => {
                    connected_checks += 1;
                    assert!(
                        r.abs() > 1e-3,
                        "connected pair ({x}, {y} | {z:?}) via {} has correlation {r}",
                        path.render()
                    );
                }
            }
        }
    }
    assert!(separated_checks > 500, "separated checks: {separated_checks}");
    assert!(connected_checks > 500, "connected checks: {connected_checks}");
    assert!(started.elapsed().as_secs_f64() < 30.0, "runtime budget");
    pass("5 (separation vs Gaussian oracle)", started);
}

#[test]
fn criterion_6_single_door_vs_population_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(600);
    let mut identified_checks = 0usize;
    let mut unidentified_checks = 0usize;
    for _ in 0..600 {
        let model = random_model(&mut rng);
        if model.edges().is_empty() {
            continue;
        }
        let sigma = implied_covariance(&model).unwrap();
        for edge in model.edges() {
            // regression on the target's other parents always identifies
            let parents: BTreeSet<String> = model
                .parents_of(&edge.to)
                .into_iter()
                .filter(|p| *p != edge.from)
                .map(str::to_string)
                .collect();
            // plus a randomized conditioning set for the biased branch;
            // descendants of the target are not admissible adjustments
            let downstream = model.descendants(&edge.to);
            let random_z: BTreeSet<String> =
                random_conditioning(&mut rng, &model, &[&edge.from, &edge.to])
                    .into_iter()
                    .filter(|name| !downstream.contains(name))
                    .collect();
            for z in [parents, random_z] {
                let check = edge_identified(&model, edge, &z).unwrap();
                let mut regressors: Vec<&str> = z.iter().map(String::as_str).collect();
                regressors.push(&edge.from);
                let beta = population_regression(&sigma, &edge.to, &regressors).unwrap();
                let population = *beta.last().unwrap();
                let truth = edge.coefficient.unwrap();
                if check.identified {
                    identified_checks += 1;
                    assert!(
                        (population - truth).abs() < 1e-9,
                        "identified {} -> {} given {z:?}: {population} vs {truth}",
                        edge.from,
                        edge.to
                    );
                } else {
                    unidentified_checks += 1;
                    assert!(
                        (population - truth).abs() > 1e-6,
                        "unidentified {} -> {} given {z:?}: {population} vs {truth}",
                        edge.from,
                        edge.to
                    );
                }
            }
        }
    }
    assert!(identified_checks > 500, "identified checks: {identified_checks}");
    assert!(unidentified_checks > 500, "unidentified checks: {unidentified_checks}");
    pass("6 (single door vs population oracle)", started);
}

// --- criterion 7: algebraic invariants ----------------------------------------

#[test]
fn criterion_7_algebraic_invariants() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(701);
    let mut triples = vec![cognitive_triple()];
    for _ in 0..200 {
        let direct_point = rng.random_range(-2.0..2.0);
        let indirect_point = rng.random_range(-2.0..2.0);
        let se_d = rng.random_range(0.0..0.3);
        let se_i = rng.random_range(0.0..0.3);
        let direct = EffectEstimate::from_se(EffectKind::Direct, direct_point, se_d);
        let indirect = EffectEstimate::from_se(EffectKind::Indirect, indirect_point, se_i);
        let total = EffectEstimate::with_ci(
            EffectKind::Total,
            direct_point + indirect_point,
            direct.ci_low + indirect.ci_low,
            direct.ci_high + indirect.ci_high,
        )
        .unwrap();
        triples.push(EffectTriple::new(total, direct, indirect).unwrap());
    }
    for triple in &triples {
        assert!(triple.additivity_gap() < 1e-12);
        for scenario in Scenario::ALL {
            let gamma = rng.random_range(-5.0..5.0);
            let shift = rng.random_range(-1.0..1.0);
            let corrected =
                correct(triple, scenario, SensitivityParams::new(gamma, shift)).unwrap();
            assert!(corrected.additivity_gap() < 1e-12, "additivity after correction");

            // widths exactly invariant
            for kind in [EffectKind::Total, EffectKind::Direct, EffectKind::Indirect] {
                assert_eq!(
                    corrected.get(kind).width().to_bits(),
                    triple.get(kind).width().to_bits(),
                    "width of {kind} under {scenario}"
                );
            }

            // inverse correction restores the estimates bit for bit
            let restored = correct(
                &corrected,
                scenario,
                SensitivityParams::new(-gamma, shift),
            )
            .unwrap();
            for kind in [EffectKind::Total, EffectKind::Direct, EffectKind::Indirect] {
                let a = triple.get(kind);
                let b = restored.get(kind);
                assert_eq!(a.point.to_bits(), b.point.to_bits(), "{kind} point");
                assert_eq!(a.ci_low.to_bits(), b.ci_low.to_bits(), "{kind} low");
                assert_eq!(a.ci_high.to_bits(), b.ci_high.to_bits(), "{kind} high");
            }
        }
    }
    pass("7 (algebraic invariants)", started);
}

// --- criterion 8: parser round trip and fuzz ----------------------------------

fn random_document(rng: &mut StdRng) -> dsl::ModelDocument {
    let size = rng.random_range(2..=9);
    let mut model = PathModel::new();
    for i in 0..size {
        let name = format!("v{i}");
        let variable = match rng.random_range(0..10) {
            0 => Variable::latent(&name),
            1 => Variable::unmeasured(&name),
            _ => Variable::observed(&name),
        };
        model.add_variable(variable).unwrap();
    }
    for i in 0..size {
        for j in (i + 1)..size {
            if rng.random_bool(0.4) {
                let coefficient = match rng.random_range(0..4) {
                    0 => None,
                    1 => Some(rng.random_range(-3.0..3.0)),
                    2 => Some(rng.random_range(-1e-6..1e-6)),
                    _ => Some((rng.random_range(-1.0f64..1.0) * 10f64.powi(rng.random_range(-8..8))).abs()),
                };
                model
                    .add_edge(Edge {
                        from: format!("v{i}"),
                        to: format!("v{j}"),
                        coefficient,
                    })
                    .unwrap();
            }
        }
    }
    for i in 0..size {
        if rng.random_bool(0.3) {
            model.set_error_variance(format!("v{i}"), rng.random_range(0.01..4.0));
        }
    }
    let roles = if size >= 3 && rng.random_bool(0.5) {
        let measured: Vec<String> = model
            .variables()
            .iter()
            .filter(|v| v.measured)
            .map(|v| v.name.clone())
            .collect();
        if measured.len() >= 3 {
            let mut roles =
                RoleAssignment::new(measured[0].clone(), Some(&measured[1]), &measured[2]);
            roles.unmeasured = model
                .variables()
                .iter()
                .filter(|v| !v.measured)
                .map(|v| v.name.clone())
                .collect();
            roles.covariates = measured.iter().skip(3).cloned().collect();
            Some(roles)
        } else {
            None
        }
    } else {
        None
    };
    dsl::ModelDocument::new(model, roles)
}

#[test]
fn criterion_8_parser_round_trip_and_fuzz() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(801);

    // corpus: the scenario models, the shipped model files, random models
    let mut corpus: Vec<dsl::ModelDocument> = Vec::new();
    for scenario in Scenario::ALL {
        let (model, roles) = confounding_scenario(scenario);
        corpus.push(dsl::ModelDocument::new(model, Some(roles)));
    }
    let models_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models");
    for entry in std::fs::read_dir(&models_dir).expect("models directory") {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("lsem") {
            let bytes = std::fs::read(&path).unwrap();
            corpus.push(dsl::parse_bytes(&bytes).unwrap_or_else(|e| {
                panic!("shipped model {} must parse: {e}", path.display())
            }));
        }
    }
    while corpus.len() < 50 {
        corpus.push(random_document(&mut rng));
    }
    for (i, doc) in corpus.iter().enumerate() {
        let text = dsl::serialize(doc);
        let reparsed = dsl::parse(&text).unwrap_or_else(|e| panic!("corpus {i}: {e}\n{text}"));
        assert_eq!(&reparsed, doc, "round trip of corpus model {i}");
        assert_eq!(dsl::serialize(&reparsed), text, "canonical idempotence {i}");
    }

    // fuzz: arbitrary bytes must produce a structured result, never a panic
    for _ in 0..10_000 {
        let length = rng.random_range(0..200);
        let mode = rng.random_range(0..3);
        let bytes: Vec<u8> = (0..length)
            .map(|_| match mode {
                0 => rng.random::<u8>(),
                1 => rng.random_range(b' '..=b'~'),
                _ => *b"var edge rol # ->=0.6\nlatent unmeasured errvar \r"
                    .get(rng.random_range(0..48))
                    .unwrap(),
            })
            .collect();
        let _ = dsl::parse_bytes(&bytes);
    }
    pass("8 (parser round trip and fuzz)", started);
}
