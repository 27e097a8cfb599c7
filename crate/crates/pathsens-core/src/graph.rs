//! d-separation, the backdoor and single-door criteria, and the qualitative
//! bias classifier built on them.
//!
//! Paths are enumerated by depth-first search over undirected walks without
//! repeated vertices. A path is open given a conditioning set `z` when every
//! intermediate non-collider lies outside `z` and every collider (or one of
//! its descendants) lies inside `z`. Collider-descendant openness is checked
//! against descendant sets computed once per query.
//!
//! The classifier derives every verdict from these criteria rather than from
//! a lookup table, so it applies to models of any size and shape.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Edge, PathModel, PositionClass, RoleAssignment, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("unknown edge: {0} -> {1}")]
    UnknownEdge(String, String),
    #[error("endpoints must be distinct and outside the conditioning set: {0}")]
    InvalidQuery(String),
    #[error(
        "conditioning set contains {offender}, a descendant of {target}; the coefficient of an \
         equation cannot be identified by adjusting for the target's own effects"
    )]
    DescendantConditioning { target: String, offender: String },
    #[error("roles are missing a mediator; the indirect verdict needs one")]
    MissingMediator,
    #[error("absent edge {0} -> {1} is not one of the three effect paths")]
    InvalidAbsentEdge(String, String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid roles: {0}")]
    InvalidRoles(String),
}

/// Direction of one step along an undirected path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// The edge points along the walk: `nodes[i] -> nodes[i+1]`.
    Forward,
    /// The edge points against the walk: `nodes[i] <- nodes[i+1]`.
    Backward,
}

/// Shape of an intermediate node on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeShape {
    Chain,
    Fork,
    Collider,
}

/// An undirected path witnessing d-connection, with per-intermediate-node
/// shape annotations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessPath {
    pub nodes: Vec<String>,
    pub steps: Vec<Step>,
    /// `shapes[i]` annotates `nodes[i + 1]`.
    pub shapes: Vec<NodeShape>,
}

impl WitnessPath {
    fn new(nodes: Vec<String>, steps: Vec<Step>) -> Self {
        debug_assert_eq!(nodes.len(), steps.len() + 1);
        let shapes = (1..nodes.len().saturating_sub(1))
            .map(|i| shape_at(steps[i - 1], steps[i]))
            .collect();
        WitnessPath { nodes, steps, shapes }
    }

    pub fn source(&self) -> &str {
        &self.nodes[0]
    }

    pub fn sink(&self) -> &str {
        self.nodes.last().unwrap()
    }

    /// Renders the path as `A -> M <- U -> Y`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                out.push_str(match self.steps[i - 1] {
                    Step::Forward => " -> ",
                    Step::Backward => " <- ",
                });
            }
            out.push_str(node);
        }
        out
    }

    /// Replays the separation rules: checks that every step uses a declared
    /// edge in the stated direction and that the path is open given `z`.
    pub fn verify_open(&self, model: &PathModel, z: &BTreeSet<String>) -> Result<(), String> {
        for (i, step) in self.steps.iter().enumerate() {
            let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
            let (from, to) = match step {
                Step::Forward => (a, b),
                Step::Backward => (b, a),
            };
            if model.edge(from, to).is_none() {
                return Err(format!("no edge {from} -> {to}"));
            }
        }
        for i in 1..self.nodes.len().saturating_sub(1) {
            let node = &self.nodes[i];
            match shape_at(self.steps[i - 1], self.steps[i]) {
                NodeShape::Collider => {
                    let opened = z.contains(node)
                        || model.descendants(node).iter().any(|d| z.contains(d));
                    if !opened {
                        return Err(format!("collider {node} not opened by conditioning set"));
                    }
                }
                _ => {
                    if z.contains(node) {
                        return Err(format!("non-collider {node} blocked by conditioning set"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for WitnessPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

fn shape_at(incoming: Step, outgoing: Step) -> NodeShape {
    match (incoming, outgoing) {
        (Step::Forward, Step::Backward) => NodeShape::Collider,
        (Step::Backward, Step::Forward) => NodeShape::Fork,
        _ => NodeShape::Chain,
    }
}

/// Bias verdict for one effect, carrying the open witness path when biased.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Biased { witness: WitnessPath },
    Unbiased,
}

impl Verdict {
    pub fn is_biased(&self) -> bool {
        matches!(self, Verdict::Biased { .. })
    }

    pub fn witness(&self) -> Option<&WitnessPath> {
        match self {
            Verdict::Biased { witness } => Some(witness),
            Verdict::Unbiased => None,
        }
    }
}

/// A fitted edge whose regression coefficient is asymptotically biased,
/// with the open path responsible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasedEdge {
    pub edge: Edge,
    pub witness: WitnessPath,
}

/// Verdicts for the total, direct, and indirect effects, plus the
/// per-edge bias list when one was requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub total: Verdict,
    pub direct: Verdict,
    pub indirect: Verdict,
    pub biased_edges: Vec<BiasedEdge>,
}

struct PathSearch<'m> {
    model: &'m PathModel,
    z: Vec<bool>,
    /// `opens_collider[i]` is true when node `i` or one of its descendants
    /// lies in the conditioning set.
    opens_collider: Vec<bool>,
    target: usize,
    /// Neighbors as (node index, step direction), children before parents,
    /// declaration order within each group.
    neighbors: Vec<Vec<(usize, Step)>>,
}

impl<'m> PathSearch<'m> {
    fn new(model: &'m PathModel, target: usize, z: &BTreeSet<String>) -> Self {
        let n = model.variables().len();
        let mut in_z = vec![false; n];
        for name in z {
            if let Some(i) = model.index_of(name) {
                in_z[i] = true;
            }
        }
        let mut opens_collider = in_z.clone();
        for (i, v) in model.variables().iter().enumerate() {
            if !opens_collider[i] {
                opens_collider[i] = model
                    .descendants(&v.name)
                    .iter()
                    .any(|d| z.contains(d.as_str()));
            }
        }
        let neighbors = model
            .variables()
            .iter()
            .map(|v| {
                let mut out: Vec<(usize, Step)> = model
                    .children_of(&v.name)
                    .into_iter()
                    .filter_map(|c| model.index_of(c).map(|i| (i, Step::Forward)))
                    .collect();
                out.extend(
                    model
                        .parents_of(&v.name)
                        .into_iter()
                        .filter_map(|p| model.index_of(p).map(|i| (i, Step::Backward))),
                );
                out
            })
            .collect();
        PathSearch {
            model,
            z: in_z,
            opens_collider,
            target,
            neighbors,
        }
    }

    fn node_open(&self, node: usize, incoming: Step, outgoing: Step) -> bool {
        match shape_at(incoming, outgoing) {
            NodeShape::Collider => self.opens_collider[node],
            _ => !self.z[node],
        }
    }

    /// Finds the first open path in DFS order, extending `nodes`/`steps`.
    fn extend(
        &self,
        nodes: &mut Vec<usize>,
        steps: &mut Vec<Step>,
        visited: &mut Vec<bool>,
    ) -> bool {
        let current = *nodes.last().unwrap();
        if current == self.target {
            return true;
        }
        for &(next, step) in &self.neighbors[current] {
            if visited[next] {
                continue;
            }
            // `current` becomes an intermediate node once the walk extends.
            if let Some(&incoming) = steps.last() {
                if !self.node_open(current, incoming, step) {
                    continue;
                }
            }
            // endpoints of the query may not be conditioned on; intermediate
            // occurrences of the target are ruled out by the blocked check
            nodes.push(next);
            steps.push(step);
            visited[next] = true;
            if self.extend(nodes, steps, visited) {
                return true;
            }
            visited[next] = false;
            nodes.pop();
            steps.pop();
        }
        false
    }

    fn witness(&self, nodes: Vec<usize>, steps: Vec<Step>) -> WitnessPath {
        let names = nodes
            .into_iter()
            .map(|i| self.model.variables()[i].name.clone())
            .collect();
        WitnessPath::new(names, steps)
    }
}

fn check_query(
    model: &PathModel,
    x: &str,
    y: &str,
    z: &BTreeSet<String>,
) -> Result<(usize, usize), GraphError> {
    let xi = model
        .index_of(x)
        .ok_or_else(|| GraphError::UnknownVariable(x.to_string()))?;
    let yi = model
        .index_of(y)
        .ok_or_else(|| GraphError::UnknownVariable(y.to_string()))?;
    if x == y {
        return Err(GraphError::InvalidQuery(format!("{x} = {y}")));
    }
    for name in z {
        if !model.contains(name) {
            return Err(GraphError::UnknownVariable(name.clone()));
        }
    }
    if z.contains(x) || z.contains(y) {
        return Err(GraphError::InvalidQuery(format!(
            "{x} or {y} is in the conditioning set"
        )));
    }
    Ok((xi, yi))
}

/// Tests whether `x` and `y` are d-connected given `z`; returns an open
/// witness path when they are, `None` when every path is blocked.
pub fn d_connected(
    model: &PathModel,
    x: &str,
    y: &str,
    z: &BTreeSet<String>,
) -> Result<Option<WitnessPath>, GraphError> {
    let (xi, yi) = check_query(model, x, y, z)?;
    let search = PathSearch::new(model, yi, z);
    let mut nodes = vec![xi];
    let mut steps = Vec::new();
    let mut visited = vec![false; model.variables().len()];
    visited[xi] = true;
    if search.extend(&mut nodes, &mut steps, &mut visited) {
        Ok(Some(search.witness(nodes, steps)))
    } else {
        Ok(None)
    }
}

/// Tests whether some open path given `z` starts with an edge into `a`
/// (an open backdoor path from `a` to `y`).
pub fn backdoor_open(
    model: &PathModel,
    a: &str,
    y: &str,
    z: &BTreeSet<String>,
) -> Result<Option<WitnessPath>, GraphError> {
    let (ai, yi) = check_query(model, a, y, z)?;
    let search = PathSearch::new(model, yi, z);
    let mut visited = vec![false; model.variables().len()];
    visited[ai] = true;
    // First step constrained to arrive through a parent of `a`.
    for &(next, step) in &search.neighbors[ai] {
        if step != Step::Backward || visited[next] {
            continue;
        }
        let mut nodes = vec![ai, next];
        let mut steps = vec![step];
        visited[next] = true;
        if search.extend(&mut nodes, &mut steps, &mut visited) {
            return Ok(Some(search.witness(nodes, steps)));
        }
        visited[next] = false;
    }
    Ok(None)
}

/// Result of a single-door identification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCheck {
    pub identified: bool,
    pub witness: Option<WitnessPath>,
}

/// Single-door criterion on a hypothetical or declared edge `from -> to`:
/// removes the edge when present and tests d-connection of its endpoints
/// given `z`. An open path means the regression coefficient of `from` in
/// the equation of `to` on `z` plus `from` is asymptotically biased.
///
/// The conditioning set may not contain descendants of `to`: adjusting for
/// the target's own effects distorts the equation regardless of
/// separation, so such queries are rejected rather than answered.
fn single_door(
    model: &PathModel,
    from: &str,
    to: &str,
    z: &BTreeSet<String>,
) -> Result<EdgeCheck, GraphError> {
    let downstream = model.descendants(to);
    if let Some(offender) = z.iter().find(|name| downstream.contains(*name)) {
        return Err(GraphError::DescendantConditioning {
            target: to.to_string(),
            offender: offender.clone(),
        });
    }
    let reduced = model.without_edges(&[(from, to)]);
    let witness = d_connected(&reduced, from, to, z)?;
    Ok(EdgeCheck {
        identified: witness.is_none(),
        witness,
    })
}

/// Single-door identification of a declared edge.
pub fn edge_identified(
    model: &PathModel,
    edge: &Edge,
    z: &BTreeSet<String>,
) -> Result<EdgeCheck, GraphError> {
    if model.edge(&edge.from, &edge.to).is_none() {
        return Err(GraphError::UnknownEdge(edge.from.clone(), edge.to.clone()));
    }
    single_door(model, &edge.from, &edge.to, z)
}

fn validated_roles<'r>(
    model: &PathModel,
    roles: &'r RoleAssignment,
) -> Result<&'r RoleAssignment, GraphError> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(GraphError::InvalidModel(violations[0].to_string()));
    }
    let problems = roles.validate(model);
    if !problems.is_empty() {
        return Err(GraphError::InvalidRoles(problems[0].clone()));
    }
    Ok(roles)
}

/// Classifies the total, direct, and indirect effects of the assigned roles
/// as biased or unbiased in the true graph `model` minus `absent_edges`.
///
/// The fitted specification is assumed to include all three effect paths
/// (exposure-outcome, exposure-mediator, mediator-outcome) whether or not
/// they are present in the true graph, so the conditioning sets are fixed:
/// the covariates for the total effect and the exposure-mediator factor,
/// the covariates plus mediator for the direct effect, and the covariates
/// plus exposure for the mediator-outcome factor.
///
/// The indirect effect is the product of the two factor estimates. It is
/// unbiased when both factors are identified, or when exactly one factor is
/// biased while the other is identified with true coefficient zero (the
/// product then converges to the true zero). Biased factors are treated as
/// generically nonzero in the limit.
pub fn classify_bias(
    model: &PathModel,
    roles: &RoleAssignment,
    absent_edges: &[(&str, &str)],
) -> Result<BiasReport, GraphError> {
    let roles = validated_roles(model, roles)?;
    let mediator = roles.mediator.as_deref().ok_or(GraphError::MissingMediator)?;
    let exposure = roles.exposure.as_str();
    let outcome = roles.outcome.as_str();

    let effect_paths = [
        (exposure, outcome),
        (exposure, mediator),
        (mediator, outcome),
    ];
    for (f, t) in absent_edges {
        if !effect_paths.contains(&(*f, *t)) {
            return Err(GraphError::InvalidAbsentEdge(f.to_string(), t.to_string()));
        }
    }
    let truth = model.without_edges(absent_edges);

    // the backdoor reading of the total verdict needs pre-exposure
    // covariates; a covariate downstream of the exposure is a different
    // analysis, not a confounder adjustment
    let downstream = truth.descendants(exposure);
    if let Some(offender) = roles.covariates.iter().find(|c| downstream.contains(*c)) {
        return Err(GraphError::InvalidRoles(format!(
            "covariate {offender} is a descendant of the exposure {exposure}"
        )));
    }

    let covariates = roles.covariates.clone();
    let mut with_mediator = covariates.clone();
    with_mediator.insert(mediator.to_string());
    let mut with_exposure = covariates.clone();
    with_exposure.insert(exposure.to_string());

    let total = match backdoor_open(&truth, exposure, outcome, &covariates)? {
        Some(witness) => Verdict::Biased { witness },
        None => Verdict::Unbiased,
    };

    let direct_check = single_door(&truth, exposure, outcome, &with_mediator)?;
    let direct = match direct_check.witness {
        Some(witness) => Verdict::Biased { witness },
        None => Verdict::Unbiased,
    };

    let factor_one = single_door(&truth, exposure, mediator, &covariates)?;
    let factor_two = single_door(&truth, mediator, outcome, &with_exposure)?;
    let absent = |f: &str, t: &str| absent_edges.iter().any(|(af, at)| *af == f && *at == t);
    let true_zero_one = absent(exposure, mediator);
    let true_zero_two = absent(mediator, outcome);
    let biased_one = !factor_one.identified;
    let biased_two = !factor_two.identified;
    let indirect_unbiased = (!biased_one && !biased_two)
        || (biased_one && !biased_two && true_zero_two)
        || (biased_two && !biased_one && true_zero_one);
    let indirect = if indirect_unbiased {
        Verdict::Unbiased
    } else {
        let witness = factor_one
            .witness
            .or(factor_two.witness)
            .expect("a biased factor carries a witness");
        Verdict::Biased { witness }
    };

    Ok(BiasReport {
        total,
        direct,
        indirect,
        biased_edges: Vec::new(),
    })
}

/// Runs the single-door check on every edge of the fitted specification:
/// each measured variable regressed on its measured parents, with the
/// unmeasured variables omitted. Returns the edges whose coefficients are
/// asymptotically biased, each with its open witness path in the true
/// graph, ordered by (child, parent) declaration position.
pub fn biased_edges(
    model: &PathModel,
    roles: &RoleAssignment,
) -> Result<Vec<BiasedEdge>, GraphError> {
    validated_roles(model, roles)?;
    let mut failures = Vec::new();
    for target in model.variables().iter().filter(|v| v.measured) {
        let fitted_parents: Vec<&str> = model
            .parents_of(&target.name)
            .into_iter()
            .filter(|p| model.is_measured(p))
            .collect();
        for parent in &fitted_parents {
            let z: BTreeSet<String> = fitted_parents
                .iter()
                .filter(|p| *p != parent)
                .map(|p| p.to_string())
                .collect();
            let check = single_door(model, parent, &target.name, &z)?;
            if let Some(witness) = check.witness {
                failures.push(BiasedEdge {
                    edge: model.edge(parent, &target.name).unwrap().clone(),
                    witness,
                });
            }
        }
    }
    Ok(failures)
}

/// One cell of the confounder-placement grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellVerdicts {
    pub total_biased: bool,
    pub direct_biased: bool,
    pub indirect_biased: bool,
}

pub const POSITION_ORDER: [PositionClass; 5] = [
    PositionClass::PreExposure,
    PositionClass::Exposure,
    PositionClass::Mediator,
    PositionClass::Outcome,
    PositionClass::PostOutcome,
];

/// Grid of bias verdicts indexed by where the confounder's two arrows
/// point. `None` marks cells that are not constructible: the left target
/// would come after the right one, or both arrows would have to enter the
/// same single role variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Grid {
    pub cells: Vec<Vec<Option<CellVerdicts>>>,
}

impl Table1Grid {
    pub fn cell(&self, left: PositionClass, right: PositionClass) -> Option<CellVerdicts> {
        let li = POSITION_ORDER.iter().position(|p| *p == left)?;
        let ri = POSITION_ORDER.iter().position(|p| *p == right)?;
        self.cells[li][ri]
    }

    /// The expected verdict pattern: bias appears only when the confounder
    /// straddles two of the three effect variables. Everything pointing
    /// before the exposure or after the outcome leaves all effects intact.
    pub fn expected() -> Table1Grid {
        let mut cells = vec![vec![None; 5]; 5];
        let verdicts = |t, d, i| {
            Some(CellVerdicts {
                total_biased: t,
                direct_biased: d,
                indirect_biased: i,
            })
        };
        for right in 0..5 {
            cells[0][right] = verdicts(false, false, false);
        }
        cells[1][2] = verdicts(true, false, true);
        cells[1][3] = verdicts(true, true, false);
        cells[1][4] = verdicts(false, false, false);
        cells[2][3] = verdicts(false, true, true);
        cells[2][4] = verdicts(false, false, false);
        cells[3][4] = verdicts(false, false, false);
        cells[4][4] = verdicts(false, false, false);
        Table1Grid { cells }
    }
}

/// Builds the canonical template model for one grid cell and classifies it.
///
/// The template is a covariate C feeding exposure, mediator, and outcome;
/// the three effect paths A -> M -> Y plus A -> Y; and a post-outcome
/// descendant P. The confounder U sends one arrow to the left target and
/// one to the right target. Cells needing two distinct variables of the
/// same position (two pre-exposure or two post-outcome targets) get a
/// second covariate or descendant.
fn classify_cell(left: PositionClass, right: PositionClass) -> Option<CellVerdicts> {
    let li = POSITION_ORDER.iter().position(|p| *p == left)?;
    let ri = POSITION_ORDER.iter().position(|p| *p == right)?;
    if li > ri {
        return None;
    }
    let replicable = |p: PositionClass| {
        matches!(p, PositionClass::PreExposure | PositionClass::PostOutcome)
    };
    if li == ri && !replicable(left) {
        return None;
    }

    let mut model = PathModel::new();
    for v in ["C", "A", "M", "Y", "P"] {
        model.add_variable(Variable::observed(v)).unwrap();
    }
    model.add_variable(Variable::unmeasured("U")).unwrap();
    for (f, t) in [
        ("C", "A"),
        ("C", "M"),
        ("C", "Y"),
        ("A", "M"),
        ("A", "Y"),
        ("M", "Y"),
        ("Y", "P"),
    ] {
        model.add_edge(Edge::unweighted(f, t)).unwrap();
    }
    let mut covariates = vec!["C".to_string()];
    let target = |p: PositionClass| match p {
        PositionClass::PreExposure => "C",
        PositionClass::Exposure => "A",
        PositionClass::Mediator => "M",
        PositionClass::Outcome => "Y",
        PositionClass::PostOutcome => "P",
        PositionClass::Other => unreachable!(),
    };
    let left_target = target(left).to_string();
    let right_target = if li == ri {
        // second variable of the same position class
        match left {
            PositionClass::PreExposure => {
                model.add_variable(Variable::observed("C2")).unwrap();
                for t in ["A", "M", "Y"] {
                    model.add_edge(Edge::unweighted("C2", t)).unwrap();
                }
                covariates.push("C2".to_string());
                "C2".to_string()
            }
            PositionClass::PostOutcome => {
                model.add_variable(Variable::observed("P2")).unwrap();
                model.add_edge(Edge::unweighted("Y", "P2")).unwrap();
                "P2".to_string()
            }
            _ => unreachable!(),
        }
    } else {
        target(right).to_string()
    };
    model.add_edge(Edge::unweighted("U", &left_target)).unwrap();
    model.add_edge(Edge::unweighted("U", &right_target)).unwrap();

    let roles = RoleAssignment::new("A", Some("M"), "Y")
        .with_covariates(covariates)
        .with_unmeasured(["U"]);
    let report = classify_bias(&model, &roles, &[]).expect("template model is valid");
    Some(CellVerdicts {
        total_biased: report.total.is_biased(),
        direct_biased: report.direct.is_biased(),
        indirect_biased: report.indirect.is_biased(),
    })
}

/// Derives the full confounder-placement grid from the separation criteria.
pub fn table1_grid() -> Table1Grid {
    let cells = POSITION_ORDER
        .iter()
        .map(|left| {
            POSITION_ORDER
                .iter()
                .map(|right| classify_cell(*left, *right))
                .collect()
        })
        .collect();
    Table1Grid { cells }
}

/// Convenience: collects distinct variable names into a conditioning set.
pub fn cond_set<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> BTreeSet<String> {
    names.into_iter().map(Into::into).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{confounding_scenario, Scenario};

    fn z<const N: usize>(names: [&str; N]) -> BTreeSet<String> {
        cond_set(names)
    }

    #[test]
    fn chain_is_blocked_by_its_middle() {
        let mut m = PathModel::new();
        for v in ["X", "Z", "W"] {
            m.add_variable(Variable::observed(v)).unwrap();
        }
        m.add_edge(Edge::unweighted("X", "Z")).unwrap();
        m.add_edge(Edge::unweighted("Z", "W")).unwrap();
        assert!(d_connected(&m, "X", "W", &z(["Z"])).unwrap().is_none());
        let open = d_connected(&m, "X", "W", &z([])).unwrap().unwrap();
        assert_eq!(open.render(), "X -> Z -> W");
    }

    #[test]
    fn conditioned_collider_opens_mediator_outcome_path() {
        let (m, _) = confounding_scenario(Scenario::MediatorOutcome);
        let witness = d_connected(&m, "A", "Y", &z(["C", "M"])).unwrap().unwrap();
        assert_eq!(witness.render(), "A -> M <- U -> Y");
        assert_eq!(
            witness.shapes,
            vec![NodeShape::Collider, NodeShape::Fork]
        );
        witness.verify_open(&m, &z(["C", "M"])).unwrap();
    }

    #[test]
    fn backdoor_blocked_by_covariate_under_mediator_outcome_confounding() {
        let (m, _) = confounding_scenario(Scenario::MediatorOutcome);
        assert!(backdoor_open(&m, "A", "Y", &z(["C"])).unwrap().is_none());
    }

    #[test]
    fn backdoor_witnesses_for_the_other_scenarios() {
        let (m, _) = confounding_scenario(Scenario::ExposureMediator);
        let w = backdoor_open(&m, "A", "Y", &z(["C"])).unwrap().unwrap();
        assert_eq!(w.render(), "A <- U -> M -> Y");

        let (m, _) = confounding_scenario(Scenario::ExposureOutcome);
        let w = backdoor_open(&m, "A", "Y", &z(["C"])).unwrap().unwrap();
        assert_eq!(w.render(), "A <- U -> Y");
    }

    #[test]
    fn collider_descendant_in_conditioning_set_opens_path() {
        // X -> S <- W with S -> D; conditioning on D opens the collider
        let mut m = PathModel::new();
        for v in ["X", "W", "S", "D"] {
            m.add_variable(Variable::observed(v)).unwrap();
        }
        for (f, t) in [("X", "S"), ("W", "S"), ("S", "D")] {
            m.add_edge(Edge::unweighted(f, t)).unwrap();
        }
        assert!(d_connected(&m, "X", "W", &z([])).unwrap().is_none());
        let open = d_connected(&m, "X", "W", &z(["D"])).unwrap().unwrap();
        assert_eq!(open.render(), "X -> S <- W");
    }

    #[test]
    fn edge_identified_in_plain_chain() {
        let mut m = PathModel::new();
        m.add_variable(Variable::observed("X")).unwrap();
        m.add_variable(Variable::observed("Y")).unwrap();
        m.add_edge(Edge::unweighted("X", "Y")).unwrap();
        let check = edge_identified(&m, &Edge::unweighted("X", "Y"), &z([])).unwrap();
        assert!(check.identified);
        assert!(check.witness.is_none());
    }

    #[test]
    fn exposure_mediator_confounding_breaks_covariate_mediator_edge() {
        let (m, _) = confounding_scenario(Scenario::ExposureMediator);
        let check = edge_identified(&m, &Edge::unweighted("C", "M"), &z(["A"])).unwrap();
        assert!(!check.identified);
        assert_eq!(check.witness.unwrap().render(), "C -> A <- U -> M");
    }

    #[test]
    fn mediator_outcome_confounding_breaks_covariate_outcome_edge() {
        let (m, _) = confounding_scenario(Scenario::MediatorOutcome);
        let check = edge_identified(&m, &Edge::unweighted("C", "Y"), &z(["A", "M"])).unwrap();
        assert!(!check.identified);
        // open through the conditioned collider M
        let witness = check.witness.unwrap();
        assert_eq!(witness.render(), "C -> M <- U -> Y");
        witness.verify_open(&m.without_edges(&[("C", "Y")]), &z(["A", "M"])).unwrap();
    }

    #[test]
    fn unknown_edge_is_rejected() {
        let (m, _) = confounding_scenario(Scenario::MediatorOutcome);
        assert!(matches!(
            edge_identified(&m, &Edge::unweighted("Y", "C"), &z([])),
            Err(GraphError::UnknownEdge(..))
        ));
    }

    #[test]
    fn conditioning_on_a_target_descendant_is_rejected() {
        // D descends from Y; adjusting for it is not a valid identification
        // query even though X and Y are separated in the reduced graph
        let mut m = PathModel::new();
        for v in ["X", "Y", "D"] {
            m.add_variable(Variable::observed(v)).unwrap();
        }
        m.add_edge(Edge::unweighted("X", "Y")).unwrap();
        m.add_edge(Edge::unweighted("Y", "D")).unwrap();
        assert!(matches!(
            edge_identified(&m, &Edge::unweighted("X", "Y"), &z(["D"])),
            Err(GraphError::DescendantConditioning { .. })
        ));
    }

    #[test]
    fn covariates_downstream_of_the_exposure_are_rejected() {
        let (mut m, mut roles) = confounding_scenario(Scenario::MediatorOutcome);
        m.add_variable(Variable::observed("S")).unwrap();
        m.add_edge(Edge::new("A", "S", 0.5)).unwrap();
        roles.covariates.insert("S".to_string());
        assert!(matches!(
            classify_bias(&m, &roles, &[]),
            Err(GraphError::InvalidRoles(_))
        ));
    }

    #[test]
    fn classify_bias_matches_the_three_scenarios() {
        let (m, roles) = confounding_scenario(Scenario::ExposureMediator);
        let report = classify_bias(&m, &roles, &[]).unwrap();
        assert!(report.total.is_biased());
        assert!(!report.direct.is_biased());
        assert!(report.indirect.is_biased());

        let (m, roles) = confounding_scenario(Scenario::ExposureOutcome);
        let report = classify_bias(&m, &roles, &[]).unwrap();
        assert!(report.total.is_biased());
        assert!(report.direct.is_biased());
        assert!(!report.indirect.is_biased());

        let (m, roles) = confounding_scenario(Scenario::MediatorOutcome);
        let report = classify_bias(&m, &roles, &[]).unwrap();
        assert!(!report.total.is_biased());
        assert!(report.direct.is_biased());
        assert!(report.indirect.is_biased());
    }

    #[test]
    fn exposure_mediator_with_no_mediator_outcome_path_is_clean() {
        let (m, roles) = confounding_scenario(Scenario::ExposureMediator);
        let report = classify_bias(&m, &roles, &[("M", "Y")]).unwrap();
        assert!(!report.total.is_biased());
        assert!(!report.direct.is_biased());
        assert!(!report.indirect.is_biased());
    }

    #[test]
    fn absent_edges_outside_effect_paths_are_rejected() {
        let (m, roles) = confounding_scenario(Scenario::MediatorOutcome);
        assert!(matches!(
            classify_bias(&m, &roles, &[("C", "A")]),
            Err(GraphError::InvalidAbsentEdge(..))
        ));
    }

    #[test]
    fn biased_edge_lists_per_scenario() {
        let (m, roles) = confounding_scenario(Scenario::MediatorOutcome);
        let edges: Vec<(String, String)> = biased_edges(&m, &roles)
            .unwrap()
            .into_iter()
            .map(|b| (b.edge.from, b.edge.to))
            .collect();
        assert!(edges.contains(&("C".into(), "Y".into())));
        assert!(edges.contains(&("A".into(), "Y".into())));
        assert!(edges.contains(&("M".into(), "Y".into())));
        assert_eq!(edges.len(), 3);

        let (m, roles) = confounding_scenario(Scenario::ExposureMediator);
        let edges: Vec<(String, String)> = biased_edges(&m, &roles)
            .unwrap()
            .into_iter()
            .map(|b| (b.edge.from, b.edge.to))
            .collect();
        assert!(edges.contains(&("C".into(), "M".into())));
        assert!(edges.contains(&("A".into(), "M".into())));
        assert_eq!(edges.len(), 2);
    }

    #[test]
    fn no_confounder_means_no_biased_edges() {
        let (m, roles) = confounding_scenario(Scenario::MediatorOutcome);
        let clean = m.without_edges(&[("U", "M"), ("U", "Y")]);
        assert!(biased_edges(&clean, &roles).unwrap().is_empty());
    }

    #[test]
    fn grid_matches_expected_pattern() {
        let grid = table1_grid();
        assert_eq!(grid, Table1Grid::expected());
    }

    #[test]
    fn grid_blank_cells_are_the_non_constructible_ones() {
        let grid = table1_grid();
        assert!(grid.cell(PositionClass::Exposure, PositionClass::PreExposure).is_none());
        assert!(grid.cell(PositionClass::Exposure, PositionClass::Exposure).is_none());
        assert!(grid.cell(PositionClass::PreExposure, PositionClass::PreExposure).is_some());
        assert!(grid.cell(PositionClass::PostOutcome, PositionClass::PostOutcome).is_some());
    }

    #[test]
    fn witnesses_replay_as_open() {
        let (m, roles) = confounding_scenario(Scenario::ExposureMediator);
        let report = classify_bias(&m, &roles, &[]).unwrap();
        let witness = report.total.witness().unwrap();
        witness.verify_open(&m, &z(["C"])).unwrap();
    }
}
