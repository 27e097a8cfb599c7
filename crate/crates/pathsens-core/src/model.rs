//! Path-model data structures: variables, directed edges, error variances,
//! and the role assignment that designates exposure, mediator, outcome,
//! covariates, and the unmeasured set.
//!
//! A `PathModel` is a recursive (acyclic) linear structural equation model.
//! Every variable is determined by a linear combination of its parents plus
//! an independent error term. Edge coefficients are optional: graph-level
//! queries need topology only, while covariance and simulation work requires
//! a fully annotated model.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default error variance for variables without an explicit `errvar` entry.
pub const DEFAULT_ERROR_VARIANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Observed,
    Latent,
}

/// A named model variable. Latent variables are never measured; observed
/// variables may be declared unmeasured to mark an omitted confounder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    pub measured: bool,
}

impl Variable {
    pub fn observed(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VariableKind::Observed,
            measured: true,
        }
    }

    /// An observed-in-principle variable on which no data was collected.
    pub fn unmeasured(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VariableKind::Observed,
            measured: false,
        }
    }

    pub fn latent(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VariableKind::Latent,
            measured: false,
        }
    }
}

/// A directed causal path with an optional coefficient (in the child
/// variable's units; standard-deviation units for standardized models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub coefficient: Option<f64>,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, coefficient: f64) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            coefficient: Some(coefficient),
        }
    }

    pub fn unweighted(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            coefficient: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("duplicate variable: {0}")]
    DuplicateVariable(String),
    #[error("invalid variable name: {0:?}")]
    InvalidName(String),
    #[error("duplicate edge: {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("self loop: {0}")]
    SelfLoop(String),
    #[error("cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("model is invalid: {0}")]
    Invalid(String),
}

/// A single invariant violation found by [`PathModel::validate`].
/// Violations are data, not failures: a report names every offending
/// element together with the rule it breaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    Cycle { path: Vec<String> },
    UnknownEndpoint { from: String, to: String, name: String },
    NonpositiveErrorVariance { name: String },
    LatentMarkedMeasured { name: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle { path } => write!(f, "cycle: {}", path.join("->")),
            Violation::UnknownEndpoint { from, to, name } => {
                write!(f, "edge {from} -> {to} references undeclared variable: {name}")
            }
            Violation::NonpositiveErrorVariance { name } => {
                write!(f, "nonpositive error variance: {name}")
            }
            Violation::LatentMarkedMeasured { name } => {
                write!(f, "latent variable marked measured: {name}")
            }
        }
    }
}

/// A recursive linear path model: a DAG of variables with directed edges,
/// optional path coefficients, and per-variable error variances.
///
/// Immutable once built; all queries are pure and safe to run concurrently.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathModel {
    variables: Vec<Variable>,
    edges: Vec<Edge>,
    /// Explicit entries only; everything else defaults to 1.0.
    error_variances: BTreeMap<String, f64>,
}

impl PathModel {
    pub fn new() -> Self {
        PathModel::default()
    }

    pub fn add_variable(&mut self, variable: Variable) -> Result<(), ModelError> {
        let name = variable.name.as_str();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ModelError::InvalidName(name.to_string()));
        }
        if self.variables.iter().any(|v| v.name == variable.name) {
            return Err(ModelError::DuplicateVariable(variable.name));
        }
        self.variables.push(variable);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), ModelError> {
        if edge.from == edge.to {
            return Err(ModelError::SelfLoop(edge.from));
        }
        if self.edge(&edge.from, &edge.to).is_some() {
            return Err(ModelError::DuplicateEdge(edge.from, edge.to));
        }
        self.edges.push(edge);
        Ok(())
    }

    /// Sets the error variance of `name`. The value is recorded as given;
    /// nonpositive entries are reported by [`validate`](Self::validate).
    pub fn set_error_variance(&mut self, name: impl Into<String>, value: f64) {
        self.error_variances.insert(name.into(), value);
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn is_measured(&self, name: &str) -> bool {
        self.variable(name).map(|v| v.measured).unwrap_or(false)
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn coefficient(&self, from: &str, to: &str) -> Option<f64> {
        self.edge(from, to).and_then(|e| e.coefficient)
    }

    /// Parents of `name` in variable declaration order.
    pub fn parents_of(&self, name: &str) -> Vec<&str> {
        let mut parents: Vec<&str> = self
            .edges
            .iter()
            .filter(|e| e.to == name)
            .map(|e| e.from.as_str())
            .collect();
        parents.sort_by_key(|p| self.index_of(p));
        parents
    }

    /// Children of `name` in variable declaration order.
    pub fn children_of(&self, name: &str) -> Vec<&str> {
        let mut children: Vec<&str> = self
            .edges
            .iter()
            .filter(|e| e.from == name)
            .map(|e| e.to.as_str())
            .collect();
        children.sort_by_key(|c| self.index_of(c));
        children
    }

    /// Effective error variance: the explicit entry or the default 1.0.
    pub fn error_variance(&self, name: &str) -> f64 {
        self.error_variances
            .get(name)
            .copied()
            .unwrap_or(DEFAULT_ERROR_VARIANCE)
    }

    /// Explicitly set error variances (entries not covered by the default).
    pub fn explicit_error_variances(&self) -> &BTreeMap<String, f64> {
        &self.error_variances
    }

    pub fn measured_variables(&self) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.measured)
            .map(|v| v.name.as_str())
            .collect()
    }

    /// Checks every model invariant and reports all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for v in &self.variables {
            if v.kind == VariableKind::Latent && v.measured {
                violations.push(Violation::LatentMarkedMeasured {
                    name: v.name.clone(),
                });
            }
        }
        for e in &self.edges {
            for endpoint in [&e.from, &e.to] {
                if !self.contains(endpoint) {
                    violations.push(Violation::UnknownEndpoint {
                        from: e.from.clone(),
                        to: e.to.clone(),
                        name: endpoint.clone(),
                    });
                }
            }
        }
        for (name, value) in &self.error_variances {
            if !(*value > 0.0) {
                violations.push(Violation::NonpositiveErrorVariance { name: name.clone() });
            }
        }
        if let Some(path) = self.find_cycle() {
            violations.push(Violation::Cycle { path });
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Topological order of all variables, deterministic: among variables
    /// whose parents are all placed, the earliest-declared one comes next.
    pub fn topological_order(&self) -> Result<Vec<String>, ModelError> {
        let n = self.variables.len();
        let index: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            let (Some(&f), Some(&t)) = (index.get(e.from.as_str()), index.get(e.to.as_str()))
            else {
                return Err(ModelError::UnknownVariable(
                    if index.contains_key(e.from.as_str()) { &e.to } else { &e.from }.clone(),
                ));
            };
            indegree[t] += 1;
            children[f].push(t);
        }
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n).find(|&i| !placed[i] && indegree[i] == 0);
            let Some(i) = next else {
                let path = self.find_cycle().unwrap_or_default();
                return Err(ModelError::Cycle(path));
            };
            placed[i] = true;
            order.push(self.variables[i].name.clone());
            for &c in &children[i] {
                indegree[c] -= 1;
            }
        }
        Ok(order)
    }

    /// Strict descendants of `name` (excluding `name` itself).
    pub fn descendants(&self, name: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = self.children_of(name);
        while let Some(v) = stack.pop() {
            if seen.insert(v.to_string()) {
                stack.extend(self.children_of(v));
            }
        }
        seen
    }

    pub fn is_descendant(&self, ancestor: &str, v: &str) -> bool {
        self.descendants(ancestor).contains(v)
    }

    /// A copy of the model with the listed edges removed. Edges absent from
    /// the model are ignored.
    pub fn without_edges(&self, removed: &[(&str, &str)]) -> PathModel {
        let mut copy = self.clone();
        copy.edges
            .retain(|e| !removed.iter().any(|(f, t)| e.from == *f && e.to == *t));
        copy
    }

    /// Finds one directed cycle, reported with the starting vertex repeated
    /// at the end, e.g. `["A", "M", "A"]`.
    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Gray,
            Black,
        }
        let n = self.variables.len();
        let mut marks = vec![Mark::White; n];

        fn visit(
            model: &PathModel,
            i: usize,
            marks: &mut [Mark],
            trail: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            marks[i] = Mark::Gray;
            trail.push(i);
            for child in model.children_of(&model.variables[i].name) {
                let Some(c) = model.index_of(child) else { continue };
                match marks[c] {
                    Mark::Gray => {
                        let start = trail.iter().position(|&t| t == c).unwrap();
                        let mut cycle: Vec<usize> = trail[start..].to_vec();
                        cycle.push(c);
                        return Some(cycle);
                    }
                    Mark::White => {
                        if let Some(cycle) = visit(model, c, marks, trail) {
                            return Some(cycle);
                        }
                    }
                    Mark::Black => {}
                }
            }
            trail.pop();
            marks[i] = Mark::Black;
            None
        }

        let mut trail = Vec::new();
        for i in 0..n {
            if marks[i] == Mark::White {
                if let Some(cycle) = visit(self, i, &mut marks, &mut trail) {
                    return Some(
                        cycle
                            .into_iter()
                            .map(|i| self.variables[i].name.clone())
                            .collect(),
                    );
                }
            }
        }
        None
    }
}

impl PartialEq for PathModel {
    /// Structural equality: same variable sequence, same edge set (order
    /// insensitive), same effective error variances.
    fn eq(&self, other: &Self) -> bool {
        if self.variables != other.variables {
            return false;
        }
        let key = |e: &Edge| (e.from.clone(), e.to.clone());
        let mut a: Vec<&Edge> = self.edges.iter().collect();
        let mut b: Vec<&Edge> = other.edges.iter().collect();
        a.sort_by_key(|e| key(e));
        b.sort_by_key(|e| key(e));
        if a != b {
            return false;
        }
        self.variables
            .iter()
            .all(|v| self.error_variance(&v.name) == other.error_variance(&v.name))
    }
}

/// Designation of the exposure, optional mediator, outcome, covariate set,
/// and unmeasured set within a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub exposure: String,
    pub mediator: Option<String>,
    pub outcome: String,
    pub covariates: BTreeSet<String>,
    pub unmeasured: BTreeSet<String>,
}

impl RoleAssignment {
    pub fn new(
        exposure: impl Into<String>,
        mediator: Option<&str>,
        outcome: impl Into<String>,
    ) -> Self {
        RoleAssignment {
            exposure: exposure.into(),
            mediator: mediator.map(str::to_string),
            outcome: outcome.into(),
            covariates: BTreeSet::new(),
            unmeasured: BTreeSet::new(),
        }
    }

    pub fn with_covariates<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.covariates = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_unmeasured<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.unmeasured = names.into_iter().map(Into::into).collect();
        self
    }

    /// Checks the role invariants against `model`; returns human-readable
    /// violation messages.
    pub fn validate(&self, model: &PathModel) -> Vec<String> {
        let mut problems = Vec::new();
        let mut named: Vec<&str> = vec![&self.exposure, &self.outcome];
        if let Some(m) = &self.mediator {
            named.push(m);
        }
        for (i, a) in named.iter().enumerate() {
            for b in named.iter().skip(i + 1) {
                if a == b {
                    problems.push(format!("role variables must be distinct: {a}"));
                }
            }
        }
        for name in named
            .iter()
            .copied()
            .chain(self.covariates.iter().map(String::as_str))
            .chain(self.unmeasured.iter().map(String::as_str))
        {
            if !model.contains(name) {
                problems.push(format!("role references undeclared variable: {name}"));
            }
        }
        for name in &named {
            if model.contains(name) && !model.is_measured(name) {
                problems.push(format!("exposure/mediator/outcome must be measured: {name}"));
            }
        }
        for name in &self.covariates {
            if model.contains(name) && !model.is_measured(name) {
                problems.push(format!("covariate must be measured: {name}"));
            }
        }
        for name in &self.unmeasured {
            if model.contains(name) && model.is_measured(name) {
                problems.push(format!("unmeasured-set member is measured: {name}"));
            }
        }
        problems
    }
}

/// Where a variable sits relative to the exposure/mediator/outcome triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionClass {
    PreExposure,
    Exposure,
    Mediator,
    Outcome,
    PostOutcome,
    Other,
}

impl std::fmt::Display for PositionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PositionClass::PreExposure => "pre-exposure",
            PositionClass::Exposure => "exposure",
            PositionClass::Mediator => "mediator",
            PositionClass::Outcome => "outcome",
            PositionClass::PostOutcome => "post-outcome",
            PositionClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Classifies `name` by its position relative to the assigned roles.
///
/// A variable strictly inside a directed exposure-to-mediator path counts as
/// a mediator; strictly inside a mediator-to-outcome path counts as an
/// outcome; strict descendants of the outcome are post-outcome; remaining
/// non-descendants of the exposure are pre-exposure. Descendants of the
/// exposure that feed neither the mediator nor the outcome fall into
/// `Other` and are handled by the generic separation machinery downstream.
pub fn position_class(
    model: &PathModel,
    roles: &RoleAssignment,
    name: &str,
) -> Result<PositionClass, ModelError> {
    if !model.contains(name) {
        return Err(ModelError::UnknownVariable(name.to_string()));
    }
    if name == roles.exposure {
        return Ok(PositionClass::Exposure);
    }
    if let Some(mediator) = &roles.mediator {
        if name == mediator
            || (model.is_descendant(&roles.exposure, name) && model.is_descendant(name, mediator))
        {
            return Ok(PositionClass::Mediator);
        }
    }
    if name == roles.outcome {
        return Ok(PositionClass::Outcome);
    }
    if let Some(mediator) = &roles.mediator {
        if model.is_descendant(mediator, name) && model.is_descendant(name, &roles.outcome) {
            return Ok(PositionClass::Outcome);
        }
    }
    if model.is_descendant(&roles.outcome, name) {
        return Ok(PositionClass::PostOutcome);
    }
    if !model.is_descendant(&roles.exposure, name) {
        return Ok(PositionClass::PreExposure);
    }
    Ok(PositionClass::Other)
}
