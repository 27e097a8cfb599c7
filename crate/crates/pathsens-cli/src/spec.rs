//! Parsers for flag values: edge specs, fit formulas, labeled fitted
//! specifications, and numeric ranges.

use pathsens_core::sensitivity::RangeSpec;
use pathsens_core::simulation::FittedSpec;

use crate::CliError;

/// `A->Y` (whitespace around the arrow tolerated).
pub fn parse_edge_spec(text: &str) -> Result<(String, String), CliError> {
    let Some((from, to)) = text.split_once("->") else {
        return Err(CliError::usage(format!(
            "edge spec {text:?} must look like A->Y"
        )));
    };
    let (from, to) = (from.trim(), to.trim());
    if from.is_empty() || to.is_empty() {
        return Err(CliError::usage(format!(
            "edge spec {text:?} must name both endpoints"
        )));
    }
    Ok((from.to_string(), to.to_string()))
}

/// `Y ~ X1 + X2 + X3`: one target, one or more distinct regressors.
pub fn parse_formula(text: &str) -> Result<(String, Vec<String>), CliError> {
    let Some((target, rhs)) = text.split_once('~') else {
        return Err(CliError::usage(format!(
            "formula {text:?} must look like \"Y ~ X1 + X2\""
        )));
    };
    let target = target.trim();
    if target.is_empty() || target.contains(char::is_whitespace) {
        return Err(CliError::usage(format!("bad formula target in {text:?}")));
    }
    let mut regressors = Vec::new();
    for part in rhs.split('+') {
        let name = part.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(CliError::usage(format!("bad regressor in formula {text:?}")));
        }
        if regressors.iter().any(|r| r == name) {
            return Err(CliError::usage(format!(
                "duplicate regressor {name} in formula {text:?}"
            )));
        }
        if name == target {
            return Err(CliError::usage(format!(
                "target {target} cannot appear as a regressor"
            )));
        }
        regressors.push(name.to_string());
    }
    Ok((target.to_string(), regressors))
}

/// `label: Y ~ C + A; M ~ C` — a labeled set of formulas.
pub fn parse_fit_spec(text: &str) -> Result<FittedSpec, CliError> {
    let Some((label, formulas)) = text.split_once(':') else {
        return Err(CliError::usage(format!(
            "fit spec {text:?} must look like \"label: Y ~ C + A; M ~ C\""
        )));
    };
    let label = label.trim();
    if label.is_empty() {
        return Err(CliError::usage(format!("fit spec {text:?} needs a label")));
    }
    let mut equations = Vec::new();
    for formula in formulas.split(';') {
        if formula.trim().is_empty() {
            continue;
        }
        equations.push(parse_formula(formula)?);
    }
    if equations.is_empty() {
        return Err(CliError::usage(format!(
            "fit spec {text:?} contains no equations"
        )));
    }
    Ok(FittedSpec::new(label, equations))
}

/// `lo:hi:step`, all three real.
pub fn parse_range(text: &str) -> Result<RangeSpec, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "range {text:?} must look like lo:hi:step"
        )));
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| {
            CliError::usage(format!("range {text:?} has a non-numeric component"))
        })?;
    }
    Ok(RangeSpec::new(values[0], values[1], values[2]))
}
