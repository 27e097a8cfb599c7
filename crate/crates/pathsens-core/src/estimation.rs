//! Per-equation ordinary least squares for recursive observed-variable
//! models, plus the tabular dataset type and its CSV form.
//!
//! Each endogenous variable is regressed on its parents with an intercept.
//! Standard errors use the classical homoskedastic formula and intervals
//! are normal-approximation with a fixed 1.96 multiplier; at the sample
//! sizes this tool targets the difference from t quantiles is far below
//! the reported precision.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::model::{PathModel, VariableKind};

/// Half-width multiplier for 95% confidence intervals.
pub const CI_MULTIPLIER: f64 = 1.96;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("empty dataset")]
    Empty,
    #[error("duplicate column header: {0}")]
    DuplicateHeader(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    BadCell { row: usize, column: String, value: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("constant column cannot be standardized: {0}")]
    ConstantColumn(String),
    #[error("columns must all have the same length")]
    UnequalColumns,
    #[error("need more rows than regressors: n = {n}, p = {p}")]
    TooFewRows { n: usize, p: usize },
    #[error("singular design matrix for equation of {0}")]
    SingularDesign(String),
    #[error(
        "variable {0} is latent or unmeasured; least squares needs fully measured data. \
         Use the implied-covariance oracle for population quantities or the sensitivity \
         engine for corrections."
    )]
    UnsupportedVariable(String),
}

/// A rectangular numeric dataset with named columns and no missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, EstimationError> {
        if names.is_empty() || columns.is_empty() {
            return Err(EstimationError::Empty);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(EstimationError::DuplicateHeader(name.clone()));
            }
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(EstimationError::UnequalColumns);
        }
        Ok(Dataset { names, columns })
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }

    /// Copy of the dataset without the listed columns.
    pub fn drop_columns(&self, drop: &[&str]) -> Result<Dataset, EstimationError> {
        let kept: Vec<usize> = (0..self.names.len())
            .filter(|&i| !drop.contains(&self.names[i].as_str()))
            .collect();
        Dataset::new(
            kept.iter().map(|&i| self.names[i].clone()).collect(),
            kept.iter().map(|&i| self.columns[i].clone()).collect(),
        )
    }

    /// Reads the CSV form: a header of variable names then numeric rows.
    pub fn from_csv_reader(reader: impl Read) -> Result<Dataset, EstimationError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let names: Vec<String> = headers.iter().map(str::to_string).collect();
        if names.is_empty() || names.iter().all(|h| h.is_empty()) {
            return Err(EstimationError::Empty);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(EstimationError::DuplicateHeader(name.clone()));
            }
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row_index, record) in csv_reader.records().enumerate() {
            let record = record?;
            let row = row_index + 1;
            if record.len() != names.len() {
                return Err(EstimationError::RaggedRow {
                    row,
                    found: record.len(),
                    expected: names.len(),
                });
            }
            for (j, field) in record.iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| EstimationError::BadCell {
                    row,
                    column: names[j].clone(),
                    value: field.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(EstimationError::BadCell {
                        row,
                        column: names[j].clone(),
                        value: field.to_string(),
                    });
                }
                columns[j].push(value);
            }
        }
        if columns[0].is_empty() {
            return Err(EstimationError::Empty);
        }
        Dataset::new(names, columns)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Dataset, EstimationError> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn from_csv_bytes(bytes: &[u8]) -> Result<Dataset, EstimationError> {
        Dataset::from_csv_reader(bytes)
    }

    /// Writes the CSV form with shortest round-trip decimal values.
    pub fn to_csv(&self, mut writer: impl Write) -> std::io::Result<()> {
        writeln!(writer, "{}", self.names.join(","))?;
        let mut line = String::new();
        for row in 0..self.n() {
            line.clear();
            for (j, column) in self.columns.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&column[row].to_string());
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buffer = Vec::new();
        self.to_csv(&mut buffer).expect("writing to a Vec cannot fail");
        String::from_utf8(buffer).expect("CSV output is UTF-8")
    }

    /// Z-scores every column with the sample mean and the (n-1)-denominator
    /// sample standard deviation.
    pub fn standardize(&self) -> Result<Dataset, EstimationError> {
        let n = self.n();
        if n < 2 {
            return Err(EstimationError::TooFewRows { n, p: 1 });
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (name, column) in self.names.iter().zip(&self.columns) {
            let mean = column.iter().sum::<f64>() / n as f64;
            let ss: f64 = column.iter().map(|x| (x - mean).powi(2)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            if sd == 0.0 {
                return Err(EstimationError::ConstantColumn(name.clone()));
            }
            columns.push(column.iter().map(|x| (x - mean) / sd).collect());
        }
        Dataset::new(self.names.clone(), columns)
    }
}

/// One coefficient of a fitted equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Coefficient {
    fn from_estimate(estimate: f64, std_error: f64) -> Self {
        Coefficient {
            estimate,
            std_error,
            ci_low: estimate - CI_MULTIPLIER * std_error,
            ci_high: estimate + CI_MULTIPLIER * std_error,
        }
    }
}

/// Least-squares fit of one equation: `target ~ intercept + regressors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationFit {
    pub target: String,
    pub regressors: Vec<String>,
    pub intercept: Coefficient,
    pub coefficients: Vec<Coefficient>,
    pub residual_variance: f64,
    pub n: usize,
}

impl EquationFit {
    pub fn coefficient(&self, regressor: &str) -> Option<&Coefficient> {
        let i = self.regressors.iter().position(|r| r == regressor)?;
        Some(&self.coefficients[i])
    }
}

/// Per-equation fits for every endogenous variable of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub equations: Vec<EquationFit>,
    pub n: usize,
}

impl FitResult {
    pub fn equation(&self, target: &str) -> Option<&EquationFit> {
        self.equations.iter().find(|e| e.target == target)
    }
}

/// Ordinary least squares of `target` on `regressors` plus an intercept,
/// solved from the normal equations with classical standard errors.
pub fn fit_equation(
    data: &Dataset,
    target: &str,
    regressors: &[&str],
) -> Result<EquationFit, EstimationError> {
    let y = data
        .column(target)
        .ok_or_else(|| EstimationError::MissingColumn(target.to_string()))?;
    let mut x_columns: Vec<&[f64]> = Vec::with_capacity(regressors.len());
    for r in regressors {
        x_columns.push(
            data.column(r)
                .ok_or_else(|| EstimationError::MissingColumn(r.to_string()))?,
        );
    }
    let n = y.len();
    let p = regressors.len() + 1; // intercept first
    if n <= p {
        return Err(EstimationError::TooFewRows { n, p });
    }

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for row in 0..n {
        let mut design = Vec::with_capacity(p);
        design.push(1.0);
        design.extend(x_columns.iter().map(|c| c[row]));
        for i in 0..p {
            xty[i] += design[i] * y[row];
            for j in 0..=i {
                xtx[(i, j)] += design[i] * design[j];
            }
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }

    let chol = Cholesky::new(xtx)
        .ok_or_else(|| EstimationError::SingularDesign(target.to_string()))?;
    let beta = chol.solve(&xty);
    let xtx_inv = chol.inverse();

    let mut rss = 0.0;
    for row in 0..n {
        let mut fitted = beta[0];
        for (j, column) in x_columns.iter().enumerate() {
            fitted += beta[j + 1] * column[row];
        }
        let residual = y[row] - fitted;
        rss += residual * residual;
    }
    let dof = (n - p) as f64;
    let residual_variance = rss / dof;

    let standard_error = |j: usize| (residual_variance * xtx_inv[(j, j)]).max(0.0).sqrt();
    let intercept = Coefficient::from_estimate(beta[0], standard_error(0));
    let coefficients = (0..regressors.len())
        .map(|j| Coefficient::from_estimate(beta[j + 1], standard_error(j + 1)))
        .collect();

    Ok(EquationFit {
        target: target.to_string(),
        regressors: regressors.iter().map(|r| r.to_string()).collect(),
        intercept,
        coefficients,
        residual_variance,
        n,
    })
}

/// Fits every equation of a recursive observed-variable model: each
/// variable with at least one parent is regressed on its parents. Latent
/// or unmeasured variables are rejected.
pub fn fit_sem(model: &PathModel, data: &Dataset) -> Result<FitResult, EstimationError> {
    for v in model.variables() {
        if v.kind == VariableKind::Latent || !v.measured {
            return Err(EstimationError::UnsupportedVariable(v.name.clone()));
        }
        if data.column(&v.name).is_none() {
            return Err(EstimationError::MissingColumn(v.name.clone()));
        }
    }
    let mut equations = Vec::new();
    for v in model.variables() {
        let parents = model.parents_of(&v.name);
        if parents.is_empty() {
            continue;
        }
        equations.push(fit_equation(data, &v.name, &parents)?);
    }
    Ok(FitResult {
        equations,
        n: data.n(),
    })
}
