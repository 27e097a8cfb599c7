//! Model-implied covariance matrix and population regression coefficients:
//! the analytic oracle for every bias magnitude.
//!
//! For a fully annotated recursive model with coefficient matrix `B`
//! (strictly lower triangular in topological order) and error-variance
//! diagonal `Psi`, the implied covariance is
//! `Sigma = (I - B)^-1 Psi (I - B)^-T`. The inverse is computed by forward
//! substitution, which is exact up to floating point and O(p^2) per column
//! at these sizes. The probability limit of any least-squares fit follows
//! from `Sigma` by a normal-equations solve, and partial correlations come
//! from a Schur complement.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::model::{PathModel, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarianceError {
    #[error("edge {0} -> {1} has no coefficient")]
    MissingCoefficient(String, String),
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("singular covariance block for {0}")]
    Singular(String),
    #[error("{0}")]
    InvalidQuery(String),
}

/// Path coefficients assembled over variables in topological order;
/// entry (i, j) is the coefficient of the edge from variable j to
/// variable i, zero where no edge exists.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub order: Vec<String>,
    pub matrix: DMatrix<f64>,
}

pub fn coefficient_matrix(model: &PathModel) -> Result<CoefficientMatrix, CovarianceError> {
    let violations: Vec<Violation> = model.validate();
    if let Some(v) = violations.first() {
        return Err(CovarianceError::InvalidModel(v.to_string()));
    }
    let order = model
        .topological_order()
        .map_err(|e| CovarianceError::InvalidModel(e.to_string()))?;
    let index: HashMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let p = order.len();
    let mut matrix = DMatrix::zeros(p, p);
    for edge in model.edges() {
        let coefficient = edge.coefficient.ok_or_else(|| {
            CovarianceError::MissingCoefficient(edge.from.clone(), edge.to.clone())
        })?;
        let i = index[edge.to.as_str()];
        let j = index[edge.from.as_str()];
        matrix[(i, j)] = coefficient;
    }
    Ok(CoefficientMatrix { order, matrix })
}

/// The implied covariance matrix of all model variables, indexed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedCovariance {
    order: Vec<String>,
    index: HashMap<String, usize>,
    sigma: DMatrix<f64>,
}

impl ImpliedCovariance {
    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn position(&self, name: &str) -> Result<usize, CovarianceError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| CovarianceError::UnknownVariable(name.to_string()))
    }

    pub fn covariance(&self, a: &str, b: &str) -> Result<f64, CovarianceError> {
        Ok(self.sigma[(self.position(a)?, self.position(b)?)])
    }

    pub fn variance(&self, a: &str) -> Result<f64, CovarianceError> {
        self.covariance(a, a)
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.sigma[(rows[i], cols[j])]
        })
    }
}

/// Computes `Sigma = (I - B)^-1 Psi (I - B)^-T` for a fully annotated model.
/// Latent and unmeasured variables participate like any other variable.
pub fn implied_covariance(model: &PathModel) -> Result<ImpliedCovariance, CovarianceError> {
    let CoefficientMatrix { order, matrix: b } = coefficient_matrix(model)?;
    let p = order.len();
    // T = (I - B)^-1 by forward substitution: T[i][j] = d_ij + sum_k B[i][k] T[k][j],
    // with B strictly lower triangular so each row depends only on earlier rows.
    let mut t = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in 0..=i {
            let mut sum = if i == j { 1.0 } else { 0.0 };
            for k in j..i {
                sum += b[(i, k)] * t[(k, j)];
            }
            t[(i, j)] = sum;
        }
    }
    let psi = DVector::from_iterator(p, order.iter().map(|name| model.error_variance(name)));
    let mut sigma = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in 0..p {
                sum += t[(i, k)] * psi[k] * t[(j, k)];
            }
            sigma[(i, j)] = sum;
            sigma[(j, i)] = sum;
        }
    }
    let index = order
        .iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), i))
        .collect();
    Ok(ImpliedCovariance { order, index, sigma })
}

/// Probability limit of the least-squares coefficients from regressing
/// `target` on `regressors`: solves `Sigma_SS beta = Sigma_S,target`.
pub fn population_regression(
    sigma: &ImpliedCovariance,
    target: &str,
    regressors: &[&str],
) -> Result<Vec<f64>, CovarianceError> {
    let t = sigma.position(target)?;
    let s: Vec<usize> = regressors
        .iter()
        .map(|r| {
            if *r == target {
                Err(CovarianceError::InvalidQuery(format!(
                    "target {target} cannot regress on itself"
                )))
            } else {
                sigma.position(r)
            }
        })
        .collect::<Result<_, _>>()?;
    let gram = sigma.submatrix(&s, &s);
    let moment = DVector::from_iterator(s.len(), s.iter().map(|&i| sigma.sigma[(i, t)]));
    let chol = Cholesky::new(gram).ok_or_else(|| {
        CovarianceError::Singular(format!("regressors of {target}: {regressors:?}"))
    })?;
    Ok(chol.solve(&moment).iter().copied().collect())
}

/// Partial correlation of `x` and `y` given `z`, via the Schur complement
/// of the conditioning block.
pub fn partial_correlation(
    sigma: &ImpliedCovariance,
    x: &str,
    y: &str,
    z: &[&str],
) -> Result<f64, CovarianceError> {
    if x == y {
        return Err(CovarianceError::InvalidQuery(format!("{x} = {y}")));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(CovarianceError::InvalidQuery(format!(
            "{x} or {y} is in the conditioning set"
        )));
    }
    let xi = sigma.position(x)?;
    let yi = sigma.position(y)?;
    let zi: Vec<usize> = z.iter().map(|n| sigma.position(n)).collect::<Result<_, _>>()?;

    let pair = [xi, yi];
    let mut cond = sigma.submatrix(&pair, &pair);
    if !zi.is_empty() {
        let szz = sigma.submatrix(&zi, &zi);
        let szp = sigma.submatrix(&zi, &pair);
        let chol = Cholesky::new(szz)
            .ok_or_else(|| CovarianceError::Singular(format!("conditioning set {z:?}")))?;
        let solved = chol.solve(&szp);
        cond -= szp.transpose() * solved;
    }
    let denom = (cond[(0, 0)] * cond[(1, 1)]).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return Err(CovarianceError::Singular(format!(
            "degenerate conditional variance of {x} or {y}"
        )));
    }
    Ok(cond[(0, 1)] / denom)
}

/// Asymptotic bias of every coefficient in a fitted specification: the
/// population coefficient minus the true edge coefficient (zero for
/// regressors without an edge into the target).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeBias {
    pub from: String,
    pub to: String,
    pub population: f64,
    pub truth: f64,
    pub bias: f64,
}

pub fn asymptotic_edge_bias(
    model: &PathModel,
    fitted_spec: &[(String, Vec<String>)],
) -> Result<Vec<EdgeBias>, CovarianceError> {
    let sigma = implied_covariance(model)?;
    let mut rows = Vec::new();
    for (target, regressors) in fitted_spec {
        let names: Vec<&str> = regressors.iter().map(String::as_str).collect();
        let population = population_regression(&sigma, target, &names)?;
        for (regressor, pop) in regressors.iter().zip(population) {
            let truth = model.coefficient(regressor, target).unwrap_or(0.0);
            rows.push(EdgeBias {
                from: regressor.clone(),
                to: target.clone(),
                population: pop,
                truth,
                bias: pop - truth,
            });
        }
    }
    Ok(rows)
}
