//! Total, direct, and indirect effects from an annotated model or a fitted
//! result, with confidence intervals.
//!
//! The total effect is the sum over all directed exposure-to-outcome paths
//! of the product of edge coefficients; the direct effect is the single
//! exposure-outcome edge coefficient (zero when absent); the indirect
//! effect is their difference, which in a single-mediator model equals the
//! product of the two factor coefficients.
//!
//! Estimates carry compensation terms so that sensitivity corrections can
//! be inverted exactly: shifting an estimate by `b` and then by `-b`
//! restores the original values bit for bit, and interval widths survive
//! any chain of shifts unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{FitResult, CI_MULTIPLIER};
use crate::model::{PathModel, RoleAssignment};

/// Tolerance for the total = direct + indirect consistency check on
/// externally supplied triples.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectsError {
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("edge {0} -> {1} has no coefficient")]
    MissingCoefficient(String, String),
    #[error("roles are missing a mediator")]
    MissingMediator,
    #[error("fit has no equation for {0}")]
    MissingEquation(String),
    #[error("fit equation for {target} has no regressor {regressor}")]
    MissingRegressor { target: String, regressor: String },
    #[error("confidence interval must satisfy low <= point <= high: {0}, {1}, {2}")]
    InvalidInterval(f64, f64, f64),
    #[error("effects violate additivity beyond {ADDITIVITY_TOLERANCE}: total {total} vs direct + indirect {sum}")]
    AdditivityViolated { total: f64, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Total,
    Direct,
    Indirect,
}

impl std::fmt::Display for EffectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EffectKind::Total => "total",
            EffectKind::Direct => "direct",
            EffectKind::Indirect => "indirect",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EffectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total" => Ok(EffectKind::Total),
            "direct" => Ok(EffectKind::Direct),
            "indirect" => Ok(EffectKind::Indirect),
            other => Err(format!("unknown effect kind {other:?}")),
        }
    }
}

/// Knuth's error-free sum: returns (fl(a + b), exact rounding error).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

/// A point estimate with a 95% confidence interval.
///
/// `residuals` holds the rounding errors accumulated by correction shifts,
/// one per stored component, so that opposite shifts cancel exactly. They
/// are zero for freshly constructed estimates and excluded from equality
/// and serialization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip, default)]
    residuals: [f64; 3],
}

impl PartialEq for EffectEstimate {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.point == other.point
            && self.ci_low == other.ci_low
            && self.ci_high == other.ci_high
    }
}

impl EffectEstimate {
    /// An estimate with a degenerate interval equal to the point.
    pub fn exact(kind: EffectKind, point: f64) -> Self {
        EffectEstimate {
            kind,
            point,
            ci_low: point,
            ci_high: point,
            residuals: [0.0; 3],
        }
    }

    pub fn with_ci(kind: EffectKind, point: f64, ci_low: f64, ci_high: f64) -> Result<Self, EffectsError> {
        if !(ci_low <= point && point <= ci_high) {
            return Err(EffectsError::InvalidInterval(ci_low, point, ci_high));
        }
        Ok(EffectEstimate {
            kind,
            point,
            ci_low,
            ci_high,
            residuals: [0.0; 3],
        })
    }

    /// Normal-approximation interval: point plus/minus 1.96 standard errors.
    pub fn from_se(kind: EffectKind, point: f64, se: f64) -> Self {
        let half = CI_MULTIPLIER * se;
        EffectEstimate {
            kind,
            point,
            ci_low: point - half,
            ci_high: point + half,
            residuals: [0.0; 3],
        }
    }

    /// Shifts the point and both limits by `delta` with compensated
    /// arithmetic: the exact real value of each component (stored value
    /// plus residual) moves by exactly `delta`, so a later shift by
    /// `-delta` restores the stored values bit for bit.
    pub fn shifted(&self, delta: f64) -> Self {
        let shift_one = |x: f64, r: f64| -> (f64, f64) {
            let (s, e) = two_sum(x, delta);
            let carry = r + e;
            two_sum(s, carry)
        };
        let (point, r0) = shift_one(self.point, self.residuals[0]);
        let (ci_low, r1) = shift_one(self.ci_low, self.residuals[1]);
        let (ci_high, r2) = shift_one(self.ci_high, self.residuals[2]);
        EffectEstimate {
            kind: self.kind,
            point,
            ci_low,
            ci_high,
            residuals: [r0, r1, r2],
        }
    }

    /// Interval width, computed through the compensation terms so that it
    /// is invariant under any chain of shifts.
    pub fn width(&self) -> f64 {
        let (s, e) = two_sum(self.ci_high, -self.ci_low);
        s + (e + (self.residuals[2] - self.residuals[1]))
    }

    pub fn contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

/// The total/direct/indirect estimates for one exposure-outcome pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTriple {
    pub total: EffectEstimate,
    pub direct: EffectEstimate,
    pub indirect: EffectEstimate,
}

impl EffectTriple {
    pub fn new(
        total: EffectEstimate,
        direct: EffectEstimate,
        indirect: EffectEstimate,
    ) -> Result<Self, EffectsError> {
        let sum = direct.point + indirect.point;
        if (total.point - sum).abs() > ADDITIVITY_TOLERANCE {
            return Err(EffectsError::AdditivityViolated {
                total: total.point,
                sum,
            });
        }
        Ok(EffectTriple {
            total,
            direct,
            indirect,
        })
    }

    pub fn additivity_gap(&self) -> f64 {
        (self.total.point - (self.direct.point + self.indirect.point)).abs()
    }

    pub fn get(&self, kind: EffectKind) -> &EffectEstimate {
        match kind {
            EffectKind::Total => &self.total,
            EffectKind::Direct => &self.direct,
            EffectKind::Indirect => &self.indirect,
        }
    }
}

fn require_variable(model: &PathModel, name: &str) -> Result<(), EffectsError> {
    if model.contains(name) {
        Ok(())
    } else {
        Err(EffectsError::UnknownVariable(name.to_string()))
    }
}

/// The exposure-outcome edge coefficient, or zero when the edge is absent.
pub fn direct_effect(model: &PathModel, exposure: &str, outcome: &str) -> Result<f64, EffectsError> {
    require_variable(model, exposure)?;
    require_variable(model, outcome)?;
    match model.edge(exposure, outcome) {
        None => Ok(0.0),
        Some(edge) => edge
            .coefficient
            .ok_or_else(|| EffectsError::MissingCoefficient(exposure.to_string(), outcome.to_string())),
    }
}

/// Sum over all directed paths from `exposure` to `outcome` of the product
/// of edge coefficients along each path. Every edge lying on such a path
/// must carry a coefficient.
pub fn total_effect(model: &PathModel, exposure: &str, outcome: &str) -> Result<f64, EffectsError> {
    require_variable(model, exposure)?;
    require_variable(model, outcome)?;

    // ancestors of the outcome, including it
    let mut to_outcome: std::collections::BTreeSet<String> =
        std::collections::BTreeSet::from([outcome.to_string()]);
    let mut stack = vec![outcome];
    while let Some(v) = stack.pop() {
        for p in model.parents_of(v) {
            if to_outcome.insert(p.to_string()) {
                stack.push(p);
            }
        }
    }
    let mut from_exposure = model.descendants(exposure);
    from_exposure.insert(exposure.to_string());

    for edge in model.edges() {
        let on_path = from_exposure.contains(&edge.from) && to_outcome.contains(&edge.to);
        if on_path && edge.coefficient.is_none() {
            return Err(EffectsError::MissingCoefficient(
                edge.from.clone(),
                edge.to.clone(),
            ));
        }
    }

    // contribution(v) = sum of path products from v to the outcome
    fn contribution(
        model: &PathModel,
        v: &str,
        outcome: &str,
        relevant: &std::collections::BTreeSet<String>,
        memo: &mut std::collections::HashMap<String, f64>,
    ) -> f64 {
        if v == outcome {
            return 1.0;
        }
        if let Some(&c) = memo.get(v) {
            return c;
        }
        let mut sum = 0.0;
        for child in model.children_of(v) {
            if relevant.contains(child) {
                let coef = model.coefficient(v, child).unwrap_or(0.0);
                sum += coef * contribution(model, child, outcome, relevant, memo);
            }
        }
        memo.insert(v.to_string(), sum);
        sum
    }

    let mut memo = std::collections::HashMap::new();
    Ok(contribution(model, exposure, outcome, &to_outcome, &mut memo))
}

/// Total minus direct: the combined effect through all paths of length at
/// least two. Equals the product of the two factor coefficients in a
/// single-mediator model.
pub fn indirect_effect(
    model: &PathModel,
    exposure: &str,
    mediator: &str,
    outcome: &str,
) -> Result<f64, EffectsError> {
    require_variable(model, mediator)?;
    let total = total_effect(model, exposure, outcome)?;
    let direct = direct_effect(model, exposure, outcome)?;
    Ok(total - direct)
}

/// Population effect triple of a fully annotated model, with degenerate
/// intervals (population quantities have no sampling error).
pub fn effect_triple_from_model(
    model: &PathModel,
    roles: &RoleAssignment,
) -> Result<EffectTriple, EffectsError> {
    let mediator = roles.mediator.as_deref().ok_or(EffectsError::MissingMediator)?;
    let total = total_effect(model, &roles.exposure, &roles.outcome)?;
    let direct = direct_effect(model, &roles.exposure, &roles.outcome)?;
    let indirect = indirect_effect(model, &roles.exposure, mediator, &roles.outcome)?;
    EffectTriple::new(
        EffectEstimate::exact(EffectKind::Total, total),
        EffectEstimate::exact(EffectKind::Direct, direct),
        EffectEstimate::exact(EffectKind::Indirect, indirect),
    )
}

/// Builds the effect triple from a fitted result, for single-mediator
/// roles. The direct effect and its standard error come from the outcome
/// equation; the indirect point is the product of the two factor estimates
/// with a first-order (delta method) standard error
/// `sqrt(b^2 se_a^2 + a^2 se_b^2)`; the total combines the two under an
/// independence approximation. Intervals are normal-approximation.
pub fn effect_triple_from_fit(
    fit: &FitResult,
    roles: &RoleAssignment,
) -> Result<EffectTriple, EffectsError> {
    let mediator = roles.mediator.as_deref().ok_or(EffectsError::MissingMediator)?;
    let exposure = roles.exposure.as_str();
    let outcome = roles.outcome.as_str();

    let lookup = |target: &str, regressor: &str| -> Result<(f64, f64), EffectsError> {
        let eq = fit
            .equation(target)
            .ok_or_else(|| EffectsError::MissingEquation(target.to_string()))?;
        let found = eq
            .coefficient(regressor)
            .ok_or_else(|| EffectsError::MissingRegressor {
                target: target.to_string(),
                regressor: regressor.to_string(),
            })?;
        Ok((found.estimate, found.std_error))
    };

    let (direct, se_direct) = lookup(outcome, exposure)?;
    let (a, se_a) = lookup(mediator, exposure)?;
    let (b, se_b) = lookup(outcome, mediator)?;

    let indirect = a * b;
    let se_indirect = (b * b * se_a * se_a + a * a * se_b * se_b).sqrt();
    let total = direct + indirect;
    let se_total = (se_direct * se_direct + se_indirect * se_indirect).sqrt();

    EffectTriple::new(
        EffectEstimate::from_se(EffectKind::Total, total, se_total),
        EffectEstimate::from_se(EffectKind::Direct, direct, se_direct),
        EffectEstimate::from_se(EffectKind::Indirect, indirect, se_indirect),
    )
}
