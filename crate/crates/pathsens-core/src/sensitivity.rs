//! Sensitivity analysis for a single unmeasured confounder: the additive
//! bias factor, per-scenario corrections of effect estimates and their
//! confidence intervals, explain-away solving, and grid sweeps with
//! robustness verdicts.
//!
//! The bias factor is the product of the confounder's effect on the outcome
//! (`gamma`) and the difference in the confounder's mean between the two
//! compared exposure levels (`shift`; conditional on the mediator in the
//! mediator-outcome scenario). Corrections shift the point estimate and
//! both confidence limits by the same constant, so interval widths are
//! preserved exactly. These formulas assume the confounder does not
//! interact with the exposure and that its mean is additive in the
//! conditioning variables; those assumptions are declared, not verified,
//! since the confounder is unobserved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{EffectEstimate, EffectKind, EffectTriple};
use crate::model::{PathModel, RoleAssignment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("non-finite sensitivity parameter: {0}")]
    NonFinite(String),
    #[error("{effect} effect is not biased under {scenario} confounding; no correction applies")]
    NotBiasedInScenario { scenario: Scenario, effect: EffectKind },
    #[error("invalid range {0}: need lo <= hi and step > 0")]
    InvalidRange(String),
    #[error("cannot infer scenario: {0}")]
    ScenarioInference(String),
}

/// Placement of the unmeasured confounder's two arrows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ExposureMediator,
    ExposureOutcome,
    MediatorOutcome,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::ExposureMediator,
        Scenario::ExposureOutcome,
        Scenario::MediatorOutcome,
    ];

    /// Which effects the scenario biases (and therefore which corrections
    /// are defined).
    pub fn biases(&self, kind: EffectKind) -> bool {
        match (self, kind) {
            (Scenario::ExposureMediator, EffectKind::Total) => true,
            (Scenario::ExposureMediator, EffectKind::Indirect) => true,
            (Scenario::ExposureOutcome, EffectKind::Total) => true,
            (Scenario::ExposureOutcome, EffectKind::Direct) => true,
            (Scenario::MediatorOutcome, EffectKind::Direct) => true,
            (Scenario::MediatorOutcome, EffectKind::Indirect) => true,
            _ => false,
        }
    }

    /// Infers the scenario from the single designated unmeasured variable's
    /// arrow placement in `model`.
    pub fn infer(model: &PathModel, roles: &RoleAssignment) -> Result<Scenario, SensitivityError> {
        if roles.unmeasured.len() != 1 {
            return Err(SensitivityError::ScenarioInference(format!(
                "need exactly one designated unmeasured variable, found {}",
                roles.unmeasured.len()
            )));
        }
        let u = roles.unmeasured.iter().next().unwrap();
        let children: Vec<&str> = model.children_of(u);
        let mediator = roles.mediator.as_deref().unwrap_or("");
        let hits = |name: &str| children.contains(&name);
        let (a, m, y) = (
            hits(&roles.exposure),
            hits(mediator),
            hits(&roles.outcome),
        );
        match (a, m, y, children.len()) {
            (true, true, false, 2) => Ok(Scenario::ExposureMediator),
            (true, false, true, 2) => Ok(Scenario::ExposureOutcome),
            (false, true, true, 2) => Ok(Scenario::MediatorOutcome),
            _ => Err(SensitivityError::ScenarioInference(format!(
                "unmeasured variable {u} points at {children:?}; expected exactly two of \
                 exposure/mediator/outcome"
            ))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::ExposureMediator => "exposure-mediator",
            Scenario::ExposureOutcome => "exposure-outcome",
            Scenario::MediatorOutcome => "mediator-outcome",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exposure-mediator" => Ok(Scenario::ExposureMediator),
            "exposure-outcome" => Ok(Scenario::ExposureOutcome),
            "mediator-outcome" => Ok(Scenario::MediatorOutcome),
            other => Err(format!(
                "unknown scenario {other:?}; expected exposure-mediator, exposure-outcome, \
                 or mediator-outcome"
            )),
        }
    }
}

/// User-specified sensitivity parameters: the confounder's outcome effect
/// and the between-exposure-level difference in its mean. For a binary
/// confounder the shift is a prevalence difference in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    pub gamma: f64,
    pub shift: f64,
}

impl SensitivityParams {
    pub fn new(gamma: f64, shift: f64) -> Self {
        SensitivityParams { gamma, shift }
    }
}

/// The additive bias factor: gamma times shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasFactor {
    pub value: f64,
}

pub fn bias_factor(params: SensitivityParams) -> Result<BiasFactor, SensitivityError> {
    if !params.gamma.is_finite() {
        return Err(SensitivityError::NonFinite(format!("gamma = {}", params.gamma)));
    }
    if !params.shift.is_finite() {
        return Err(SensitivityError::NonFinite(format!("shift = {}", params.shift)));
    }
    Ok(BiasFactor {
        value: params.gamma * params.shift,
    })
}

/// Applies the scenario's correction rule to an effect triple, shifting the
/// point estimate and both confidence limits of each biased effect by the
/// bias factor. Additivity of the triple is preserved in all three cases:
/// either the total and one component move together, or the two components
/// move by equal and opposite amounts. Shifts go through the compensated
/// arithmetic in [`EffectEstimate::shifted`], so correcting with the
/// opposite factor afterwards restores the input bit for bit.
pub fn correct(
    triple: &EffectTriple,
    scenario: Scenario,
    params: SensitivityParams,
) -> Result<EffectTriple, SensitivityError> {
    let b = bias_factor(params)?.value;
    let corrected = match scenario {
        Scenario::ExposureMediator => EffectTriple {
            total: triple.total.shifted(-b),
            direct: triple.direct.clone(),
            indirect: triple.indirect.shifted(-b),
        },
        Scenario::ExposureOutcome => EffectTriple {
            total: triple.total.shifted(-b),
            direct: triple.direct.shifted(-b),
            indirect: triple.indirect.clone(),
        },
        Scenario::MediatorOutcome => EffectTriple {
            total: triple.total.clone(),
            direct: triple.direct.shifted(-b),
            indirect: triple.indirect.shifted(b),
        },
    };
    Ok(corrected)
}

/// A (shift, gamma) pair lying on the explain-away hyperbola.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaShift {
    pub shift: f64,
    pub gamma: f64,
}

/// The bias factor that would drive an effect estimate exactly to zero,
/// with sample factorizations into (shift, gamma) pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainAway {
    pub scenario: Scenario,
    pub effect: EffectKind,
    /// gamma * shift must equal this value for the corrected point to be 0.
    pub required_bias: f64,
    pub pairs: Vec<GammaShift>,
}

/// Solves for the bias factor that eliminates `effect` under `scenario`,
/// and factors it at the supplied shift values. Shifts of zero are skipped
/// unless the required bias is itself zero.
pub fn explain_away(
    effect: &EffectEstimate,
    scenario: Scenario,
    shifts: &[f64],
) -> Result<ExplainAway, SensitivityError> {
    if !scenario.biases(effect.kind) {
        return Err(SensitivityError::NotBiasedInScenario {
            scenario,
            effect: effect.kind,
        });
    }
    // Corrections subtract the bias factor except for the indirect effect
    // under mediator-outcome confounding, which adds it.
    let adds = scenario == Scenario::MediatorOutcome && effect.kind == EffectKind::Indirect;
    let required_bias = if adds { -effect.point } else { effect.point };
    let pairs = shifts
        .iter()
        .filter_map(|&shift| {
            if shift == 0.0 {
                (required_bias == 0.0).then_some(GammaShift { shift, gamma: 0.0 })
            } else {
                Some(GammaShift {
                    shift,
                    gamma: required_bias / shift,
                })
            }
        })
        .collect();
    Ok(ExplainAway {
        scenario,
        effect: effect.kind,
        required_bias,
        pairs,
    })
}

/// An inclusive numeric range `lo:hi:step`. The upper endpoint is included
/// when `hi - lo` is an integer multiple of `step` within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        RangeSpec { lo, hi, step }
    }

    pub fn values(&self) -> Result<Vec<f64>, SensitivityError> {
        let bad = !self.lo.is_finite()
            || !self.hi.is_finite()
            || !self.step.is_finite()
            || self.step <= 0.0
            || self.hi < self.lo;
        if bad {
            return Err(SensitivityError::InvalidRange(format!(
                "{}:{}:{}",
                self.lo, self.hi, self.step
            )));
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.lo + k as f64 * self.step).collect())
    }
}

/// Primary robustness category for a swept effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVerdict {
    ContainsZero,
    SameDirection,
    DirectionReversed,
}

impl std::fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepVerdict::ContainsZero => "contains-zero",
            SweepVerdict::SameDirection => "same-direction",
            SweepVerdict::DirectionReversed => "direction-reversed",
        };
        f.write_str(s)
    }
}

/// Full verdict for one effect over a sweep. Contains-zero and
/// direction-reversed can co-occur; both flags are reported and the
/// primary label picks the first applicable category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictFlags {
    pub contains_zero: bool,
    pub direction_reversed: bool,
    pub primary: SweepVerdict,
}

fn judge(original: &EffectEstimate, corrected: impl Iterator<Item = EffectEstimate>) -> VerdictFlags {
    let mut contains_zero = false;
    let mut direction_reversed = false;
    for c in corrected {
        if c.ci_low <= 0.0 && 0.0 <= c.ci_high {
            contains_zero = true;
        }
        if original.point * c.point < 0.0 {
            direction_reversed = true;
        }
    }
    let primary = if contains_zero {
        SweepVerdict::ContainsZero
    } else if direction_reversed {
        SweepVerdict::DirectionReversed
    } else {
        SweepVerdict::SameDirection
    };
    VerdictFlags {
        contains_zero,
        direction_reversed,
        primary,
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub shift: f64,
    pub bias: f64,
    pub corrected: EffectTriple,
}

/// Corrected triples over the whole (gamma, shift) grid plus per-effect
/// verdicts. Cells are ordered gamma-major, matching the range order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub scenario: Scenario,
    pub cells: Vec<SweepCell>,
    pub total: VerdictFlags,
    pub direct: VerdictFlags,
    pub indirect: VerdictFlags,
}

pub fn sweep(
    triple: &EffectTriple,
    scenario: Scenario,
    gamma_range: &RangeSpec,
    shift_range: &RangeSpec,
) -> Result<SweepGrid, SensitivityError> {
    let gammas = gamma_range.values()?;
    let shifts = shift_range.values()?;
    let mut cells = Vec::with_capacity(gammas.len() * shifts.len());
    for &gamma in &gammas {
        for &shift in &shifts {
            let params = SensitivityParams::new(gamma, shift);
            let bias = bias_factor(params)?.value;
            let corrected = correct(triple, scenario, params)?;
            cells.push(SweepCell {
                gamma,
                shift,
                bias,
                corrected,
            });
        }
    }
    let total = judge(&triple.total, cells.iter().map(|c| c.corrected.total.clone()));
    let direct = judge(&triple.direct, cells.iter().map(|c| c.corrected.direct.clone()));
    let indirect = judge(
        &triple.indirect,
        cells.iter().map(|c| c.corrected.indirect.clone()),
    );
    Ok(SweepGrid {
        scenario,
        cells,
        total,
        direct,
        indirect,
    })
}
