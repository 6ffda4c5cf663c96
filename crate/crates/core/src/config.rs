//! JSON run configuration.
//!
//! ```json
//! {
//!   "variant": "PM",
//!   "degradation": { "alpha": [..], "T": [[..]], "levels": [2, 2, 3], "T_r0": [..], "T_nr0": [..] },
//!   "shock": { "gamma": [..], "L": [[..]], "L_r0": [..], "L_nr0": [..] },
//!   "vacation": { "structure": "coxian2", "lambda1": 5.8, "lambda2": 5.8 },
//!   "corrective": { "beta": [..], "S": [[..]] },
//!   "preventive": { "beta": [..], "S": [[..]] },
//!   "economics": {
//!     "B": 100, "A": 100, "level_costs": [0.1, 0.5, 1.0], "idle_cost": 0.5,
//!     "cr_cost": 9.5, "pm_cost": 1.5, "fixed": { "nu": 0, "cr": 0, "pm": 0, "i": 0 }
//!   }
//! }
//! ```
//!
//! `vacation` may also be given explicitly as `{ "v": [..], "V": [[..]] }`.
//! Every cost entry is either a scalar, applied to all phases, or a vector
//! with one entry per phase. `preventive` is required for `"PM"` and
//! forbidden for `"NoPM"`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{validate_spec, DegradationModel, EconomicSpec, FixedCosts, ShockModel, SystemSpec, Variant};
use crate::ph::PhaseType;
use crate::validation::ValidationReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub variant: Variant,
    pub degradation: DegradationConfig,
    pub shock: ShockConfig,
    pub vacation: VacationConfig,
    pub corrective: ServiceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preventive: Option<ServiceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub economics: Option<EconomicsConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationConfig {
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub levels: Vec<usize>,
    #[serde(rename = "T_r0")]
    pub t_r0: Vec<f64>,
    #[serde(rename = "T_nr0")]
    pub t_nr0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockConfig {
    pub gamma: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "L_r0")]
    pub l_r0: Vec<f64>,
    #[serde(rename = "L_nr0")]
    pub l_nr0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureName {
    Coxian2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VacationConfig {
    Explicit(ExplicitVacation),
    Structured(StructuredVacation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitVacation {
    pub v: Vec<f64>,
    #[serde(rename = "V")]
    pub big_v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredVacation {
    pub structure: StructureName,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub beta: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

/// A scalar broadcast to every phase, or one value per phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostEntry {
    Scalar(f64),
    PerPhase(Vec<f64>),
}

impl CostEntry {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            CostEntry::Scalar(x) => Ok(vec![*x; n]),
            CostEntry::PerPhase(v) if v.len() == n => Ok(v.clone()),
            CostEntry::PerPhase(v) => {
                Err(Error::InvalidEconomics(format!("{path}: {} entries for {n} phases", v.len())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicsConfig {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub level_costs: Vec<CostEntry>,
    pub idle_cost: f64,
    pub cr_cost: CostEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pm_cost: Option<CostEntry>,
    #[serde(default)]
    pub fixed: FixedCosts,
}

fn matrix(rows: &[Vec<f64>], path: &str, report: &mut ValidationReport) -> Option<Matrix> {
    match Matrix::from_rows(rows) {
        Ok(m) => Some(m),
        Err(e) => {
            report.error(path, e.to_string());
            None
        }
    }
}

fn ph(alpha: &[f64], rows: &[Vec<f64>], path: &str, report: &mut ValidationReport) -> Option<PhaseType> {
    let m = matrix(rows, path, report)?;
    if !m.is_square() || m.rows() != alpha.len() {
        report.error(path, format!("start vector of length {} against {}x{} matrix", alpha.len(), m.rows(), m.cols()));
        return None;
    }
    Some(PhaseType::new_unchecked(alpha.to_vec(), m))
}

impl VacationConfig {
    fn build(&self, report: &mut ValidationReport) -> Option<PhaseType> {
        match self {
            VacationConfig::Explicit(e) => ph(&e.v, &e.big_v, "vacation.V", report),
            VacationConfig::Structured(s) => match s.structure {
                StructureName::Coxian2 => {
                    if !(s.lambda1 > 0.0 && s.lambda2 > 0.0 && s.lambda1.is_finite() && s.lambda2.is_finite()) {
                        report.error("vacation", format!("rates must be positive, got {} and {}", s.lambda1, s.lambda2));
                        return None;
                    }
                    PhaseType::coxian2(s.lambda1, s.lambda2).ok()
                }
            },
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Replaces the vacation law with a Coxian-2 of the given rates.
    pub fn with_coxian2(&self, lambda1: f64, lambda2: f64) -> RunConfig {
        RunConfig {
            vacation: VacationConfig::Structured(StructuredVacation { structure: StructureName::Coxian2, lambda1, lambda2 }),
            ..self.clone()
        }
    }

    fn build_spec(&self, report: &mut ValidationReport) -> Option<SystemSpec> {
        let d = &self.degradation;
        let s = &self.shock;
        let deg = ph(&d.alpha, &d.t, "degradation.T", report);
        let shock = ph(&s.gamma, &s.l, "shock.L", report);
        let vacation = self.vacation.build(report);
        let corrective = ph(&self.corrective.beta, &self.corrective.s, "corrective.S", report);
        let preventive = match &self.preventive {
            Some(p) => Some(ph(&p.beta, &p.s, "preventive.S", report)?),
            None => None,
        };
        if let Some(deg) = &deg {
            for (name, v) in [("T_r0", &d.t_r0), ("T_nr0", &d.t_nr0)] {
                if v.len() != deg.order() {
                    report.error(format!("degradation.{name}"), format!("{} entries for {} phases", v.len(), deg.order()));
                }
            }
        }
        if let Some(shock) = &shock {
            for (name, v) in [("L_r0", &s.l_r0), ("L_nr0", &s.l_nr0)] {
                if v.len() != shock.order() {
                    report.error(format!("shock.{name}"), format!("{} entries for {} phases", v.len(), shock.order()));
                }
            }
        }
        if !report.is_valid() {
            return None;
        }
        Some(SystemSpec {
            variant: self.variant,
            degradation: DegradationModel {
                ph: deg?,
                level_sizes: d.levels.clone(),
                rep_rates: d.t_r0.clone(),
                nonrep_rates: d.t_nr0.clone(),
            },
            shock: ShockModel { ph: shock?, rep_rates: s.l_r0.clone(), nonrep_rates: s.l_nr0.clone() },
            vacation: vacation?,
            corrective: corrective?,
            preventive,
        })
    }

    /// Every invariant of the system and, when present, of the economics.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if let Some(spec) = self.build_spec(&mut report) {
            report.issues.extend(validate_spec(&spec).issues);
            if self.economics.is_some() {
                match self.economic_spec() {
                    Ok(econ) => report.merge_prefixed("economics", econ.validate()),
                    Err(e) => report.error("economics", e.to_string()),
                }
            }
        }
        report
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let mut report = ValidationReport::new();
        let spec = self.build_spec(&mut report);
        match spec {
            Some(spec) => {
                let r = validate_spec(&spec);
                if r.is_valid() {
                    Ok(spec)
                } else {
                    Err(Error::InvalidSpec(r))
                }
            }
            None => Err(Error::InvalidSpec(report)),
        }
    }

    /// Economics with every cost entry expanded to per-phase vectors.
    pub fn economic_spec(&self) -> Result<EconomicSpec> {
        let e = self.economics.as_ref().ok_or_else(|| Error::Config("configuration has no `economics` section".into()))?;
        let levels = &self.degradation.levels;
        if e.level_costs.len() != levels.len() {
            return Err(Error::InvalidEconomics(format!(
                "level_costs: {} entries for {} levels",
                e.level_costs.len(),
                levels.len()
            )));
        }
        let level_costs = e
            .level_costs
            .iter()
            .zip(levels)
            .enumerate()
            .map(|(l, (c, &n))| c.expand(n, &format!("level_costs[{l}]")))
            .collect::<Result<Vec<_>>>()?;
        let corrective_cost = e.cr_cost.expand(self.corrective.beta.len(), "cr_cost")?;
        let preventive_cost = match (&self.preventive, &e.pm_cost) {
            (Some(p), Some(c)) => c.expand(p.beta.len(), "pm_cost")?,
            (Some(_), None) => return Err(Error::InvalidEconomics("pm_cost is required with preventive maintenance".into())),
            (None, Some(_)) => return Err(Error::InvalidEconomics("pm_cost given without preventive maintenance".into())),
            (None, None) => Vec::new(),
        };
        Ok(EconomicSpec {
            reward: e.b,
            downtime_cost: e.a,
            level_costs,
            idle_cost: e.idle_cost,
            corrective_cost,
            preventive_cost,
            fixed: e.fixed,
        })
    }
}
