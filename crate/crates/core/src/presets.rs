//! The seven-phase worked example: degradation, shock, repair and
//! maintenance laws plus its cost constants, in both system variants.
//!
//! The two variants share the same seven-phase lifetime. With preventive
//! maintenance the phases group as 1-2 / 3-4 / 5-7; without it the grouping
//! used here is 1-2 / 3-7.

use crate::matrix::Matrix;
use crate::model::{DegradationModel, EconomicSpec, FixedCosts, ShockModel, SystemSpec, Variant};
use crate::ph::PhaseType;

pub fn lifetime_subgen() -> Vec<Vec<f64>> {
    vec![
        vec![-1.0, 0.51, 0.24, 0.25, 0.0, 0.0, 0.0],
        vec![1.2, -2.0, 0.5, 0.3, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, -0.8, 0.2, 0.0, 0.16, 0.16],
        vec![0.0, 0.0, 0.225, -0.9, 0.11, 0.11, 0.14],
        vec![0.0, 0.0, 0.0, 0.0, -0.4, 0.03, 0.07],
        vec![0.0, 0.0, 0.0, 0.0, 0.1, -0.9, 0.125],
        vec![0.0, 0.0, 0.0, 0.0, 0.07, 0.03, -0.4],
    ]
}

pub const LIFETIME_REP: [f64; 7] = [0.0, 0.0, 0.24, 0.27, 0.28, 0.63, 0.28];
pub const LIFETIME_NONREP: [f64; 7] = [0.0, 0.0, 0.04, 0.045, 0.02, 0.045, 0.02];

/// Vacation rates reported as optimal with preventive maintenance.
pub const PM_OPTIMAL_RATE: f64 = 5.8003;
/// Vacation rates reported as optimal without preventive maintenance.
pub const NOPM_OPTIMAL_RATE: f64 = 5.4502;

fn ph(alpha: Vec<f64>, rows: Vec<Vec<f64>>) -> PhaseType {
    PhaseType::new(alpha, Matrix::from_rows(&rows).expect("preset matrix")).expect("preset PH")
}

pub fn degradation(levels: Vec<usize>) -> DegradationModel {
    DegradationModel {
        ph: ph(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], lifetime_subgen()),
        level_sizes: levels,
        rep_rates: LIFETIME_REP.to_vec(),
        nonrep_rates: LIFETIME_NONREP.to_vec(),
    }
}

pub fn shock() -> ShockModel {
    ShockModel {
        ph: ph(vec![1.0, 0.0], vec![vec![-3.0, 2.9], vec![2.9, -3.0]]),
        rep_rates: vec![0.08, 0.08],
        nonrep_rates: vec![0.02, 0.02],
    }
}

pub fn corrective() -> PhaseType {
    ph(vec![1.0, 0.0], vec![vec![-1.0, 0.5], vec![0.5, -1.0]])
}

pub fn preventive() -> PhaseType {
    ph(vec![1.0, 0.0], vec![vec![-2.0, 0.005], vec![0.005, -2.0]])
}

pub fn pm_spec(l1: f64, l2: f64) -> SystemSpec {
    SystemSpec {
        variant: Variant::PM,
        degradation: degradation(vec![2, 2, 3]),
        shock: shock(),
        vacation: PhaseType::coxian2(l1, l2).expect("positive rates"),
        corrective: corrective(),
        preventive: Some(preventive()),
    }
}

pub fn nopm_spec(l1: f64, l2: f64) -> SystemSpec {
    SystemSpec {
        variant: Variant::NoPM,
        degradation: degradation(vec![2, 5]),
        shock: shock(),
        vacation: PhaseType::coxian2(l1, l2).expect("positive rates"),
        corrective: corrective(),
        preventive: None,
    }
}

/// Reward 100, downtime cost 100, per-level operating costs 0.1 / 0.5 / 1,
/// idle repairperson 0.5, service surcharges 1.5 (PM) and 9.5 (CR), no fixed
/// event charges.
pub fn example_economics(variant: Variant) -> EconomicSpec {
    let level_costs = match variant {
        Variant::PM => vec![vec![0.1; 2], vec![0.5; 2], vec![1.0; 3]],
        // phases 5-7 keep their major-level cost inside the merged level
        Variant::NoPM => vec![vec![0.1; 2], vec![0.5, 0.5, 1.0, 1.0, 1.0]],
    };
    EconomicSpec {
        reward: 100.0,
        downtime_cost: 100.0,
        level_costs,
        idle_cost: 0.5,
        corrective_cost: vec![9.5; 2],
        preventive_cost: if variant == Variant::PM { vec![1.5; 2] } else { Vec::new() },
        fixed: FixedCosts::default(),
    }
}
