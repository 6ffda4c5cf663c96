//! System description, validation and the macro-state layout of the
//! flattened state space.
//!
//! Phases inside a macro-state are ordered lexicographically in the tuple
//! order `(degradation, shock, vacation)` for the operational states with the
//! repairperson away, `(degradation, shock)` for `O2_R`, `(shock, vacation)`
//! for the failure states waiting on the repairperson and `(shock, service)`
//! for repair and preventive maintenance. The last tuple component varies
//! fastest, which is exactly the index order produced by the Kronecker
//! products in [`crate::mmap`].

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ph::PhaseType;
use crate::validation::ValidationReport;

const SPLIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Two degradation levels, no preventive maintenance.
    NoPM,
    /// Three degradation levels; major degradation triggers preventive maintenance.
    PM,
}

impl Variant {
    pub fn level_count(self) -> usize {
        match self {
            Variant::NoPM => 2,
            Variant::PM => 3,
        }
    }
}

/// Internal degradation: a leveled phase-type lifetime whose absorption is
/// split into repairable and non-repairable failures.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationModel {
    pub ph: PhaseType,
    pub level_sizes: Vec<usize>,
    pub rep_rates: Vec<f64>,
    pub nonrep_rates: Vec<f64>,
}

impl DegradationModel {
    pub fn order(&self) -> usize {
        self.ph.order()
    }

    /// Phase indices of level `l` (zero based).
    pub fn level_range(&self, l: usize) -> Range<usize> {
        let start: usize = self.level_sizes[..l].iter().sum();
        start..start + self.level_sizes[l]
    }

    pub fn level_of(&self, phase: usize) -> usize {
        let mut acc = 0;
        for (l, &s) in self.level_sizes.iter().enumerate() {
            acc += s;
            if phase < acc {
                return l;
            }
        }
        self.level_sizes.len() - 1
    }

    /// Sub-block `T_{ab}` between levels `a` and `b`.
    pub fn block(&self, a: usize, b: usize) -> Matrix {
        let (ra, rb) = (self.level_range(a), self.level_range(b));
        self.ph.subgen().block(ra.start, rb.start, ra.len(), rb.len())
    }

    /// Initial-probability sub-vector for level `l`, unnormalized.
    pub fn alpha_level(&self, l: usize) -> Vec<f64> {
        self.ph.alpha()[self.level_range(l)].to_vec()
    }

    pub fn rep_level(&self, l: usize) -> Vec<f64> {
        self.rep_rates[self.level_range(l)].to_vec()
    }

    pub fn nonrep_level(&self, l: usize) -> Vec<f64> {
        self.nonrep_rates[self.level_range(l)].to_vec()
    }
}

/// External shocks as a phase-type renewal process; every shock fails the
/// unit, repairably or not.
#[derive(Clone, Debug, PartialEq)]
pub struct ShockModel {
    pub ph: PhaseType,
    pub rep_rates: Vec<f64>,
    pub nonrep_rates: Vec<f64>,
}

impl ShockModel {
    pub fn order(&self) -> usize {
        self.ph.order()
    }

    /// Generator of the shock renewal process, `L + L⁰γ`.
    pub fn renewal_generator(&self) -> Matrix {
        let exit = self.ph.exit_rates();
        let gamma = self.ph.alpha();
        let l = self.ph.subgen();
        Matrix::from_fn(l.rows(), l.cols(), |i, j| l[(i, j)] + exit[i] * gamma[j])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub variant: Variant,
    pub degradation: DegradationModel,
    pub shock: ShockModel,
    pub vacation: PhaseType,
    pub corrective: PhaseType,
    /// Present iff `variant` is [`Variant::PM`].
    pub preventive: Option<PhaseType>,
}

impl SystemSpec {
    /// Same system with a different vacation law.
    pub fn with_vacation(&self, vacation: PhaseType) -> SystemSpec {
        SystemSpec { vacation, ..self.clone() }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_spec(self)
    }

    pub fn dims(&self) -> PhaseDims {
        PhaseDims {
            levels: self.degradation.level_sizes.clone(),
            shock: self.shock.order(),
            vacation: self.vacation.order(),
            corrective: self.corrective.order(),
            preventive: self.preventive.as_ref().map_or(0, PhaseType::order),
        }
    }
}

/// The named groups of phases of the state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MacroState {
    /// Minor degradation, repairperson on vacation.
    O1,
    /// Middle degradation, repairperson on vacation.
    O2WR,
    /// Middle degradation, repairperson idle at the workplace.
    O2R,
    /// Major degradation, repairperson on vacation.
    O3WR,
    /// Repairable failure waiting for the repairperson.
    RF,
    /// Non-repairable failure waiting for the repairperson.
    NRF,
    /// Preventive maintenance in progress.
    PM,
    /// Corrective repair in progress.
    CR,
}

impl MacroState {
    pub fn label(self) -> &'static str {
        match self {
            MacroState::O1 => "O1",
            MacroState::O2WR => "O2_WR",
            MacroState::O2R => "O2_R",
            MacroState::O3WR => "O3_WR",
            MacroState::RF => "RF_WR",
            MacroState::NRF => "NRF_WR",
            MacroState::PM => "PM",
            MacroState::CR => "CR",
        }
    }

    pub fn is_operational(self) -> bool {
        matches!(self, MacroState::O1 | MacroState::O2WR | MacroState::O2R | MacroState::O3WR)
    }

    /// Macro-states of a variant in their canonical order `E1, E2, …`.
    pub fn ordered(variant: Variant) -> &'static [MacroState] {
        use MacroState::*;
        match variant {
            Variant::NoPM => &[O1, O2WR, O2R, RF, NRF, CR],
            Variant::PM => &[O1, O2WR, O2R, O3WR, RF, NRF, PM, CR],
        }
    }
}

impl fmt::Display for MacroState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Orders of every phase-type component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseDims {
    pub levels: Vec<usize>,
    pub shock: usize,
    pub vacation: usize,
    pub corrective: usize,
    pub preventive: usize,
}

impl PhaseDims {
    pub fn macro_size(&self, s: MacroState) -> usize {
        let (p, v) = (self.shock, self.vacation);
        match s {
            MacroState::O1 => self.levels[0] * p * v,
            MacroState::O2WR => self.levels[1] * p * v,
            MacroState::O2R => self.levels[1] * p,
            MacroState::O3WR => self.levels[2] * p * v,
            MacroState::RF | MacroState::NRF => p * v,
            MacroState::PM => p * self.preventive,
            MacroState::CR => p * self.corrective,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroEntry {
    pub state: MacroState,
    pub size: usize,
    pub offset: usize,
}

impl MacroEntry {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroStateLayout {
    pub variant: Variant,
    pub dims: PhaseDims,
    pub entries: Vec<MacroEntry>,
    pub total_dim: usize,
}

impl MacroStateLayout {
    pub fn new(variant: Variant, dims: PhaseDims) -> Self {
        let mut offset = 0;
        let entries = MacroState::ordered(variant)
            .iter()
            .map(|&state| {
                let size = dims.macro_size(state);
                let e = MacroEntry { state, size, offset };
                offset += size;
                e
            })
            .collect();
        MacroStateLayout { variant, dims, entries, total_dim: offset }
    }

    pub fn entry(&self, s: MacroState) -> Option<&MacroEntry> {
        self.entries.iter().find(|e| e.state == s)
    }

    pub fn range(&self, s: MacroState) -> Range<usize> {
        self.entry(s).map_or(0..0, MacroEntry::range)
    }

    /// Zero-based position of `s` in the macro-state order.
    pub fn position(&self, s: MacroState) -> Option<usize> {
        self.entries.iter().position(|e| e.state == s)
    }

    pub fn states(&self) -> impl Iterator<Item = MacroState> + '_ {
        self.entries.iter().map(|e| e.state)
    }

    pub fn operational(&self) -> Vec<MacroState> {
        self.states().filter(|s| s.is_operational()).collect()
    }

    pub fn failure(&self) -> Vec<MacroState> {
        self.states().filter(|s| !s.is_operational()).collect()
    }

    /// Flat indices of the operational set W.
    pub fn operational_indices(&self) -> Vec<usize> {
        self.entries.iter().filter(|e| e.state.is_operational()).flat_map(|e| e.range()).collect()
    }

    /// Total mass of a distribution over each macro-state.
    pub fn masses(&self, p: &[f64]) -> Vec<(MacroState, f64)> {
        self.entries.iter().map(|e| (e.state, p[e.range()].iter().sum())).collect()
    }
}

/// Builds the macro-state layout of a validated spec.
pub fn build_layout(spec: &SystemSpec) -> Result<MacroStateLayout> {
    let report = validate_spec(spec);
    if !report.is_valid() {
        return Err(Error::InvalidSpec(report));
    }
    Ok(MacroStateLayout::new(spec.variant, spec.dims()))
}

/// Fixed charges per event.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedCosts {
    pub nu: f64,
    pub cr: f64,
    pub pm: f64,
    pub i: f64,
}

/// Rewards and costs, per unit time unless stated otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct EconomicSpec {
    /// Reward rate while operational.
    pub reward: f64,
    /// Cost rate while not operational.
    pub downtime_cost: f64,
    /// Per-phase operating cost for each degradation level.
    pub level_costs: Vec<Vec<f64>>,
    /// Cost rate of an idle repairperson at the workplace.
    pub idle_cost: f64,
    /// Per-phase repairperson cost during corrective repair.
    pub corrective_cost: Vec<f64>,
    /// Per-phase repairperson cost during preventive maintenance.
    pub preventive_cost: Vec<f64>,
    pub fixed: FixedCosts,
}

impl EconomicSpec {
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        let mut finite = |path: String, x: f64| {
            if !x.is_finite() {
                r.error(path, format!("{x} is not finite"));
            }
        };
        finite("B".into(), self.reward);
        finite("A".into(), self.downtime_cost);
        finite("idle_cost".into(), self.idle_cost);
        for (l, c) in self.level_costs.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                finite(format!("level_costs[{l}][{i}]"), x);
            }
        }
        for (i, &x) in self.corrective_cost.iter().enumerate() {
            finite(format!("cr_cost[{i}]"), x);
        }
        for (i, &x) in self.preventive_cost.iter().enumerate() {
            finite(format!("pm_cost[{i}]"), x);
        }
        let f = self.fixed;
        for (name, x) in [("nu", f.nu), ("cr", f.cr), ("pm", f.pm), ("i", f.i)] {
            if !x.is_finite() || x < 0.0 {
                r.error(format!("fixed.{name}"), format!("fixed cost {x} must be finite and nonnegative"));
            }
        }
        r
    }

    /// Multiplies every rate and charge by `s`.
    pub fn scaled(&self, s: f64) -> EconomicSpec {
        let v = |x: &Vec<f64>| x.iter().map(|a| a * s).collect::<Vec<_>>();
        EconomicSpec {
            reward: self.reward * s,
            downtime_cost: self.downtime_cost * s,
            level_costs: self.level_costs.iter().map(v).collect(),
            idle_cost: self.idle_cost * s,
            corrective_cost: v(&self.corrective_cost),
            preventive_cost: v(&self.preventive_cost),
            fixed: FixedCosts {
                nu: self.fixed.nu * s,
                cr: self.fixed.cr * s,
                pm: self.fixed.pm * s,
                i: self.fixed.i * s,
            },
        }
    }
}

/// Checks every structural and numerical invariant of a spec.
pub fn validate_spec(spec: &SystemSpec) -> ValidationReport {
    let mut r = ValidationReport::new();
    let deg = &spec.degradation;

    r.merge_prefixed("degradation", deg.ph.validate());
    r.merge_prefixed("shock", spec.shock.ph.validate());
    r.merge_prefixed("vacation", spec.vacation.validate());
    r.merge_prefixed("corrective", spec.corrective.validate());
    match (spec.variant, &spec.preventive) {
        (Variant::PM, Some(p)) => r.merge_prefixed("preventive", p.validate()),
        (Variant::PM, None) => r.error("preventive", "PM variant requires a preventive maintenance law"),
        (Variant::NoPM, Some(_)) => r.error("preventive", "NoPM variant must not carry a preventive law"),
        (Variant::NoPM, None) => {}
    }

    let want = spec.variant.level_count();
    if deg.level_sizes.len() != want {
        r.error(
            "degradation.levels",
            format!("{:?} variant needs {want} degradation levels, got {}", spec.variant, deg.level_sizes.len()),
        );
        return r;
    }
    if let Some(l) = deg.level_sizes.iter().position(|&s| s == 0) {
        r.error(format!("degradation.levels[{l}]"), "empty degradation level");
        return r;
    }
    let n = deg.order();
    let total: usize = deg.level_sizes.iter().sum();
    if total != n {
        r.error("degradation.levels", format!("level sizes sum to {total}, PH order is {n}"));
        return r;
    }
    if deg.ph.subgen().rows() != n || deg.ph.subgen().cols() != n {
        return r;
    }

    let t = deg.ph.subgen();
    for i in 0..n {
        for j in 0..n {
            if deg.level_of(i) > deg.level_of(j) && t[(i, j)] != 0.0 {
                r.error(
                    format!("degradation.T[{i}][{j}]"),
                    "nonzero entry below the level block diagonal",
                );
            }
        }
    }

    check_split(&mut r, "degradation", &deg.ph, &deg.rep_rates, &deg.nonrep_rates, "T");
    check_split(&mut r, "shock", &spec.shock.ph, &spec.shock.rep_rates, &spec.shock.nonrep_rates, "L");

    let a1: f64 = deg.alpha_level(0).iter().sum();
    if (a1 - 1.0).abs() > SPLIT_TOL {
        r.warning(
            "degradation.alpha",
            format!(
                "minor-level start mass is {a1}; replacement and restart rows use it unnormalized and will not conserve probability"
            ),
        );
    }
    r
}

fn check_split(r: &mut ValidationReport, prefix: &str, ph: &PhaseType, rep: &[f64], nonrep: &[f64], sym: &str) {
    let n = ph.order();
    if rep.len() != n || nonrep.len() != n {
        r.error(
            format!("{prefix}.{sym}_r0"),
            format!("failure-rate vectors have lengths {} and {}, expected {n}", rep.len(), nonrep.len()),
        );
        return;
    }
    if ph.subgen().rows() != n {
        return;
    }
    let exit = ph.exit_rates();
    for i in 0..n {
        if !(rep[i] >= 0.0) {
            r.error(format!("{prefix}.{sym}_r0[{i}]"), format!("rate {} is negative", rep[i]));
        }
        if !(nonrep[i] >= 0.0) {
            r.error(format!("{prefix}.{sym}_nr0[{i}]"), format!("rate {} is negative", nonrep[i]));
        }
        let gap = rep[i] + nonrep[i] - exit[i];
        if gap.abs() > SPLIT_TOL {
            r.error(
                format!("{prefix}.{sym}_r0[{i}]"),
                format!(
                    "row {i}: repairable + non-repairable = {} but exit rate is {} (gap {gap:e})",
                    rep[i] + nonrep[i],
                    exit[i]
                ),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn example_pm_spec_is_valid() {
        let spec = presets::pm_spec(5.8003, 5.8003);
        let r = validate_spec(&spec);
        assert!(r.is_empty(), "{r}");
    }

    #[test]
    fn perturbed_split_names_the_row() {
        let mut spec = presets::pm_spec(5.8003, 5.8003);
        spec.degradation.rep_rates[3] += 1e-3;
        let r = validate_spec(&spec);
        assert!(!r.is_valid());
        assert!(r.errors().any(|i| i.path == "degradation.T_r0[3]" && i.message.contains("row 3")));
    }

    #[test]
    fn pm_with_two_levels_is_invalid() {
        let mut spec = presets::pm_spec(5.8003, 5.8003);
        spec.degradation.level_sizes = vec![2, 5];
        let r = validate_spec(&spec);
        assert!(r.errors().any(|i| i.path == "degradation.levels"));
        assert!(build_layout(&spec).is_err());
    }

    #[test]
    fn lower_block_entry_is_rejected() {
        let mut spec = presets::nopm_spec(5.4502, 5.4502);
        let mut rows = spec.degradation.ph.subgen().to_rows();
        rows[3][0] = 0.1;
        rows[3][3] -= 0.1;
        spec.degradation.ph =
            PhaseType::new(spec.degradation.ph.alpha().to_vec(), Matrix::from_rows(&rows).unwrap()).unwrap();
        let r = validate_spec(&spec);
        assert!(r.errors().any(|i| i.path == "degradation.T[3][0]"));
    }

    #[test]
    fn example_pm_layout() {
        let layout = build_layout(&presets::pm_spec(5.8003, 5.8003)).unwrap();
        let sizes: Vec<usize> = layout.entries.iter().map(|e| e.size).collect();
        assert_eq!(sizes, vec![8, 8, 4, 12, 4, 4, 4, 4]);
        assert_eq!(layout.total_dim, 48);
        assert_eq!(layout.operational(), vec![MacroState::O1, MacroState::O2WR, MacroState::O2R, MacroState::O3WR]);
    }

    #[test]
    fn example_nopm_layout() {
        let layout = build_layout(&presets::nopm_spec(5.4502, 5.4502)).unwrap();
        let sizes: Vec<usize> = layout.entries.iter().map(|e| e.size).collect();
        // (n1 p v, n2 p v, n2 p, p v, p v, p m1) with n = (2, 5), p = v = m1 = 2
        assert_eq!(sizes, vec![8, 20, 10, 4, 4, 4]);
        assert_eq!(layout.operational().len(), 3);
    }

    #[test]
    fn unit_orders_give_one_phase_per_macro_state() {
        let dims = PhaseDims { levels: vec![1, 1], shock: 1, vacation: 1, corrective: 1, preventive: 0 };
        assert_eq!(MacroStateLayout::new(Variant::NoPM, dims).total_dim, 6);
        let dims = PhaseDims { levels: vec![1, 1, 1], shock: 1, vacation: 1, corrective: 1, preventive: 1 };
        assert_eq!(MacroStateLayout::new(Variant::PM, dims).total_dim, 8);
    }

    #[test]
    fn layout_partitions_state_space() {
        for spec in [presets::pm_spec(1.0, 2.0), presets::nopm_spec(1.0, 2.0)] {
            let layout = build_layout(&spec).unwrap();
            let mut next = 0;
            for e in &layout.entries {
                assert_eq!(e.offset, next);
                assert!(e.size > 0);
                next += e.size;
            }
            assert_eq!(next, layout.total_dim);
            let w = layout.operational();
            let f = layout.failure();
            assert_eq!(w.len() + f.len(), layout.entries.len());
            assert!(w.iter().all(|s| !f.contains(s)));
        }
    }

    #[test]
    fn economics_validation() {
        let mut econ = presets::example_economics(Variant::PM);
        assert!(econ.validate().is_valid());
        econ.fixed.cr = -1.0;
        assert!(econ.validate().errors().any(|i| i.path == "fixed.cr"));
    }
}
