//! Event-labelled transition blocks and their assembly into the marked
//! Markovian arrival process `(D^Y)_Y` over the flattened state space.
//!
//! Every block is a sum of Kronecker products of the component laws. Source
//! and target phases are ordered as documented in [`crate::model`].
//!
//! Blocks of the preventive-maintenance variant that involve the major level
//! or the PM service follow the same construction as their counterparts
//! without maintenance:
//!
//! | block | event | formula |
//! |---|---|---|
//! | `O1 → O3_WR` | `O` | `T13 ⊗ I ⊗ I` |
//! | `O2_WR → O3_WR` | `O` | `T23 ⊗ I ⊗ I` |
//! | `O3_WR → O3_WR` | `O` | `T33 ⊕ L ⊗ I + I ⊗ I ⊗ V` |
//! | `O3_WR → RF_WR` | `RF` | `T3r⁰ ⊗ I ⊗ I + e ⊗ Lr⁰γ ⊗ I` |
//! | `O3_WR → NRF_WR` | `NRF` | `T3nr⁰ ⊗ I ⊗ I + e ⊗ Lnr⁰γ ⊗ I` |
//! | `O3_WR → PM` | `I_PM` | `e ⊗ I ⊗ V⁰ ⊗ β²` |
//! | `O2_R → PM` | `PM` | `T23 e ⊗ I ⊗ β²` |
//! | `PM → PM` | `O` | `(L + L⁰γ) ⊕ S₂` |
//! | `PM → O1` | `O` | `α₁ ⊗ I ⊗ v ⊗ S₂⁰` |
//!
//! A unit reaching the major level while the repairperson waits at the
//! workplace goes straight into preventive maintenance, and completing
//! maintenance restores the unit to the minor level with the repairperson
//! leaving on a fresh vacation, exactly as after a corrective repair.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{kron_all, kron_sum, stationary_of_generator, GeneratorMatrix, Matrix, GENERATOR_ROW_SUM_TOL};
use crate::model::{build_layout, MacroState, MacroStateLayout, ShockModel, SystemSpec, Variant};

/// Mark attached to a transition.
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventLabel {
    /// No event.
    O,
    /// Repairable failure with the repairperson present; repair starts.
    RF_CR,
    /// Repairable failure while the repairperson is away.
    RF,
    /// Non-repairable failure with the repairperson present; immediate replacement.
    NRF_NU,
    /// Non-repairable failure while the repairperson is away.
    NRF,
    /// Return from vacation, nothing to do.
    I,
    /// Return from vacation and start of corrective repair.
    I_CR,
    /// Return from vacation and replacement.
    I_NU,
    /// Preventive maintenance starts with the repairperson present.
    PM,
    /// Return from vacation and start of preventive maintenance.
    I_PM,
}

impl EventLabel {
    pub const ALL: [EventLabel; 10] = [
        EventLabel::O,
        EventLabel::RF_CR,
        EventLabel::RF,
        EventLabel::NRF_NU,
        EventLabel::NRF,
        EventLabel::I,
        EventLabel::I_CR,
        EventLabel::I_NU,
        EventLabel::PM,
        EventLabel::I_PM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventLabel::O => "O",
            EventLabel::RF_CR => "RF_CR",
            EventLabel::RF => "RF",
            EventLabel::NRF_NU => "NRF_NU",
            EventLabel::NRF => "NRF",
            EventLabel::I => "I",
            EventLabel::I_CR => "I_CR",
            EventLabel::I_NU => "I_NU",
            EventLabel::PM => "PM",
            EventLabel::I_PM => "I_PM",
        }
    }

    /// Labels used by a variant.
    pub fn for_variant(variant: Variant) -> &'static [EventLabel] {
        match variant {
            Variant::NoPM => &Self::ALL[..8],
            Variant::PM => &Self::ALL,
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EventLabel::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown event label `{s}`")))
    }
}

/// Event sets counted by the mean-number-of-events measures.
pub mod event_sets {
    use super::EventLabel::{self, *};

    pub const REPAIRABLE_FAILURES: &[EventLabel] = &[RF_CR, RF];
    pub const NON_REPAIRABLE_FAILURES: &[EventLabel] = &[NRF, NRF_NU];
    pub const PREVENTIVE: &[EventLabel] = &[PM, I_PM];
    pub const CORRECTIVE: &[EventLabel] = &[RF_CR, I_CR];
    pub const INCORPORATIONS: &[EventLabel] = &[I_PM, I_NU, I, I_CR];
    pub const NEW_UNITS: &[EventLabel] = &[I_NU, NRF_NU];

    /// `(column suffix, events)` for the standard measures.
    pub const NAMED: [(&str, &[EventLabel]); 6] = [
        ("rf", REPAIRABLE_FAILURES),
        ("nrf", NON_REPAIRABLE_FAILURES),
        ("pm", PREVENTIVE),
        ("cr", CORRECTIVE),
        ("i", INCORPORATIONS),
        ("nu", NEW_UNITS),
    ];
}

/// One event-labelled transition block between two macro-states.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub event: EventLabel,
    pub from: MacroState,
    pub to: MacroState,
    pub matrix: Matrix,
}

/// Stationary law `ω` of the shock renewal process `L + L⁰γ`.
pub fn shock_stationary(shock: &ShockModel) -> Result<Vec<f64>> {
    let q = GeneratorMatrix::with_tolerance(shock.renewal_generator(), GENERATOR_ROW_SUM_TOL)?;
    stationary_of_generator(&q)
}

/// Every nonzero event block of a system's MMAP.
pub fn build_blocks(spec: &SystemSpec) -> Result<Vec<Block>> {
    let layout = build_layout(spec)?;
    Ok(BlockBuilder::new(spec, &layout).build())
}

struct BlockBuilder<'a> {
    spec: &'a SystemSpec,
    layout: &'a MacroStateLayout,
    ip: Matrix,
    iv: Matrix,
    shock_sub: Matrix,
    shock_renewal: Matrix,
    rep_shock: Matrix,
    nonrep_shock: Matrix,
    v_start: Matrix,
    v_sub: Matrix,
    v_exit: Matrix,
    a1: Matrix,
    blocks: Vec<Block>,
}

fn row(v: &[f64]) -> Matrix {
    Matrix::row_vector(v)
}

fn col(v: &[f64]) -> Matrix {
    Matrix::col_vector(v)
}

fn eye(n: usize) -> Matrix {
    Matrix::identity(n)
}

impl<'a> BlockBuilder<'a> {
    fn new(spec: &'a SystemSpec, layout: &'a MacroStateLayout) -> Self {
        let shock = &spec.shock;
        let gamma = row(shock.ph.alpha());
        BlockBuilder {
            spec,
            layout,
            ip: eye(shock.order()),
            iv: eye(spec.vacation.order()),
            shock_sub: shock.ph.subgen().clone(),
            shock_renewal: shock.renewal_generator(),
            rep_shock: col(&shock.rep_rates).matmul(&gamma),
            nonrep_shock: col(&shock.nonrep_rates).matmul(&gamma),
            v_start: row(spec.vacation.alpha()),
            v_sub: spec.vacation.subgen().clone(),
            v_exit: col(&spec.vacation.exit_rates()),
            a1: row(&spec.degradation.alpha_level(0)),
            blocks: Vec::new(),
        }
    }

    fn push(&mut self, event: EventLabel, from: MacroState, to: MacroState, matrix: Matrix) {
        let (r, c) = (self.layout.dims.macro_size(from), self.layout.dims.macro_size(to));
        assert_eq!((matrix.rows(), matrix.cols()), (r, c), "block {from}->{to} ({event}) has wrong shape");
        if !matrix.is_zero() {
            self.blocks.push(Block { event, from, to, matrix });
        }
    }

    /// `T_ll ⊕ L ⊗ I + I ⊗ I ⊗ V`: degradation, shock and vacation evolving
    /// without an event.
    fn away_self(&self, level: usize) -> Matrix {
        let t = self.spec.degradation.block(level, level);
        let n = t.rows();
        let tl = kron_sum(&t, &self.shock_sub).expect("square blocks");
        &kron_all(&[&tl, &self.iv]) + &kron_all(&[&eye(n), &self.ip, &self.v_sub])
    }

    /// Failure from level `level` while the repairperson is away.
    fn away_failure(&self, level: usize, repairable: bool) -> Matrix {
        let deg = &self.spec.degradation;
        let (internal, shock) = if repairable {
            (deg.rep_level(level), &self.rep_shock)
        } else {
            (deg.nonrep_level(level), &self.nonrep_shock)
        };
        let e = Matrix::ones_col(internal.len());
        &kron_all(&[&col(&internal), &self.ip, &self.iv]) + &kron_all(&[&e, shock, &self.iv])
    }

    fn build(mut self) -> Vec<Block> {
        use EventLabel as Ev;
        use MacroState::*;
        let spec = self.spec;
        let deg = &spec.degradation;
        let pm = spec.variant == Variant::PM;
        let n1 = deg.level_sizes[0];
        let n2 = deg.level_sizes[1];
        let beta1 = row(spec.corrective.alpha());
        let s1 = spec.corrective.subgen().clone();
        let s1_exit = col(&spec.corrective.exit_rates());

        // minor level, repairperson away
        let m = self.away_self(0);
        self.push(Ev::O, O1, O1, m);
        let m = kron_all(&[&eye(n1), &self.ip, &self.v_exit.matmul(&self.v_start)]);
        self.push(Ev::I, O1, O1, m);
        let m = kron_all(&[&deg.block(0, 1), &self.ip, &self.iv]);
        self.push(Ev::O, O1, O2WR, m);
        if pm {
            let m = kron_all(&[&deg.block(0, 2), &self.ip, &self.iv]);
            self.push(Ev::O, O1, O3WR, m);
        }
        let m = self.away_failure(0, true);
        self.push(Ev::RF, O1, RF, m);
        let m = self.away_failure(0, false);
        self.push(Ev::NRF, O1, NRF, m);

        // middle level, repairperson away
        let m = self.away_self(1);
        self.push(Ev::O, O2WR, O2WR, m);
        let m = kron_all(&[&eye(n2), &self.ip, &self.v_exit]);
        self.push(Ev::I, O2WR, O2R, m);
        if pm {
            let m = kron_all(&[&deg.block(1, 2), &self.ip, &self.iv]);
            self.push(Ev::O, O2WR, O3WR, m);
        }
        let m = self.away_failure(1, true);
        self.push(Ev::RF, O2WR, RF, m);
        let m = self.away_failure(1, false);
        self.push(Ev::NRF, O2WR, NRF, m);

        // middle level, repairperson waiting at the workplace
        let e2 = Matrix::ones_col(n2);
        let m = &kron_all(&[&deg.block(1, 1), &self.ip]) + &kron_all(&[&eye(n2), &self.shock_sub]);
        self.push(Ev::O, O2R, O2R, m);
        let m = &kron_all(&[&col(&deg.nonrep_level(1)), &self.a1, &self.ip, &self.v_start])
            + &kron_all(&[&e2, &self.a1, &self.nonrep_shock, &self.v_start]);
        self.push(Ev::NRF_NU, O2R, O1, m);
        let m = &kron_all(&[&col(&deg.rep_level(1)), &self.ip, &beta1])
            + &kron_all(&[&e2, &self.rep_shock, &beta1]);
        self.push(Ev::RF_CR, O2R, CR, m);

        // failures waiting for the repairperson
        let waiting = kron_sum(&self.shock_renewal, &self.v_sub).expect("square blocks");
        self.push(Ev::O, RF, RF, waiting.clone());
        let m = kron_all(&[&self.ip, &self.v_exit, &beta1]);
        self.push(Ev::I_CR, RF, CR, m);
        self.push(Ev::O, NRF, NRF, waiting);
        let m = kron_all(&[&self.a1, &self.ip, &self.v_exit.matmul(&self.v_start)]);
        self.push(Ev::I_NU, NRF, O1, m);

        // corrective repair
        let m = kron_sum(&self.shock_renewal, &s1).expect("square blocks");
        self.push(Ev::O, CR, CR, m);
        let m = kron_all(&[&self.a1, &self.ip, &self.v_start, &s1_exit]);
        self.push(Ev::O, CR, O1, m);

        if pm {
            let n3 = deg.level_sizes[2];
            let prev = spec.preventive.as_ref().expect("validated PM spec");
            let beta2 = row(prev.alpha());
            let s2_exit = col(&prev.exit_rates());

            let m = self.away_self(2);
            self.push(Ev::O, O3WR, O3WR, m);
            let m = self.away_failure(2, true);
            self.push(Ev::RF, O3WR, RF, m);
            let m = self.away_failure(2, false);
            self.push(Ev::NRF, O3WR, NRF, m);
            let m = kron_all(&[&Matrix::ones_col(n3), &self.ip, &self.v_exit, &beta2]);
            self.push(Ev::I_PM, O3WR, PM, m);

            let to_major = deg.block(1, 2).matmul(&Matrix::ones_col(n3));
            let m = kron_all(&[&to_major, &self.ip, &beta2]);
            self.push(Ev::PM, O2R, PM, m);

            let m = kron_sum(&self.shock_renewal, prev.subgen()).expect("square blocks");
            self.push(Ev::O, PM, PM, m);
            let m = kron_all(&[&self.a1, &self.ip, &self.v_start, &s2_exit]);
            self.push(Ev::O, PM, O1, m);
        }
        self.blocks
    }
}

/// The assembled process: one matrix per event and their sum.
#[derive(Clone, Debug)]
pub struct MmapRepresentation {
    pub layout: MacroStateLayout,
    pub blocks: Vec<Block>,
    pub d_by_event: BTreeMap<EventLabel, Matrix>,
    pub d_total: GeneratorMatrix,
}

impl MmapRepresentation {
    pub fn dim(&self) -> usize {
        self.layout.total_dim
    }

    /// `D^Y`; an all-zero matrix for labels the variant does not use.
    pub fn event_matrix(&self, label: EventLabel) -> Matrix {
        self.d_by_event.get(&label).cloned().unwrap_or_else(|| Matrix::zeros(self.dim(), self.dim()))
    }

    /// `Σ_{Y ∈ events} D^Y`.
    pub fn sum_events(&self, events: &[EventLabel]) -> Matrix {
        let mut acc = Matrix::zeros(self.dim(), self.dim());
        for ev in events {
            if let Some(m) = self.d_by_event.get(ev) {
                acc = &acc + m;
            }
        }
        acc
    }

    /// `(Σ_{Y ∈ events} D^Y) e`: per-state intensity of the event set.
    pub fn event_rates(&self, events: &[EventLabel]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for ev in events {
            if let Some(m) = self.d_by_event.get(ev) {
                for (o, s) in out.iter_mut().zip(m.row_sums()) {
                    *o += s;
                }
            }
        }
        out
    }

    /// Macro-state block `D_jk` of the generator.
    pub fn total_block(&self, from: MacroState, to: MacroState) -> Matrix {
        let (r, c) = (self.layout.range(from), self.layout.range(to));
        self.d_total.matrix().block(r.start, c.start, r.len(), c.len())
    }

    /// Ordered pairs `(j, k)` whose generator block has a nonzero entry.
    pub fn block_pattern(&self) -> Vec<(MacroState, MacroState)> {
        let mut out = Vec::new();
        for a in self.layout.states() {
            for b in self.layout.states() {
                if !self.total_block(a, b).is_zero() {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// `D^Y` as sparse CSV with header `row,col,value`.
    pub fn event_csv(&self, label: EventLabel) -> String {
        let m = self.event_matrix(label);
        let mut s = String::from("row,col,value\n");
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    s.push_str(&format!("{i},{j},{}\n", m[(i, j)]));
                }
            }
        }
        s
    }
}

/// Builds every `D^Y`, their sum, and checks the sum is a generator.
pub fn assemble_mmap(spec: &SystemSpec) -> Result<MmapRepresentation> {
    let layout = build_layout(spec)?;
    let blocks = BlockBuilder::new(spec, &layout).build();
    let n = layout.total_dim;

    let mut d_by_event: BTreeMap<EventLabel, Matrix> = EventLabel::for_variant(spec.variant)
        .iter()
        .map(|&e| (e, Matrix::zeros(n, n)))
        .collect();
    for b in &blocks {
        let (r, c) = (layout.range(b.from), layout.range(b.to));
        d_by_event.get_mut(&b.event).expect("variant label").add_block(r.start, c.start, &b.matrix);
    }
    let mut total = Matrix::zeros(n, n);
    for m in d_by_event.values() {
        total = &total + m;
    }
    for (row, sum) in total.row_sums().into_iter().enumerate() {
        if sum.abs() > GENERATOR_ROW_SUM_TOL {
            return Err(Error::AssemblyRowSum { row, sum });
        }
    }
    let d_total = GeneratorMatrix::new(total)?;
    Ok(MmapRepresentation { layout, blocks, d_by_event, d_total })
}

/// Initial law over the state space: a new unit, the repairperson on
/// vacation, the shock process in its stationary regime.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDistribution {
    pub theta: Vec<f64>,
}

/// `θ`: level `l`'s start sub-vector `α_l ⊗ ω ⊗ v` on the matching
/// vacation macro-state, zero elsewhere.
pub fn initial_distribution(spec: &SystemSpec) -> Result<InitialDistribution> {
    let layout = build_layout(spec)?;
    let omega = shock_stationary(&spec.shock)?;
    let mut theta = vec![0.0; layout.total_dim];
    let targets: &[(usize, MacroState)] = match spec.variant {
        Variant::NoPM => &[(0, MacroState::O1), (1, MacroState::O2WR)],
        Variant::PM => &[(0, MacroState::O1), (1, MacroState::O2WR), (2, MacroState::O3WR)],
    };
    for &(level, state) in targets {
        let block = kron_all(&[
            &row(&spec.degradation.alpha_level(level)),
            &row(&omega),
            &row(spec.vacation.alpha()),
        ]);
        let r = layout.range(state);
        theta[r].copy_from_slice(block.as_slice());
    }
    Ok(InitialDistribution { theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::kron;
    use crate::ph::PhaseType;
    use crate::presets;
    use MacroState::*;

    fn pm() -> SystemSpec {
        presets::pm_spec(5.8003, 5.8003)
    }

    fn nopm() -> SystemSpec {
        presets::nopm_spec(5.4502, 5.4502)
    }

    fn block(blocks: &[Block], ev: EventLabel, from: MacroState, to: MacroState) -> &Matrix {
        &blocks.iter().find(|b| b.event == ev && b.from == from && b.to == to).expect("block present").matrix
    }

    #[test]
    fn shock_stationary_examples() {
        let w = shock_stationary(&presets::shock()).unwrap();
        assert!((w[0] - 0.50847).abs() < 5e-6 && (w[1] - 0.49153).abs() < 5e-6);

        let single = ShockModel {
            ph: PhaseType::exponential(0.3).unwrap(),
            rep_rates: vec![0.1],
            nonrep_rates: vec![0.2],
        };
        assert_eq!(shock_stationary(&single).unwrap(), vec![1.0]);

        let sym = ShockModel {
            ph: PhaseType::new(vec![0.5, 0.5], Matrix::from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap())
                .unwrap(),
            rep_rates: vec![0.5, 0.5],
            nonrep_rates: vec![0.5, 0.5],
        };
        let w = shock_stationary(&sym).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn repair_start_block_row_sums() {
        let spec = nopm();
        let blocks = build_blocks(&spec).unwrap();
        let m = block(&blocks, EventLabel::RF_CR, O2R, CR);
        let n2 = spec.degradation.level_sizes[1];
        assert_eq!((m.rows(), m.cols()), (n2 * 2, 4));
        let t2r = spec.degradation.rep_level(1);
        for i in 0..n2 {
            for j in 0..2 {
                let expect = t2r[i] + spec.shock.rep_rates[j];
                assert!((m.row_sums()[i * 2 + j] - expect).abs() < 1e-15);
            }
        }
        // with the preventive grouping the middle level is two phases: a 4x4 block
        let pm_blocks = build_blocks(&pm()).unwrap();
        let m = block(&pm_blocks, EventLabel::RF_CR, O2R, CR);
        assert_eq!((m.rows(), m.cols()), (4, 4));
    }

    #[test]
    fn zero_repairable_rates_remove_rf_blocks() {
        let mut spec = nopm();
        let exit = spec.degradation.ph.exit_rates();
        spec.degradation.rep_rates = vec![0.0; 7];
        spec.degradation.nonrep_rates = exit;
        spec.shock.rep_rates = vec![0.0; 2];
        spec.shock.nonrep_rates = vec![0.1; 2];
        let blocks = build_blocks(&spec).unwrap();
        assert!(!blocks.iter().any(|b| matches!(b.event, EventLabel::RF | EventLabel::RF_CR)));
        let mmap = assemble_mmap(&spec).unwrap();
        assert!(mmap.event_matrix(EventLabel::RF).is_zero());
        assert!(mmap.event_matrix(EventLabel::RF_CR).is_zero());
    }

    #[test]
    fn waiting_block_rows_sum_to_vacation_exit() {
        let spec = pm();
        let blocks = build_blocks(&spec).unwrap();
        let m = block(&blocks, EventLabel::O, RF, RF);
        let exits = spec.vacation.exit_rates();
        for (idx, s) in m.row_sums().iter().enumerate() {
            assert!((s + exits[idx % 2]).abs() < 1e-13);
        }
    }

    #[test]
    fn pm_generator_is_conservative() {
        let mmap = assemble_mmap(&pm()).unwrap();
        assert_eq!(mmap.dim(), 48);
        assert!(mmap.d_total.matrix().row_sums().iter().all(|s| s.abs() < 1e-12));
        for (ev, m) in &mmap.d_by_event {
            for i in 0..48 {
                for j in 0..48 {
                    if *ev != EventLabel::O || i != j {
                        assert!(m[(i, j)] >= 0.0, "{ev} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn nopm_block_pattern() {
        let mmap = assemble_mmap(&nopm()).unwrap();
        let expect = vec![
            (O1, O1), (O1, O2WR), (O1, RF), (O1, NRF),
            (O2WR, O2WR), (O2WR, O2R), (O2WR, RF), (O2WR, NRF),
            (O2R, O1), (O2R, O2R), (O2R, CR),
            (RF, RF), (RF, CR),
            (NRF, O1), (NRF, NRF),
            (CR, O1), (CR, CR),
        ];
        assert_eq!(mmap.block_pattern(), expect);
    }

    #[test]
    fn pm_block_pattern_matches_generator_layout() {
        let mmap = assemble_mmap(&pm()).unwrap();
        // the example lifetime never jumps from phases 1-2 straight to 5-7
        assert!(mmap.total_block(O1, O3WR).is_zero());
        let expect = vec![
            (O1, O1), (O1, O2WR), (O1, RF), (O1, NRF),
            (O2WR, O2WR), (O2WR, O2R), (O2WR, O3WR), (O2WR, RF), (O2WR, NRF),
            (O2R, O1), (O2R, O2R), (O2R, PM), (O2R, CR),
            (O3WR, O3WR), (O3WR, RF), (O3WR, NRF), (O3WR, PM),
            (RF, RF), (RF, CR),
            (NRF, O1), (NRF, NRF),
            (PM, O1), (PM, PM),
            (CR, O1), (CR, CR),
        ];
        assert_eq!(mmap.block_pattern(), expect);
    }

    #[test]
    fn pm_event_lives_in_one_block() {
        let mmap = assemble_mmap(&pm()).unwrap();
        let d = mmap.event_matrix(EventLabel::PM);
        let (r, c) = (mmap.layout.range(O2R), mmap.layout.range(PM));
        for i in 0..48 {
            for j in 0..48 {
                if !(r.contains(&i) && c.contains(&j)) {
                    assert_eq!(d[(i, j)], 0.0);
                }
            }
        }
        assert!(!d.is_zero());
    }

    #[test]
    fn event_labels_per_variant() {
        assert_eq!(assemble_mmap(&nopm()).unwrap().d_by_event.len(), 8);
        assert_eq!(assemble_mmap(&pm()).unwrap().d_by_event.len(), 10);
        assert_eq!("i_pm".parse::<EventLabel>().unwrap(), EventLabel::I_PM);
        assert!("RF+CR".parse::<EventLabel>().is_err());
    }

    #[test]
    fn initial_distribution_examples() {
        let spec = pm();
        let layout = build_layout(&spec).unwrap();
        let theta = initial_distribution(&spec).unwrap().theta;
        let w = shock_stationary(&spec.shock).unwrap();
        let expect = kron(&kron(&row(&[1.0, 0.0]), &row(&w)), &row(&[1.0, 0.0]));
        assert_eq!(&theta[layout.range(O1)], expect.as_slice());
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(theta[8..].iter().all(|&x| x == 0.0));

        let mut s2 = pm();
        s2.degradation.ph = PhaseType::new(
            vec![0.0, 0.0, 0.3, 0.7, 0.0, 0.0, 0.0],
            s2.degradation.ph.subgen().clone(),
        )
        .unwrap();
        let theta = initial_distribution(&s2).unwrap().theta;
        for (i, &x) in theta.iter().enumerate() {
            assert!(x == 0.0 || layout.range(O2WR).contains(&i));
        }

        let mut s3 = pm();
        s3.degradation.ph = PhaseType::new(vec![1.0 / 7.0; 7], s3.degradation.ph.subgen().clone()).unwrap();
        let theta = initial_distribution(&s3).unwrap().theta;
        let support = theta.iter().filter(|&&x| x > 0.0).count();
        // vacation starts in phase 1 only, so half of each block is charged
        assert_eq!(support, (8 + 8 + 12) / 2);
        let touched: usize = [O1, O2WR, O3WR].iter().map(|&s| layout.range(s).len()).sum();
        assert_eq!(touched, 28);
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_dump_lists_nonzeros() {
        let mmap = assemble_mmap(&nopm()).unwrap();
        let csv = mmap.event_csv(EventLabel::I_CR);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("row,col,value"));
        let nz = mmap.event_matrix(EventLabel::I_CR).as_slice().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(lines.count(), nz);
    }

    #[test]
    fn vacation_phase_swap_conjugates_generator() {
        // a vacation law with both start phases charged so the swap is non-trivial
        let v = PhaseType::new(
            vec![0.3, 0.7],
            Matrix::from_rows(&[vec![-2.0, 1.5], vec![0.25, -4.0]]).unwrap(),
        )
        .unwrap();
        let swapped = PhaseType::new(
            vec![0.7, 0.3],
            Matrix::from_rows(&[vec![-4.0, 0.25], vec![1.5, -2.0]]).unwrap(),
        )
        .unwrap();
        for base in [pm(), nopm()] {
            let a = assemble_mmap(&base.with_vacation(v.clone())).unwrap();
            let b = assemble_mmap(&base.with_vacation(swapped.clone())).unwrap();
            let perm = vacation_swap_permutation(&a.layout);
            let n = a.dim();
            let da = a.d_total.matrix();
            let db = b.d_total.matrix();
            for i in 0..n {
                for j in 0..n {
                    assert!((da[(i, j)] - db[(perm[i], perm[j])]).abs() < 1e-14);
                }
            }
        }
    }

    /// Flat-index permutation induced by swapping the two vacation phases.
    fn vacation_swap_permutation(layout: &MacroStateLayout) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..layout.total_dim).collect();
        for e in &layout.entries {
            if matches!(e.state, O1 | O2WR | O3WR | RF | NRF) {
                for i in e.range() {
                    let local = i - e.offset;
                    perm[i] = e.offset + (local ^ 1);
                }
            }
        }
        perm
    }
}
