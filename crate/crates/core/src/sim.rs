//! Discrete-event simulation of the unit, repairperson and shock process.
//!
//! The simulator works from the component laws and the operating rules,
//! never from the assembled generator, so it can serve as an independent
//! check of the block construction:
//!
//! * a failed or non-repairable unit waits for the repairperson to come back
//!   from vacation; a middle-level unit makes the returning repairperson wait
//!   at the workplace; a minor-level unit sends them on a new vacation; with
//!   preventive maintenance a major-level unit is taken into maintenance;
//! * while the repairperson waits, a repairable failure starts corrective
//!   repair at once, a non-repairable failure is replaced at once, and
//!   passage to the major level starts maintenance at once;
//! * after a repair, maintenance or replacement a new unit starts and the
//!   repairperson leaves on a fresh vacation;
//! * shocks keep arriving while the unit is down and have no effect then;
//!   a failure caused by a shock restarts the shock process, an internal
//!   failure leaves it where it is.
//!
//! Standard errors come from batch means: each replication's observation
//! window is cut into [`BATCHES`] equal batches and all batches of all
//! replications are pooled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mmap::{shock_stationary, EventLabel};
use crate::model::{MacroState, SystemSpec, Variant};
use crate::ph::{exp_draw, pick, PhaseType};

pub const BATCHES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    /// Initial stretch excluded from the estimates.
    pub warmup: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { horizon: 2e5, replications: 1, seed: 1, warmup: 1e3 }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(Error::InvalidSimulation(format!("warmup must be nonnegative, got {}", self.warmup)));
        }
        if !(self.horizon.is_finite() && self.horizon > self.warmup) {
            return Err(Error::InvalidSimulation(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidSimulation("at least one replication is needed".into()));
        }
        Ok(())
    }
}

/// SplitMix64 output `k` for base seed `seed`: replication `k` is seeded with
/// `splitmix64(seed + (k + 1) · 0x9E3779B97F4A7C15)`.
pub fn replication_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_batches(values: impl Iterator<Item = f64>) -> Estimate {
        let v: Vec<f64> = values.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { mean, std_error: (var / n).sqrt() }
    }

    /// `|mean − value|` in standard errors; infinite if the error is zero
    /// and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationEstimates {
    pub states: Vec<MacroState>,
    pub labels: Vec<EventLabel>,
    /// Fraction of time per macro-state in each batch.
    pub batch_occupancy: Vec<Vec<f64>>,
    /// Events per unit time per label in each batch.
    pub batch_rates: Vec<Vec<f64>>,
    /// Simulated events, including unobserved warmup ones.
    pub total_events: u64,
}

impl SimulationEstimates {
    pub fn occupancy(&self, s: MacroState) -> Estimate {
        let k = self.states.iter().position(|&x| x == s);
        Estimate::from_batches(self.batch_occupancy.iter().map(|b| k.map_or(0.0, |k| b[k])))
    }

    /// Rate of the union of `events`.
    pub fn rate(&self, events: &[EventLabel]) -> Estimate {
        let idx: Vec<usize> =
            events.iter().filter_map(|e| self.labels.iter().position(|l| l == e)).collect();
        Estimate::from_batches(self.batch_rates.iter().map(|b| idx.iter().map(|&i| b[i]).sum()))
    }

    pub fn availability(&self) -> Estimate {
        let idx: Vec<usize> =
            self.states.iter().enumerate().filter(|(_, s)| s.is_operational()).map(|(i, _)| i).collect();
        Estimate::from_batches(self.batch_occupancy.iter().map(|b| idx.iter().map(|&i| b[i]).sum()))
    }

    /// Rows `quantity,estimate,std_error`.
    pub fn csv(&self) -> String {
        let mut s = String::from("quantity,estimate,std_error\n");
        for &st in &self.states {
            let e = self.occupancy(st);
            s.push_str(&format!("occupancy_{},{},{}\n", st.label(), e.mean, e.std_error));
        }
        let a = self.availability();
        s.push_str(&format!("availability,{},{}\n", a.mean, a.std_error));
        for &l in &self.labels {
            let e = self.rate(&[l]);
            s.push_str(&format!("rate_{},{},{}\n", l.name(), e.mean, e.std_error));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unit {
    Working(usize),
    Failed { repairable: bool },
    Repair(usize),
    Maintenance(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Repairperson {
    Away(usize),
    Waiting,
    Busy,
}

#[derive(Clone, Copy, Debug)]
enum Action {
    Degrade(usize),
    InternalFailure { repairable: bool },
    ShockMove(usize),
    ShockArrival,
    VacationMove(usize),
    VacationEnd,
    ServiceMove(usize),
    ServiceEnd,
}

/// Component laws in the form the event loop reads them.
struct Laws {
    variant: Variant,
    level_of: Vec<usize>,
    t: PhaseType,
    t_rep: Vec<f64>,
    t_nonrep: Vec<f64>,
    l: PhaseType,
    l_rep: Vec<f64>,
    l_nonrep: Vec<f64>,
    omega: Vec<f64>,
    v: PhaseType,
    s1: PhaseType,
    s2: Option<PhaseType>,
    new_unit: Vec<f64>,
}

impl Laws {
    fn new(spec: &SystemSpec) -> Result<Laws> {
        let report = spec.validate();
        if !report.is_valid() {
            return Err(Error::InvalidSpec(report));
        }
        let deg = &spec.degradation;
        let n = deg.order();
        let mut new_unit: Vec<f64> = (0..n).map(|i| if deg.level_of(i) == 0 { deg.ph.alpha()[i] } else { 0.0 }).collect();
        let mass: f64 = new_unit.iter().sum();
        if mass <= 0.0 {
            return Err(Error::InvalidSimulation("a new unit must start at the minor level".into()));
        }
        new_unit.iter_mut().for_each(|w| *w /= mass);
        Ok(Laws {
            variant: spec.variant,
            level_of: (0..n).map(|i| deg.level_of(i)).collect(),
            t: deg.ph.clone(),
            t_rep: deg.rep_rates.clone(),
            t_nonrep: deg.nonrep_rates.clone(),
            l: spec.shock.ph.clone(),
            l_rep: spec.shock.rep_rates.clone(),
            l_nonrep: spec.shock.nonrep_rates.clone(),
            omega: shock_stationary(&spec.shock)?,
            v: spec.vacation.clone(),
            s1: spec.corrective.clone(),
            s2: spec.preventive.clone(),
            new_unit,
        })
    }

    fn is_major(&self, phase: usize) -> bool {
        self.variant == Variant::PM && self.level_of[phase] == 2
    }
}

struct World<'a, R: Rng> {
    laws: &'a Laws,
    rng: R,
    unit: Unit,
    person: Repairperson,
    shock: usize,
}

impl<'a, R: Rng> World<'a, R> {
    fn macro_state(&self) -> MacroState {
        match (self.unit, self.person) {
            (Unit::Working(i), Repairperson::Away(_)) => match self.laws.level_of[i] {
                0 => MacroState::O1,
                1 => MacroState::O2WR,
                _ => MacroState::O3WR,
            },
            (Unit::Working(_), _) => MacroState::O2R,
            (Unit::Failed { repairable: true }, _) => MacroState::RF,
            (Unit::Failed { repairable: false }, _) => MacroState::NRF,
            (Unit::Repair(_), _) => MacroState::CR,
            (Unit::Maintenance(_), _) => MacroState::PM,
        }
    }

    fn collect(&self, out: &mut Vec<(f64, Action)>) {
        out.clear();
        let laws = self.laws;
        let lrow = laws.l.subgen().row(self.shock);
        for (j, &r) in lrow.iter().enumerate() {
            if j != self.shock && r > 0.0 {
                out.push((r, Action::ShockMove(j)));
            }
        }
        let hit = laws.l_rep[self.shock] + laws.l_nonrep[self.shock];
        if hit > 0.0 {
            out.push((hit, Action::ShockArrival));
        }
        if let Repairperson::Away(k) = self.person {
            let row = laws.v.subgen().row(k);
            for (k2, &r) in row.iter().enumerate() {
                if k2 != k && r > 0.0 {
                    out.push((r, Action::VacationMove(k2)));
                }
            }
            let exit = -row.iter().sum::<f64>();
            if exit > 0.0 {
                out.push((exit, Action::VacationEnd));
            }
        }
        let service = match self.unit {
            Unit::Working(i) => {
                for (i2, &r) in laws.t.subgen().row(i).iter().enumerate() {
                    if i2 != i && r > 0.0 {
                        out.push((r, Action::Degrade(i2)));
                    }
                }
                if laws.t_rep[i] > 0.0 {
                    out.push((laws.t_rep[i], Action::InternalFailure { repairable: true }));
                }
                if laws.t_nonrep[i] > 0.0 {
                    out.push((laws.t_nonrep[i], Action::InternalFailure { repairable: false }));
                }
                None
            }
            Unit::Failed { .. } => None,
            Unit::Repair(s) => Some((&laws.s1, s)),
            Unit::Maintenance(s) => Some((laws.s2.as_ref().expect("maintenance law"), s)),
        };
        if let Some((ph, s)) = service {
            let row = ph.subgen().row(s);
            for (s2, &r) in row.iter().enumerate() {
                if s2 != s && r > 0.0 {
                    out.push((r, Action::ServiceMove(s2)));
                }
            }
            let exit = -row.iter().sum::<f64>();
            if exit > 0.0 {
                out.push((exit, Action::ServiceEnd));
            }
        }
    }

    fn new_unit(&mut self) -> Unit {
        Unit::Working(pick(&mut self.rng, &self.laws.new_unit))
    }

    fn new_vacation(&mut self) -> Repairperson {
        Repairperson::Away(pick(&mut self.rng, self.laws.v.alpha()))
    }

    /// The unit fails while working; returns the event label.
    fn fail(&mut self, repairable: bool) -> EventLabel {
        match self.person {
            Repairperson::Away(_) => {
                self.unit = Unit::Failed { repairable };
                if repairable {
                    EventLabel::RF
                } else {
                    EventLabel::NRF
                }
            }
            _ if repairable => {
                self.unit = Unit::Repair(pick(&mut self.rng, self.laws.s1.alpha()));
                self.person = Repairperson::Busy;
                EventLabel::RF_CR
            }
            _ => {
                self.unit = self.new_unit();
                self.person = self.new_vacation();
                EventLabel::NRF_NU
            }
        }
    }

    fn start_maintenance(&mut self) {
        let s2 = self.laws.s2.as_ref().expect("maintenance law");
        self.unit = Unit::Maintenance(pick(&mut self.rng, s2.alpha()));
        self.person = Repairperson::Busy;
    }

    fn apply(&mut self, action: Action) -> EventLabel {
        let laws = self.laws;
        match action {
            Action::ShockMove(j) => {
                self.shock = j;
                EventLabel::O
            }
            Action::ShockArrival => {
                let j = self.shock;
                let rep = laws.l_rep[j];
                let repairable = self.rng.gen::<f64>() * (rep + laws.l_nonrep[j]) < rep;
                self.shock = pick(&mut self.rng, laws.l.alpha());
                if matches!(self.unit, Unit::Working(_)) {
                    self.fail(repairable)
                } else {
                    EventLabel::O
                }
            }
            Action::InternalFailure { repairable } => self.fail(repairable),
            Action::Degrade(i2) => {
                if self.person == Repairperson::Waiting && laws.is_major(i2) {
                    self.start_maintenance();
                    EventLabel::PM
                } else {
                    self.unit = Unit::Working(i2);
                    EventLabel::O
                }
            }
            Action::VacationMove(k2) => {
                self.person = Repairperson::Away(k2);
                EventLabel::O
            }
            Action::VacationEnd => match self.unit {
                Unit::Working(i) if laws.level_of[i] == 0 => {
                    self.person = self.new_vacation();
                    EventLabel::I
                }
                Unit::Working(i) if laws.is_major(i) => {
                    self.start_maintenance();
                    EventLabel::I_PM
                }
                Unit::Working(_) => {
                    self.person = Repairperson::Waiting;
                    EventLabel::I
                }
                Unit::Failed { repairable: true } => {
                    self.unit = Unit::Repair(pick(&mut self.rng, laws.s1.alpha()));
                    self.person = Repairperson::Busy;
                    EventLabel::I_CR
                }
                Unit::Failed { repairable: false } => {
                    self.unit = self.new_unit();
                    self.person = self.new_vacation();
                    EventLabel::I_NU
                }
                Unit::Repair(_) | Unit::Maintenance(_) => unreachable!("repairperson is busy"),
            },
            Action::ServiceMove(s2) => {
                self.unit = match self.unit {
                    Unit::Repair(_) => Unit::Repair(s2),
                    Unit::Maintenance(_) => Unit::Maintenance(s2),
                    other => other,
                };
                EventLabel::O
            }
            Action::ServiceEnd => {
                self.unit = self.new_unit();
                self.person = self.new_vacation();
                EventLabel::O
            }
        }
    }
}

struct Accumulator {
    warmup: f64,
    width: f64,
    occupancy: Vec<Vec<f64>>,
    counts: Vec<Vec<f64>>,
}

impl Accumulator {
    fn batch_of(&self, t: f64) -> usize {
        (((t - self.warmup) / self.width) as usize).min(BATCHES - 1)
    }

    fn dwell(&mut self, state: usize, mut t0: f64, t1: f64) {
        t0 = t0.max(self.warmup);
        while t0 < t1 {
            let b = self.batch_of(t0);
            let end = (self.warmup + (b + 1) as f64 * self.width).min(t1);
            let end = if b == BATCHES - 1 { t1 } else { end };
            self.occupancy[b][state] += end - t0;
            t0 = end;
        }
    }

    fn event(&mut self, label: usize, t: f64) {
        if t >= self.warmup {
            let b = self.batch_of(t);
            self.counts[b][label] += 1.0;
        }
    }
}

fn run_replication(laws: &Laws, states: &[MacroState], cfg: &SimulationConfig, seed: u64) -> (Accumulator, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Unit::Working(pick(&mut rng, laws.t.alpha()));
    let shock = pick(&mut rng, &laws.omega);
    let person = Repairperson::Away(pick(&mut rng, laws.v.alpha()));
    let mut world = World { laws, rng, unit, person, shock };

    let width = (cfg.horizon - cfg.warmup) / BATCHES as f64;
    let mut acc = Accumulator {
        warmup: cfg.warmup,
        width,
        occupancy: vec![vec![0.0; states.len()]; BATCHES],
        counts: vec![vec![0.0; EventLabel::ALL.len()]; BATCHES],
    };
    let state_index = |s: MacroState| states.iter().position(|&x| x == s).expect("state in layout");

    let mut buf = Vec::with_capacity(16);
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        world.collect(&mut buf);
        let total: f64 = buf.iter().map(|(r, _)| r).sum();
        let dt = exp_draw(&mut world.rng, total);
        let current = state_index(world.macro_state());
        if t + dt >= cfg.horizon {
            acc.dwell(current, t, cfg.horizon);
            break;
        }
        acc.dwell(current, t, t + dt);
        t += dt;
        let mut u = world.rng.gen::<f64>() * total;
        let mut chosen = buf[buf.len() - 1].1;
        for &(r, a) in &buf {
            if u < r {
                chosen = a;
                break;
            }
            u -= r;
        }
        let label = world.apply(chosen);
        events += 1;
        acc.event(label as usize, t);
    }
    (acc, events)
}

/// Simulates `cfg.replications` independent paths in parallel.
pub fn simulate(spec: &SystemSpec, cfg: &SimulationConfig) -> Result<SimulationEstimates> {
    cfg.validate()?;
    let laws = Laws::new(spec)?;
    let states = MacroState::ordered(spec.variant).to_vec();
    let runs: Vec<(Accumulator, u64)> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| run_replication(&laws, &states, cfg, replication_seed(cfg.seed, k)))
        .collect();

    let labels = EventLabel::for_variant(spec.variant).to_vec();
    let mut batch_occupancy = Vec::with_capacity(BATCHES * runs.len());
    let mut batch_rates = Vec::with_capacity(BATCHES * runs.len());
    let mut total_events = 0;
    for (acc, n) in runs {
        total_events += n;
        for b in 0..BATCHES {
            batch_occupancy.push(acc.occupancy[b].iter().map(|x| x / acc.width).collect());
            batch_rates.push(labels.iter().map(|&l| acc.counts[b][l as usize] / acc.width).collect());
        }
    }
    Ok(SimulationEstimates { states, labels, batch_occupancy, batch_rates, total_events })
}
