//! Transient and stationary laws of the assembled process and the
//! reliability measures built on them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::{
    check_time, expm_generator, integral_of_exp, stationary_of_generator, uniformized_vector, Matrix,
    UniformizationOptions,
};
use crate::mmap::{assemble_mmap, event_sets, initial_distribution, EventLabel, InitialDistribution, MmapRepresentation};
use crate::model::{MacroState, MacroStateLayout, SystemSpec};
use crate::ph::PhaseType;

/// Agreement required between the block recursion and the direct solve.
pub const CROSS_CHECK_TOL: f64 = 1e-10;
/// Largest admissible `‖πD‖∞`.
pub const SOLVER_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TransientState {
    pub t: f64,
    pub p: Vec<f64>,
}

/// Stationary law together with the matrices of the block recursion.
#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub pi: Vec<f64>,
    pub pi_by_macro: Vec<(MacroState, Vec<f64>)>,
    /// `R_k` with `π_k = π₁ R_k`; the first entry is the identity for `O1`.
    pub r: Vec<(MacroState, Matrix)>,
    /// Nonzero `G_jk = −D_jk D_kk⁻¹`.
    pub g: Vec<((MacroState, MacroState), Matrix)>,
}

impl StationaryResult {
    pub fn macro_mass(&self, s: MacroState) -> f64 {
        self.pi_by_macro.iter().find(|(m, _)| *m == s).map_or(0.0, |(_, v)| v.iter().sum())
    }

    pub fn masses(&self) -> Vec<(MacroState, f64)> {
        self.pi_by_macro.iter().map(|(m, v)| (*m, v.iter().sum())).collect()
    }
}

/// `θ · exp(D t)`.
pub fn transient(mmap: &MmapRepresentation, theta: &InitialDistribution, t: f64) -> Result<TransientState> {
    let p = uniformized_vector(mmap.d_total.matrix(), &theta.theta, t, UniformizationOptions::default())?;
    Ok(TransientState { t, p })
}

/// Transient law on a nondecreasing grid, stepping from one point to the next.
pub fn transient_grid(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    times: &[f64],
) -> Result<Vec<TransientState>> {
    check_grid(times)?;
    let q = mmap.d_total.matrix();
    let mut out = Vec::with_capacity(times.len());
    let mut p = theta.theta.clone();
    let mut prev = 0.0;
    for &t in times {
        p = uniformized_vector(q, &p, t - prev, UniformizationOptions::default())?;
        prev = t;
        out.push(TransientState { t, p: p.clone() });
    }
    Ok(out)
}

fn check_grid(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        check_time(t)?;
        if t < prev {
            return Err(Error::Config(format!("time grid must be nondecreasing ({t} after {prev})")));
        }
        prev = t;
    }
    Ok(())
}

/// Block recursion over the macro-states followed by the boundary solve for
/// `π₁`, cross-checked against the direct solve of the full generator.
pub fn stationary(mmap: &MmapRepresentation) -> Result<StationaryResult> {
    let res = stationary_block_recursion(mmap)?;
    let direct = stationary_of_generator(&mmap.d_total)?;
    let deviation = res.pi.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if deviation > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck { deviation });
    }
    let residual = mmap.d_total.matrix().left_mul(&res.pi).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if residual > SOLVER_RESIDUAL_TOL {
        return Err(Error::CrossCheck { deviation: residual });
    }
    Ok(res)
}

/// The recursion alone. Every macro-state other than the first must be
/// entered only from earlier macro-states in the layout order.
pub fn stationary_block_recursion(mmap: &MmapRepresentation) -> Result<StationaryResult> {
    let layout = &mmap.layout;
    let states: Vec<MacroState> = layout.states().collect();
    let k = states.len();
    for (ki, &to) in states.iter().enumerate().skip(1) {
        for &from in &states[ki + 1..] {
            if !mmap.total_block(from, to).is_zero() {
                return Err(Error::Dimension(format!(
                    "block recursion needs forward entries only, found {from} -> {to}"
                )));
            }
        }
    }

    let first = states[0];
    let n1 = layout.range(first).len();
    let mut r: Vec<(MacroState, Matrix)> = vec![(first, Matrix::identity(n1))];
    let mut g = Vec::new();
    for ki in 1..k {
        let to = states[ki];
        let dkk_inv = mmap
            .total_block(to, to)
            .inverse()
            .map_err(|_| Error::SingularDiagonalBlock(to.label().to_string()))?;
        let mut rk = Matrix::zeros(n1, layout.range(to).len());
        for (ji, &from) in states.iter().enumerate().take(ki) {
            let djk = mmap.total_block(from, to);
            if djk.is_zero() {
                continue;
            }
            let gjk = djk.matmul(&dkk_inv).scale(-1.0);
            rk = &rk + &r[ji].1.matmul(&gjk);
            g.push(((from, to), gjk));
        }
        r.push((to, rk));
    }

    let mut a = mmap.total_block(first, first);
    let mut norm = vec![1.0; n1];
    for (s, rk) in r.iter().skip(1) {
        a = &a + &rk.matmul(&mmap.total_block(*s, first));
        for (acc, v) in norm.iter_mut().zip(rk.row_sums()) {
            *acc += v;
        }
    }
    for (i, v) in norm.iter().enumerate() {
        a[(i, n1 - 1)] = *v;
    }
    let mut rhs = vec![0.0; n1];
    rhs[n1 - 1] = 1.0;
    let pi1 = a.solve_left(&rhs).map_err(|e| match e {
        Error::Singular(msg) => Error::Reducible(msg),
        other => other,
    })?;

    let mut pi = Vec::with_capacity(layout.total_dim);
    let mut pi_by_macro = Vec::with_capacity(k);
    for (s, rk) in &r {
        let block = rk.left_mul(&pi1);
        pi.extend_from_slice(&block);
        pi_by_macro.push((*s, block));
    }
    Ok(StationaryResult { pi, pi_by_macro, r, g })
}

/// Probability of the operational macro-states.
pub fn availability(layout: &MacroStateLayout, p: &[f64]) -> f64 {
    layout.operational_indices().iter().map(|&i| p[i]).sum()
}

/// Time to the first visit of a failure or maintenance state, as a
/// phase-type law on the operational states.
#[derive(Clone, Debug)]
pub struct ReliabilityModel {
    /// Flat indices of the operational states, in layout order.
    pub states: Vec<usize>,
    pub ph: PhaseType,
}

impl ReliabilityModel {
    pub fn reliability(&self, t: f64) -> Result<f64> {
        self.ph.survival(t)
    }

    /// Reliability on a nondecreasing grid by stepping the restricted law.
    pub fn reliability_grid(&self, times: &[f64]) -> Result<Vec<f64>> {
        check_grid(times)?;
        let mut p = self.ph.alpha().to_vec();
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            p = uniformized_vector(self.ph.subgen(), &p, t - prev, UniformizationOptions::default())?;
            prev = t;
            out.push(p.iter().sum::<f64>().clamp(0.0, 1.0));
        }
        Ok(out)
    }

    pub fn mean_time_to_failure(&self) -> Result<f64> {
        self.ph.mean()
    }
}

/// `θ'` and `D' = (D^O + D^I)` restricted to the operational states.
pub fn reliability_ph(mmap: &MmapRepresentation, theta: &InitialDistribution) -> Result<ReliabilityModel> {
    let states = mmap.layout.operational_indices();
    let inner = mmap.sum_events(&[EventLabel::O, EventLabel::I]).select(&states);
    let mut alpha: Vec<f64> = states.iter().map(|&i| theta.theta[i]).collect();
    let mass: f64 = alpha.iter().sum();
    if mass <= 0.0 {
        return Err(Error::InvalidSimulation("initial law puts no mass on operational states".into()));
    }
    if (mass - 1.0).abs() > 1e-12 {
        alpha.iter_mut().for_each(|a| *a /= mass);
    }
    Ok(ReliabilityModel { states, ph: PhaseType::new(alpha, inner)? })
}

/// Which failure family a rate of occurrence refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Repairable,
    NonRepairable,
}

impl FailureKind {
    pub fn events(self) -> &'static [EventLabel] {
        match self {
            FailureKind::Repairable => event_sets::REPAIRABLE_FAILURES,
            FailureKind::NonRepairable => event_sets::NON_REPAIRABLE_FAILURES,
        }
    }
}

/// `p · (Σ D^Y) e` over the family's events.
pub fn rocof(mmap: &MmapRepresentation, p: &[f64], kind: FailureKind) -> f64 {
    event_rate(mmap, p, kind.events())
}

/// `p · (Σ_{Y ∈ events} D^Y) e`.
pub fn event_rate(mmap: &MmapRepresentation, p: &[f64], events: &[EventLabel]) -> f64 {
    dot(p, &mmap.event_rates(events))
}

/// Stationary count of the events per unit time.
pub fn mean_events_rate(stationary: &StationaryResult, mmap: &MmapRepresentation, events: &[EventLabel]) -> f64 {
    event_rate(mmap, &stationary.pi, events)
}

/// `θ ∫₀ᵗ exp(D u) du · (Σ D^Y) e`.
pub fn mean_events(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    events: &[EventLabel],
    t: f64,
) -> Result<f64> {
    integrated(mmap, theta, &mmap.event_rates(events), t)
}

/// `θ ∫₀ᵗ exp(D u) du · c` for any column `c`.
pub fn integrated(mmap: &MmapRepresentation, theta: &InitialDistribution, c: &[f64], t: f64) -> Result<f64> {
    let j = integral_of_exp(mmap.d_total.matrix(), t)?;
    Ok(dot(&j.left_mul(&theta.theta), c))
}

/// `θ ∫₀^{t_k} exp(D u) du · c_i` for every column `c_i` and every grid
/// point, accumulated segment by segment. Returns one row per time.
pub fn integrated_grid(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    columns: &[Vec<f64>],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_grid(times)?;
    let q = mmap.d_total.matrix();
    let mut cache: HashMap<u64, Vec<Vec<f64>>> = HashMap::new();
    let mut p = theta.theta.clone();
    let mut acc = vec![0.0; columns.len()];
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - prev;
        if dt > 0.0 {
            let jc = match cache.get(&dt.to_bits()) {
                Some(v) => v,
                None => {
                    let j = integral_of_exp(q, dt)?;
                    let v = columns.iter().map(|c| j.right_mul(c)).collect();
                    cache.entry(dt.to_bits()).or_insert(v)
                }
            };
            for (a, v) in acc.iter_mut().zip(jc) {
                *a += dot(&p, v);
            }
            p = uniformized_vector(q, &p, dt, UniformizationOptions::default())?;
        }
        prev = t;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Mean counts through `θ(exp(Dt) − I − t eπ)(D − eπ)⁻¹ (Σ D^Y) e`.
pub fn mean_events_closed_form(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    pi: &[f64],
    events: &[EventLabel],
    t: f64,
) -> Result<f64> {
    let n = mmap.dim();
    let d = mmap.d_total.matrix();
    let e_pi = Matrix::from_fn(n, n, |_, j| pi[j]);
    let core = &(&expm_generator(&mmap.d_total, t)? - &Matrix::identity(n)) - &e_pi.scale(t);
    let x = (d - &e_pi).solve(&Matrix::col_vector(&mmap.event_rates(events)))?;
    Ok(dot(&core.left_mul(&theta.theta), x.as_slice()))
}

/// Parses `RF+RF_CR` style event sets.
pub fn parse_event_set(s: &str) -> Result<Vec<EventLabel>> {
    let mut out = Vec::new();
    for tok in s.split('+').filter(|t| !t.trim().is_empty()) {
        let ev: EventLabel = tok.parse()?;
        if !out.contains(&ev) {
            out.push(ev);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("empty event set `{s}`")));
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything derived once from a spec.
#[derive(Clone, Debug)]
pub struct SystemAnalysis {
    pub spec: SystemSpec,
    pub mmap: MmapRepresentation,
    pub theta: InitialDistribution,
    pub stationary: StationaryResult,
}

/// One row of a measure sweep. `t = None` marks the stationary regime, where
/// the counts are rates per unit time and the reliability is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureRow {
    pub t: Option<f64>,
    pub availability: f64,
    pub reliability: f64,
    pub rocof_rf: f64,
    pub rocof_nrf: f64,
    /// `(suffix, value)` for each set in [`event_sets::NAMED`].
    pub mean_events: Vec<(&'static str, f64)>,
}

impl MeasureRow {
    pub fn csv_header() -> String {
        let mut h = String::from("t,availability,reliability,rocof_rf,rocof_nrf");
        for (name, _) in event_sets::NAMED {
            h.push_str(",mn_");
            h.push_str(name);
        }
        h
    }

    pub fn csv_line(&self) -> String {
        let mut s = match self.t {
            Some(t) => format!("{t}"),
            None => "inf".to_string(),
        };
        for v in [self.availability, self.reliability, self.rocof_rf, self.rocof_nrf] {
            s.push_str(&format!(",{v}"));
        }
        for (_, v) in &self.mean_events {
            s.push_str(&format!(",{v}"));
        }
        s
    }
}

impl SystemAnalysis {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let mmap = assemble_mmap(spec)?;
        let theta = initial_distribution(spec)?;
        let stationary = stationary(&mmap)?;
        Ok(SystemAnalysis { spec: spec.clone(), mmap, theta, stationary })
    }

    pub fn layout(&self) -> &MacroStateLayout {
        &self.mmap.layout
    }

    pub fn stationary_availability(&self) -> f64 {
        availability(self.layout(), &self.stationary.pi)
    }

    pub fn mean_events_rate(&self, events: &[EventLabel]) -> f64 {
        mean_events_rate(&self.stationary, &self.mmap, events)
    }

    pub fn measures_grid(&self, times: &[f64]) -> Result<Vec<MeasureRow>> {
        let states = transient_grid(&self.mmap, &self.theta, times)?;
        let rel = reliability_ph(&self.mmap, &self.theta)?.reliability_grid(times)?;
        let columns: Vec<Vec<f64>> = event_sets::NAMED.iter().map(|(_, ev)| self.mmap.event_rates(ev)).collect();
        let counts = integrated_grid(&self.mmap, &self.theta, &columns, times)?;
        Ok(states
            .into_iter()
            .zip(rel)
            .zip(counts)
            .map(|((st, r), c)| MeasureRow {
                t: Some(st.t),
                availability: availability(self.layout(), &st.p),
                reliability: r,
                rocof_rf: rocof(&self.mmap, &st.p, FailureKind::Repairable),
                rocof_nrf: rocof(&self.mmap, &st.p, FailureKind::NonRepairable),
                mean_events: event_sets::NAMED.iter().map(|(n, _)| *n).zip(c).collect(),
            })
            .collect())
    }

    pub fn stationary_measures(&self) -> MeasureRow {
        let pi = &self.stationary.pi;
        MeasureRow {
            t: None,
            availability: availability(self.layout(), pi),
            reliability: 0.0,
            rocof_rf: rocof(&self.mmap, pi, FailureKind::Repairable),
            rocof_nrf: rocof(&self.mmap, pi, FailureKind::NonRepairable),
            mean_events: event_sets::NAMED.iter().map(|(n, ev)| (*n, self.mean_events_rate(ev))).collect(),
        }
    }
}
