//! Rewards and costs: the per-state net reward vector and the cumulative
//! and long-run functionals built on it.

use crate::analysis::{dot, integrated, integrated_grid, mean_events, SystemAnalysis};
use crate::error::{Error, Result};
use crate::mmap::{event_sets, InitialDistribution, MmapRepresentation};
use crate::model::{EconomicSpec, MacroState, MacroStateLayout};

/// Net reward rate earned in each state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetRewardVector {
    pub nr: Vec<f64>,
}

/// Operational states earn `B` less the degradation cost of their phase (and
/// the idle cost while the repairperson waits at the workplace); failure
/// states cost `A`, plus the service cost of the current repair phase.
pub fn net_reward_vector(layout: &MacroStateLayout, econ: &EconomicSpec) -> Result<NetRewardVector> {
    let report = econ.validate();
    if !report.is_valid() {
        return Err(Error::InvalidEconomics(report.to_string().trim_end().to_string()));
    }
    let dims = &layout.dims;
    let levels = dims.levels.len();
    if econ.level_costs.len() != levels {
        return Err(Error::InvalidEconomics(format!(
            "{} level cost vectors for {levels} degradation levels",
            econ.level_costs.len()
        )));
    }
    for (l, (c, &n)) in econ.level_costs.iter().zip(&dims.levels).enumerate() {
        if c.len() != n {
            return Err(Error::InvalidEconomics(format!("level_costs[{l}] has {} entries, level has {n} phases", c.len())));
        }
    }
    if econ.corrective_cost.len() != dims.corrective {
        return Err(Error::InvalidEconomics(format!(
            "cr_cost has {} entries, corrective repair has {} phases",
            econ.corrective_cost.len(),
            dims.corrective
        )));
    }
    if layout.entry(MacroState::PM).is_some() && econ.preventive_cost.len() != dims.preventive {
        return Err(Error::InvalidEconomics(format!(
            "pm_cost has {} entries, preventive maintenance has {} phases",
            econ.preventive_cost.len(),
            dims.preventive
        )));
    }

    let (b, a) = (econ.reward, econ.downtime_cost);
    let mut nr = Vec::with_capacity(layout.total_dim);
    for e in &layout.entries {
        // trailing product of shock and vacation/service phases per leading index
        let block: Vec<f64> = match e.state {
            MacroState::O1 => per_phase(&econ.level_costs[0], dims.shock * dims.vacation, |c| b - c),
            MacroState::O2WR => per_phase(&econ.level_costs[1], dims.shock * dims.vacation, |c| b - c),
            MacroState::O2R => per_phase(&econ.level_costs[1], dims.shock, |c| b - econ.idle_cost - c),
            MacroState::O3WR => per_phase(&econ.level_costs[2], dims.shock * dims.vacation, |c| b - c),
            MacroState::RF | MacroState::NRF => vec![-a; e.size],
            MacroState::PM => service(&econ.preventive_cost, dims.shock, a),
            MacroState::CR => service(&econ.corrective_cost, dims.shock, a),
        };
        debug_assert_eq!(block.len(), e.size);
        nr.extend(block);
    }
    Ok(NetRewardVector { nr })
}

fn per_phase(costs: &[f64], repeat: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    costs.iter().flat_map(|&c| std::iter::repeat_n(f(c), repeat)).collect()
}

fn service(costs: &[f64], shock: usize, a: f64) -> Vec<f64> {
    (0..shock).flat_map(|_| costs.iter().map(move |&c| -a - c)).collect()
}

/// `Φ(t) = θ ∫₀ᵗ exp(D u) du · nr`.
pub fn expected_net_reward(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    nr: &NetRewardVector,
    t: f64,
) -> Result<f64> {
    integrated(mmap, theta, &nr.nr, t)
}

/// `Ψ(t)`: `Φ(t)` less the fixed charges of the expected event counts,
/// including the initial unit.
pub fn total_net_reward(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    nr: &NetRewardVector,
    econ: &EconomicSpec,
    t: f64,
) -> Result<f64> {
    let phi = expected_net_reward(mmap, theta, nr, t)?;
    let f = &econ.fixed;
    let mut psi = phi - f.nu;
    for (cost, events) in [
        (f.nu, event_sets::NEW_UNITS),
        (f.cr, event_sets::CORRECTIVE),
        (f.pm, event_sets::PREVENTIVE),
        (f.i, event_sets::INCORPORATIONS),
    ] {
        if cost != 0.0 {
            psi -= cost * mean_events(mmap, theta, events, t)?;
        }
    }
    Ok(psi)
}

/// `Γ(t) = Ψ(t) / t`.
pub fn average_net_reward(
    mmap: &MmapRepresentation,
    theta: &InitialDistribution,
    nr: &NetRewardVector,
    econ: &EconomicSpec,
    t: f64,
) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(total_net_reward(mmap, theta, nr, econ, t)? / t)
}

/// Long-run net reward per unit time `Γ = π·nr − Σ f_Y · (event rate)`.
pub fn stationary_net_reward(analysis: &SystemAnalysis, nr: &NetRewardVector, econ: &EconomicSpec) -> f64 {
    let f = &econ.fixed;
    dot(&analysis.stationary.pi, &nr.nr)
        - f.nu * analysis.mean_events_rate(event_sets::NEW_UNITS)
        - f.cr * analysis.mean_events_rate(event_sets::CORRECTIVE)
        - f.pm * analysis.mean_events_rate(event_sets::PREVENTIVE)
        - f.i * analysis.mean_events_rate(event_sets::INCORPORATIONS)
}

/// One point of the cumulative profit curve. `gamma` is absent at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfitPoint {
    pub t: f64,
    pub phi: f64,
    pub psi: f64,
    pub gamma: Option<f64>,
}

impl ProfitPoint {
    pub const CSV_HEADER: &'static str = "t,phi,psi,gamma";

    pub fn csv_line(&self) -> String {
        let g = self.gamma.map_or(String::new(), |g| g.to_string());
        format!("{},{},{},{g}", self.t, self.phi, self.psi)
    }
}

/// `Φ`, `Ψ` and `Γ` on a nondecreasing grid.
pub fn profit_curve(analysis: &SystemAnalysis, econ: &EconomicSpec, times: &[f64]) -> Result<Vec<ProfitPoint>> {
    let nr = net_reward_vector(analysis.layout(), econ)?;
    let mmap = &analysis.mmap;
    let columns = vec![
        nr.nr.clone(),
        mmap.event_rates(event_sets::NEW_UNITS),
        mmap.event_rates(event_sets::CORRECTIVE),
        mmap.event_rates(event_sets::PREVENTIVE),
        mmap.event_rates(event_sets::INCORPORATIONS),
    ];
    let f = &econ.fixed;
    let rows = integrated_grid(mmap, &analysis.theta, &columns, times)?;
    Ok(times
        .iter()
        .zip(rows)
        .map(|(&t, r)| {
            let psi = r[0] - (1.0 + r[1]) * f.nu - r[2] * f.cr - r[3] * f.pm - r[4] * f.i;
            ProfitPoint { t, phi: r[0], psi, gamma: (t > 0.0).then(|| psi / t) }
        })
        .collect())
}

/// First time on `(0, t_max]` at which `Ψ` turns nonnegative after being
/// negative, located on a grid of width `step` and refined by bisection.
pub fn break_even_time(analysis: &SystemAnalysis, econ: &EconomicSpec, t_max: f64, step: f64) -> Result<Option<f64>> {
    if !(step > 0.0 && t_max > 0.0) {
        return Err(Error::Config("break-even search needs positive step and horizon".into()));
    }
    let n = (t_max / step).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(t_max)).collect();
    let curve = profit_curve(analysis, econ, &times)?;
    let nr = net_reward_vector(analysis.layout(), econ)?;
    let psi = |t: f64| total_net_reward(&analysis.mmap, &analysis.theta, &nr, econ, t);
    let mut prev: Option<&ProfitPoint> = None;
    for p in &curve {
        if let Some(q) = prev {
            if q.psi < 0.0 && p.psi >= 0.0 {
                let (mut lo, mut hi) = (q.t, p.t);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if psi(mid)? < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(Some(hi));
            }
        }
        prev = Some(p);
    }
    Ok(None)
}
