//! Maximization of the long-run net reward over the parameters of the
//! vacation-time law.
//!
//! Parameters are optimized on the log scale with Nelder-Mead, started from
//! every point of a grid; the best evaluated point over all starts wins.

use rayon::prelude::*;

use crate::analysis::SystemAnalysis;
use crate::economics::{net_reward_vector, stationary_net_reward};
use crate::error::{Error, Result};
use crate::model::{EconomicSpec, SystemSpec};
use crate::ph::PhaseType;

/// Maps a vector of positive parameters to a vacation law.
pub trait VacationStructure: Send + Sync {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> Vec<&'static str>;
    fn build(&self, params: &[f64]) -> Result<PhaseType>;
}

/// `v = (1, 0)`, `V = [[−λ₁, λ₁], [0, −λ₂]]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Coxian2;

impl VacationStructure for Coxian2 {
    fn name(&self) -> &'static str {
        "coxian2"
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["lambda1", "lambda2"]
    }

    fn build(&self, params: &[f64]) -> Result<PhaseType> {
        match params {
            [l1, l2] => PhaseType::coxian2(*l1, *l2),
            _ => Err(Error::Optimization(format!("coxian2 takes 2 parameters, got {}", params.len()))),
        }
    }
}

/// `Γ` of the template with its vacation law replaced by `structure(params)`.
pub fn evaluate_gamma(
    template: &SystemSpec,
    econ: &EconomicSpec,
    structure: &dyn VacationStructure,
    params: &[f64],
) -> Result<f64> {
    if let Some(p) = params.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::Optimization(format!("parameters must be positive, got {p}")));
    }
    let spec = template.with_vacation(structure.build(params)?);
    let analysis = SystemAnalysis::new(&spec)?;
    let nr = net_reward_vector(analysis.layout(), econ)?;
    Ok(stationary_net_reward(&analysis, &nr, econ))
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    /// Stop once the simplex values span less than this...
    pub value_tol: f64,
    /// ...and the vertices lie within this distance (log scale, ∞-norm) of the best one.
    pub param_tol: f64,
    pub max_evals: usize,
    /// Edge of the initial simplex on the log scale.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { value_tol: 1e-8, param_tol: 1e-6, max_evals: 500, initial_step: 0.5 }
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub eval_index: usize,
    pub start_index: usize,
    pub params: Vec<f64>,
    /// `-inf` when the evaluation failed.
    pub value: f64,
    /// Best value seen so far in this start's run.
    pub best_so_far: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    /// Whether the run that produced the best point met both tolerances.
    pub converged: bool,
}

impl OptimizationResult {
    pub const CSV_HEADER: &'static str = "eval_index,lambda1,lambda2,gamma";

    /// Trace as CSV; parameters beyond the first two are appended unnamed.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.trace {
            s.push_str(&e.eval_index.to_string());
            for p in &e.params {
                s.push_str(&format!(",{p}"));
            }
            s.push_str(&format!(",{}\n", e.value));
        }
        s
    }
}

struct LocalRun {
    trace: Vec<(Vec<f64>, f64)>,
    converged: bool,
}

/// Nelder-Mead maximization of `f` on the log scale starting from the
/// positive point `start`. `f` failures count as `-inf`.
fn nelder_mead_log<F>(f: &F, start: &[f64], opts: &NelderMeadOptions) -> LocalRun
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let n = start.len();
    let mut trace = Vec::new();
    let eval = |y: &[f64], trace: &mut Vec<(Vec<f64>, f64)>| -> f64 {
        let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let v = match f(&x) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        };
        trace.push((x, v));
        v
    };

    let y0: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&y0, &mut trace);
    simplex.push((y0.clone(), v0));
    for i in 0..n {
        let mut y = y0.clone();
        y[i] += opts.initial_step;
        let v = eval(&y, &mut trace);
        simplex.push((y, v));
    }

    let mut converged = false;
    while trace.len() < opts.max_evals {
        // best first
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread_v = if best.is_finite() && worst.is_finite() { best - worst } else { f64::INFINITY };
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(y, _)| y.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread_v < opts.value_tol && spread_x < opts.param_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(y, _)| y[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let yr = along(1.0);
        let vr = eval(&yr, &mut trace);
        if vr > simplex[0].1 {
            let ye = along(2.0);
            let ve = eval(&ye, &mut trace);
            simplex[n] = if ve > vr { (ye, ve) } else { (yr, vr) };
        } else if vr > simplex[n - 1].1 {
            simplex[n] = (yr, vr);
        } else {
            let (yc, vc) = if vr > simplex[n].1 {
                let y = along(0.5);
                let v = eval(&y, &mut trace);
                (y, v)
            } else {
                let y = along(-0.5);
                let v = eval(&y, &mut trace);
                (y, v)
            };
            if vc > vr.max(simplex[n].1) {
                simplex[n] = (yc, vc);
            } else {
                let y_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let y: Vec<f64> = vertex.0.iter().zip(&y_best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let v = eval(&y, &mut trace);
                    *vertex = (y, v);
                }
            }
        }
    }
    LocalRun { trace, converged }
}

/// Multi-start Nelder-Mead over positive parameters. Starts run in
/// parallel; the result does not depend on their order.
pub fn maximize_positive<F>(objective: &F, starts: &[Vec<f64>], opts: &NelderMeadOptions) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + ?Sized,
{
    if starts.is_empty() {
        return Err(Error::Optimization("no starting points".into()));
    }
    if let Some(s) = starts.iter().find(|s| s.is_empty() || s.iter().any(|v| !(v.is_finite() && *v > 0.0))) {
        return Err(Error::Optimization(format!("starting point {s:?} is not strictly positive")));
    }
    let runs: Vec<LocalRun> = starts.par_iter().map(|s| nelder_mead_log(objective, s, opts)).collect();

    let mut trace = Vec::new();
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for (start_index, run) in runs.into_iter().enumerate() {
        let mut best_so_far = f64::NEG_INFINITY;
        for (params, value) in run.trace {
            best_so_far = best_so_far.max(value);
            let better = match &best {
                None => value.is_finite(),
                Some((bp, bv, _)) => value > *bv || (value == *bv && params < *bp),
            };
            if better && value.is_finite() {
                best = Some((params.clone(), value, run.converged));
            }
            trace.push(TraceEntry { eval_index: trace.len(), start_index, params, value, best_so_far });
        }
    }
    let (best_params, best_value, converged) =
        best.ok_or_else(|| Error::Optimization("no start produced a finite objective".into()))?;
    Ok(OptimizationResult { best_params, best_value, evaluations: trace.len(), trace, converged })
}

/// The 3 × 3 grid `{0.5, 5, 50}²`.
pub fn default_starts() -> Vec<Vec<f64>> {
    let axis = [0.5, 5.0, 50.0];
    axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect()
}

/// Maximizes `Γ` over the vacation parameters of `structure`.
pub fn optimize_vacation(
    template: &SystemSpec,
    econ: &EconomicSpec,
    structure: &dyn VacationStructure,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
) -> Result<OptimizationResult> {
    let objective = |p: &[f64]| evaluate_gamma(template, econ, structure, p);
    maximize_positive(&objective, starts, opts)
}
