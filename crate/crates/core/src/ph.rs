//! Continuous phase-type distributions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{check_time, expm_uniformized, Matrix, UniformizationOptions};
use crate::validation::ValidationReport;

const MASS_TOL: f64 = 1e-12;

/// A phase-type law given by an initial probability vector over transient
/// phases and the subgenerator among them.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseType {
    alpha: Vec<f64>,
    subgen: Matrix,
}

impl PhaseType {
    /// Validating constructor.
    pub fn new(alpha: Vec<f64>, subgen: Matrix) -> Result<Self> {
        let ph = PhaseType { alpha, subgen };
        let report = ph.validate();
        if report.is_valid() {
            Ok(ph)
        } else {
            Err(Error::InvalidPhaseType(report))
        }
    }

    /// Builds without checking; pair with [`PhaseType::validate`].
    pub fn new_unchecked(alpha: Vec<f64>, subgen: Matrix) -> Self {
        PhaseType { alpha, subgen }
    }

    /// Exponential law with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        PhaseType::new(vec![1.0], Matrix::from_rows(&[vec![-rate]])?)
    }

    /// Two-phase Coxian with start vector `(1, 0)` and subgenerator
    /// `[[-l1, l1], [0, -l2]]`.
    pub fn coxian2(l1: f64, l2: f64) -> Result<Self> {
        PhaseType::new(vec![1.0, 0.0], Matrix::from_rows(&[vec![-l1, l1], vec![0.0, -l2]])?)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn subgen(&self) -> &Matrix {
        &self.subgen
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// Absorption rates `-T e`.
    pub fn exit_rates(&self) -> Vec<f64> {
        self.subgen.row_sums().into_iter().map(|s| -s).collect()
    }

    /// Every violated invariant, with indices.
    pub fn validate(&self) -> ValidationReport {
        validate_ph(self)
    }

    /// `P(X ≤ t) = 1 - α exp(T t) e`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        let surv = self.survival(t)?;
        Ok((1.0 - surv).clamp(0.0, 1.0))
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let p = self.transient_mass(t)?;
        Ok(p.iter().sum::<f64>().clamp(0.0, 1.0))
    }

    /// `α exp(T t) T⁰`.
    pub fn density(&self, t: f64) -> Result<f64> {
        let p = self.transient_mass(t)?;
        Ok(p.iter().zip(self.exit_rates()).map(|(a, b)| a * b).sum())
    }

    /// Row vector `α exp(T t)`.
    pub fn transient_mass(&self, t: f64) -> Result<Vec<f64>> {
        let e = expm_uniformized(&self.subgen, t, UniformizationOptions::default())?;
        Ok(e.left_mul(&self.alpha))
    }

    /// `α (-T)⁻¹ e`.
    pub fn mean(&self) -> Result<f64> {
        let neg = self.subgen.scale(-1.0);
        let x = neg.solve(&Matrix::ones_col(self.order()))?;
        Ok(self.alpha.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum())
    }

    /// One draw by simulating the phase jumps until absorption.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exits = self.exit_rates();
        let mut phase = pick(rng, &self.alpha);
        let mut t = 0.0;
        loop {
            let rate = -self.subgen[(phase, phase)];
            t += exp_draw(rng, rate);
            let mut u = rng.gen::<f64>() * rate;
            let mut next = None;
            for j in 0..self.order() {
                if j == phase {
                    continue;
                }
                u -= self.subgen[(phase, j)];
                if u < 0.0 {
                    next = Some(j);
                    break;
                }
            }
            match next {
                Some(j) => phase = j,
                None => {
                    debug_assert!(exits[phase] > 0.0 || u < 1e-12);
                    return t;
                }
            }
        }
    }
}

/// Report-style check of a phase-type representation.
pub fn validate_ph(ph: &PhaseType) -> ValidationReport {
    let mut r = ValidationReport::new();
    let m = ph.alpha.len();
    if m == 0 {
        r.error("alpha", "empty start vector");
        return r;
    }
    if ph.subgen.rows() != m || ph.subgen.cols() != m {
        r.error(
            "subgen",
            format!("expected {m}x{m}, got {}x{}", ph.subgen.rows(), ph.subgen.cols()),
        );
        return r;
    }
    for (i, &a) in ph.alpha.iter().enumerate() {
        if !a.is_finite() || a < 0.0 {
            r.error(format!("alpha[{i}]"), format!("entry {a} is not a nonnegative number"));
        }
    }
    let mass: f64 = ph.alpha.iter().sum();
    if (mass - 1.0).abs() > MASS_TOL {
        r.error("alpha", format!("entries sum to {mass}, mass deficit {:e}", 1.0 - mass));
    }
    if !ph.subgen.is_finite() {
        r.error("subgen", "non-finite entry");
        return r;
    }
    for i in 0..m {
        for j in 0..m {
            let x = ph.subgen[(i, j)];
            if i == j && x >= 0.0 {
                r.error(format!("subgen[{i}][{i}]"), format!("diagonal entry {x} must be negative"));
            }
            if i != j && x < 0.0 {
                r.error(format!("subgen[{i}][{j}]"), format!("off-diagonal entry {x} is negative"));
            }
        }
    }
    for (i, e) in ph.exit_rates().iter().enumerate() {
        if *e < -MASS_TOL {
            r.error(format!("subgen[{i}]"), format!("row sum {} is positive", -e));
        }
    }
    if r.is_valid() && ph.subgen.lu().is_err() {
        r.error("subgen", "singular: absorption is not certain");
    }
    r
}

pub(crate) fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Index drawn from a discrete law given by nonnegative weights.
pub(crate) fn pick<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    last
}
