#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vacrel::model::{DegradationModel, ShockModel};
use vacrel::{EventLabel, MacroState, Matrix, MmapRepresentation, PhaseType, SystemSpec, Variant};

/// A phase-type law with every phase exiting at a positive rate.
pub fn random_ph(rng: &mut ChaCha8Rng, n: usize) -> PhaseType {
    let mut alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= s);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let mut out = rng.gen_range(0.2..3.0);
        for j in 0..n {
            if i != j && rng.gen_bool(0.6) {
                let r = rng.gen_range(0.05..2.0);
                m[(i, j)] = r;
                out += r;
            }
        }
        m[(i, i)] = -out;
    }
    PhaseType::new(alpha, m).expect("random PH is valid")
}

fn split(rng: &mut ChaCha8Rng, exit: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = exit.iter().map(|_| rng.gen_range(0.1..0.9)).collect();
    let rep: Vec<f64> = exit.iter().zip(&u).map(|(e, u)| e * u).collect();
    let nonrep: Vec<f64> = exit.iter().zip(&rep).map(|(e, r)| e - r).collect();
    (rep, nonrep)
}

/// A valid spec whose component laws all have order at most three.
pub fn random_spec(seed: u64) -> SystemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variant = if rng.gen_bool(0.5) { Variant::PM } else { Variant::NoPM };
    let levels: Vec<usize> = match variant {
        Variant::PM => vec![1, 1, 1],
        Variant::NoPM => [vec![1, 1], vec![1, 2], vec![2, 1]][rng.gen_range(0..3)].clone(),
    };
    let n: usize = levels.iter().sum();
    let level_of = |i: usize| {
        let mut acc = 0;
        levels.iter().position(|&s| {
            acc += s;
            i < acc
        })
    };
    let mut t = Matrix::zeros(n, n);
    let mut exit = vec![0.0; n];
    for i in 0..n {
        exit[i] = rng.gen_range(0.02..0.6);
        let mut out = exit[i];
        for j in 0..n {
            if i != j && level_of(j) >= level_of(i) && rng.gen_bool(0.7) {
                let r = rng.gen_range(0.1..1.5);
                t[(i, j)] = r;
                out += r;
            }
        }
        t[(i, i)] = -out;
    }
    let mut alpha = vec![0.0; n];
    let mut s = 0.0;
    for a in alpha.iter_mut().take(levels[0]) {
        *a = rng.gen_range(0.1..1.0);
        s += *a;
    }
    alpha.iter_mut().for_each(|a| *a /= s);
    let (rep_rates, nonrep_rates) = split(&mut rng, &exit);
    let deg = DegradationModel {
        ph: PhaseType::new(alpha, t).expect("random degradation is valid"),
        level_sizes: levels,
        rep_rates,
        nonrep_rates,
    };

    let order = |rng: &mut ChaCha8Rng| rng.gen_range(1..=3);
    let k = order(&mut rng);
    let shock_ph = random_ph(&mut rng, k);
    let (rep, nonrep) = split(&mut rng, &shock_ph.exit_rates());
    let shock = ShockModel { ph: shock_ph, rep_rates: rep, nonrep_rates: nonrep };
    let k = order(&mut rng);
    let vacation = random_ph(&mut rng, k);
    let k = order(&mut rng);
    let corrective = random_ph(&mut rng, k);
    let preventive = match variant {
        Variant::PM => {
            let k = order(&mut rng);
            Some(random_ph(&mut rng, k))
        }
        Variant::NoPM => None,
    };
    let spec = SystemSpec { variant, degradation: deg, shock, vacation, corrective, preventive };
    assert!(spec.validate().is_valid(), "{}", spec.validate());
    spec
}

/// Flat index of a phase tuple inside the assembled state space. Tuples
/// follow the component order of the macro-state: degradation phase within
/// its level, shock phase, then vacation or service phase.
pub struct Indexer<'a> {
    mmap: &'a MmapRepresentation,
    shock: usize,
    vacation: usize,
    corrective: usize,
    preventive: usize,
}

impl<'a> Indexer<'a> {
    pub fn new(spec: &SystemSpec, mmap: &'a MmapRepresentation) -> Self {
        Indexer {
            mmap,
            shock: spec.shock.order(),
            vacation: spec.vacation.order(),
            corrective: spec.corrective.order(),
            preventive: spec.preventive.as_ref().map_or(0, |p| p.order()),
        }
    }

    pub fn away(&self, s: MacroState, i: usize, j: usize, k: usize) -> usize {
        self.mmap.layout.range(s).start + (i * self.shock + j) * self.vacation + k
    }

    pub fn waiting(&self, i: usize, j: usize) -> usize {
        self.mmap.layout.range(MacroState::O2R).start + i * self.shock + j
    }

    pub fn down(&self, s: MacroState, j: usize, k: usize) -> usize {
        self.mmap.layout.range(s).start + j * self.vacation + k
    }

    pub fn service(&self, s: MacroState, j: usize, m: usize) -> usize {
        let width = if s == MacroState::PM { self.preventive } else { self.corrective };
        self.mmap.layout.range(s).start + j * width + m
    }
}

/// Event matrices built one transition at a time from the operating rules,
/// without any Kronecker algebra.
pub fn elementwise_events(spec: &SystemSpec, mmap: &MmapRepresentation) -> BTreeMap<EventLabel, Matrix> {
    use EventLabel as Ev;
    use MacroState::*;

    let dim = mmap.dim();
    let idx = Indexer::new(spec, mmap);
    let mut d: BTreeMap<EventLabel, Matrix> =
        EventLabel::for_variant(spec.variant).iter().map(|&l| (l, Matrix::zeros(dim, dim))).collect();
    let mut add = |ev: EventLabel, from: usize, to: usize, rate: f64| {
        if rate != 0.0 {
            d.get_mut(&ev).expect("event of this variant")[(from, to)] += rate;
        }
    };

    let deg = &spec.degradation;
    let t = deg.ph.subgen();
    let n = deg.order();
    let pm = spec.variant == Variant::PM;
    let l = spec.shock.ph.subgen();
    let p = spec.shock.order();
    let gamma = spec.shock.ph.alpha();
    let (lr, lnr) = (&spec.shock.rep_rates, &spec.shock.nonrep_rates);
    let shock_exit = spec.shock.ph.exit_rates();
    let v = spec.vacation.subgen();
    let v_alpha = spec.vacation.alpha();
    let v_exit = spec.vacation.exit_rates();
    let nv = spec.vacation.order();
    let s1 = spec.corrective.subgen();
    let b1 = spec.corrective.alpha();
    let s1_exit = spec.corrective.exit_rates();
    let a1 = deg.alpha_level(0);
    let local = |g: usize| g - deg.level_range(deg.level_of(g)).start;
    let away_state = [O1, O2WR, O3WR];

    // a new unit on the minor level, shock phase `j`, fresh vacation
    let restart = |add: &mut dyn FnMut(EventLabel, usize, usize, f64), ev: EventLabel, from: usize, j: usize, rate: f64| {
        for (g, &a) in a1.iter().enumerate() {
            for (k, &vk) in v_alpha.iter().enumerate() {
                add(ev, from, idx.away(O1, g, j, k), rate * a * vk);
            }
        }
    };

    // repairperson away, unit working
    for g in 0..n {
        let lev = deg.level_of(g);
        let here = away_state[lev];
        for j in 0..p {
            for k in 0..nv {
                let from = idx.away(here, local(g), j, k);
                add(Ev::O, from, from, t[(g, g)] + l[(j, j)] + v[(k, k)]);
                for g2 in (0..n).filter(|&g2| g2 != g) {
                    let to = idx.away(away_state[deg.level_of(g2)], local(g2), j, k);
                    add(Ev::O, from, to, t[(g, g2)]);
                }
                for j2 in (0..p).filter(|&j2| j2 != j) {
                    add(Ev::O, from, idx.away(here, local(g), j2, k), l[(j, j2)]);
                }
                for k2 in (0..nv).filter(|&k2| k2 != k) {
                    add(Ev::O, from, idx.away(here, local(g), j, k2), v[(k, k2)]);
                }
                add(Ev::RF, from, idx.down(RF, j, k), deg.rep_rates[g]);
                add(Ev::NRF, from, idx.down(NRF, j, k), deg.nonrep_rates[g]);
                for j2 in 0..p {
                    add(Ev::RF, from, idx.down(RF, j2, k), lr[j] * gamma[j2]);
                    add(Ev::NRF, from, idx.down(NRF, j2, k), lnr[j] * gamma[j2]);
                }
                match lev {
                    0 => {
                        for k2 in 0..nv {
                            add(Ev::I, from, idx.away(O1, local(g), j, k2), v_exit[k] * v_alpha[k2]);
                        }
                    }
                    1 => add(Ev::I, from, idx.waiting(local(g), j), v_exit[k]),
                    _ => {
                        let b2 = spec.preventive.as_ref().unwrap().alpha();
                        for (m, &b) in b2.iter().enumerate() {
                            add(Ev::I_PM, from, idx.service(PM, j, m), v_exit[k] * b);
                        }
                    }
                }
            }
        }
    }

    // repairperson waiting at the workplace next to a middle-level unit
    for g in deg.level_range(1) {
        for j in 0..p {
            let from = idx.waiting(local(g), j);
            add(Ev::O, from, from, t[(g, g)] + l[(j, j)]);
            for g2 in (0..n).filter(|&g2| g2 != g) {
                match deg.level_of(g2) {
                    1 => add(Ev::O, from, idx.waiting(local(g2), j), t[(g, g2)]),
                    2 if pm => {
                        let b2 = spec.preventive.as_ref().unwrap().alpha();
                        for (m, &b) in b2.iter().enumerate() {
                            add(Ev::PM, from, idx.service(PM, j, m), t[(g, g2)] * b);
                        }
                    }
                    _ => assert_eq!(t[(g, g2)], 0.0),
                }
            }
            for j2 in (0..p).filter(|&j2| j2 != j) {
                add(Ev::O, from, idx.waiting(local(g), j2), l[(j, j2)]);
            }
            for (m, &b) in b1.iter().enumerate() {
                add(Ev::RF_CR, from, idx.service(CR, j, m), deg.rep_rates[g] * b);
                for j2 in 0..p {
                    add(Ev::RF_CR, from, idx.service(CR, j2, m), lr[j] * gamma[j2] * b);
                }
            }
            restart(&mut add, Ev::NRF_NU, from, j, deg.nonrep_rates[g]);
            for j2 in 0..p {
                restart(&mut add, Ev::NRF_NU, from, j2, lnr[j] * gamma[j2]);
            }
        }
    }

    // shocks keep renewing while the unit is down
    let renew = |add: &mut dyn FnMut(EventLabel, usize, usize, f64), from: usize, j: usize, to: &dyn Fn(usize) -> usize| {
        add(Ev::O, from, to(j), l[(j, j)]);
        for j2 in 0..p {
            if j2 != j {
                add(Ev::O, from, to(j2), l[(j, j2)]);
            }
            add(Ev::O, from, to(j2), shock_exit[j] * gamma[j2]);
        }
    };

    // failed unit waiting for the repairperson
    for s in [RF, NRF] {
        for j in 0..p {
            for k in 0..nv {
                let from = idx.down(s, j, k);
                renew(&mut add, from, j, &|j2| idx.down(s, j2, k));
                add(Ev::O, from, from, v[(k, k)]);
                for k2 in (0..nv).filter(|&k2| k2 != k) {
                    add(Ev::O, from, idx.down(s, j, k2), v[(k, k2)]);
                }
                if s == RF {
                    for (m, &b) in b1.iter().enumerate() {
                        add(Ev::I_CR, from, idx.service(CR, j, m), v_exit[k] * b);
                    }
                } else {
                    restart(&mut add, Ev::I_NU, from, j, v_exit[k]);
                }
            }
        }
    }

    // corrective repair and preventive maintenance
    let mut services: Vec<(MacroState, &Matrix, Vec<f64>)> = vec![(CR, s1, s1_exit)];
    if let Some(prev) = &spec.preventive {
        services.push((PM, prev.subgen(), prev.exit_rates()));
    }
    for (s, sub, exit) in services {
        for j in 0..p {
            for m in 0..sub.rows() {
                let from = idx.service(s, j, m);
                renew(&mut add, from, j, &|j2| idx.service(s, j2, m));
                add(Ev::O, from, from, sub[(m, m)]);
                for m2 in (0..sub.rows()).filter(|&m2| m2 != m) {
                    add(Ev::O, from, idx.service(s, j, m2), sub[(m, m2)]);
                }
                restart(&mut add, Ev::O, from, j, exit[m]);
            }
        }
    }
    d
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
