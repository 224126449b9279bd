//! Weighted-sum search over the sine coefficients at fixed Gaussian parameters.
//!
//! `a_1` and `a_2` are eliminated through the two linear endpoint conditions, so
//! the search runs over `a_3..a_N` and every candidate produces pulses that
//! start and end at zero. The search itself is a seeded, restarting
//! Nelder-Mead simplex.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{eliminated_leading, AnsatzParams};
use crate::dynamics::{khz_to_rad_per_us, Drive, QState};
use crate::error::{PulseError, Result};
use crate::metrics::{fidelity, qs_numeric_with, QS_INTERVALS};
use crate::sweeps::linspace;

pub const MIN_BUDGET: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w_band: f64,
    pub w_leak: f64,
    pub w_qs: f64,
    /// Half-width of the in-band detuning grid (kHz).
    pub band_khz: f64,
    /// Far-detuned probe offsets (kHz); each is probed at both signs.
    pub leak_khz: Vec<f64>,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            w_band: 1.0,
            w_leak: 1.0,
            w_qs: 1.0,
            band_khz: 270.0,
            leak_khz: vec![3500.0, 4000.0, 5000.0],
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_band, self.w_leak, self.w_qs];
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(PulseError::InvalidParams(
                "objective weights must be non-negative".into(),
            ));
        }
        if !w.iter().any(|x| *x > 0.0) {
            return Err(PulseError::InvalidParams(
                "at least one objective weight must be positive".into(),
            ));
        }
        if !(self.band_khz >= 0.0) {
            return Err(PulseError::InvalidParams(
                "band half-width must be non-negative".into(),
            ));
        }
        if self.leak_khz.is_empty() || self.leak_khz.iter().any(|x| !x.is_finite()) {
            return Err(PulseError::InvalidParams(
                "leak probe list must be non-empty and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Numerical resolution of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSettings {
    pub steps: usize,
    pub band_points: usize,
    pub qs_intervals: usize,
}

impl Default for ObjectiveSettings {
    fn default() -> Self {
        ObjectiveSettings {
            steps: 4000,
            band_points: 13,
            qs_intervals: QS_INTERVALS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub scalar: f64,
    /// Mean `1 - F` over the in-band grid.
    pub band_infid: f64,
    /// Mean `1 - P1` over the far-detuned probes.
    pub leak: f64,
    pub qs: f64,
}

pub fn objective(p: &AnsatzParams, w: &ObjectiveWeights) -> Result<ObjectiveValue> {
    objective_with(p, w, &ObjectiveSettings::default())
}

pub fn objective_with(
    p: &AnsatzParams,
    w: &ObjectiveWeights,
    settings: &ObjectiveSettings,
) -> Result<ObjectiveValue> {
    w.validate()?;
    let drive = Drive::new(p, settings.steps)?;
    let band = linspace(-w.band_khz, w.band_khz, settings.band_points);
    let probes: Vec<f64> = w.leak_khz.iter().flat_map(|k| [*k, -*k]).collect();

    let finals = |grid: &[f64]| -> Result<Vec<QState>> {
        grid.par_iter()
            .map(|&khz| drive.final_state(QState::ground_one(), khz_to_rad_per_us(khz), 1.0))
            .collect()
    };
    let band_states = finals(&band)?;
    let probe_states = finals(&probes)?;

    let band_infid = band_states
        .iter()
        .map(|s| 1.0 - fidelity(s, p.theta, p.phi))
        .sum::<f64>()
        / band.len() as f64;
    let leak = probe_states
        .iter()
        .map(|s| 1.0 - s.c1.norm_sqr())
        .sum::<f64>()
        / probes.len() as f64;
    let qs = qs_numeric_with(p, settings.qs_intervals)?;
    let scalar = w.w_band * band_infid + w.w_leak * leak + w.w_qs * qs;
    Ok(ObjectiveValue {
        scalar,
        band_infid,
        leak,
        qs,
    })
}

/// Parameter set with `a_3..a_N = free` and `a_1`, `a_2` eliminated.
pub fn params_from_free(base: &AnsatzParams, free: &[f64]) -> AnsatzParams {
    let mut p = base.clone();
    let (a1, a2) = eliminated_leading(free);
    p.sines = [a1, a2].into_iter().chain(free.iter().copied()).collect();
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Maximum number of distinct objective evaluations.
    pub budget: usize,
    pub seed: u64,
    /// Initial simplex edge length in coefficient units.
    pub initial_step: f64,
    /// Restarts stop once the simplex edge shrinks below this.
    pub min_step: f64,
    pub settings: ObjectiveSettings,
}

impl OptimizeOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        OptimizeOptions {
            budget,
            seed,
            initial_step: 0.02,
            min_step: 1e-5,
            settings: ObjectiveSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub value: ObjectiveValue,
    pub free: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub params: AnsatzParams,
    pub value: ObjectiveValue,
    /// Objective of the start point after elimination.
    pub start_value: ObjectiveValue,
    pub evaluations: usize,
    /// True if the search stopped because the budget ran out.
    pub budget_exhausted: bool,
    /// Best point after each simplex iteration.
    pub trace: Vec<TraceRow>,
}

impl OptimizeOutcome {
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n_free = self.trace.first().map_or(0, |r| r.free.len());
        let names: Vec<String> = (0..n_free).map(|k| format!("a{}", k + 3)).collect();
        writeln!(w, "iteration,scalar,band_infid,leak,qs,{}", names.join(","))?;
        for r in &self.trace {
            let coeffs: Vec<String> = r.free.iter().map(|x| x.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration,
                r.value.scalar,
                r.value.band_infid,
                r.value.leak,
                r.value.qs,
                coeffs.join(",")
            )?;
        }
        Ok(())
    }
}

/// Searches `a_3..a_N` from `start` with default options.
pub fn optimize_an(
    start: &AnsatzParams,
    w: &ObjectiveWeights,
    budget: usize,
    seed: u64,
) -> Result<OptimizeOutcome> {
    optimize_an_with(start, w, &OptimizeOptions::new(budget, seed), |_, _| {})
}

/// Cached, budgeted objective over the free coordinates.
struct Evaluator<'a, F> {
    base: &'a AnsatzParams,
    weights: &'a ObjectiveWeights,
    settings: ObjectiveSettings,
    budget: usize,
    evaluations: usize,
    cache: HashMap<Vec<u64>, ObjectiveValue>,
    observe: F,
}

impl<F: FnMut(&AnsatzParams, &ObjectiveValue)> Evaluator<'_, F> {
    /// `Ok(None)` once the budget is spent.
    fn eval(&mut self, free: &[f64]) -> Result<Option<ObjectiveValue>> {
        let key: Vec<u64> = free.iter().map(|x| x.to_bits()).collect();
        if let Some(v) = self.cache.get(&key) {
            return Ok(Some(*v));
        }
        if self.evaluations >= self.budget {
            return Ok(None);
        }
        let p = params_from_free(self.base, free);
        let v = objective_with(&p, self.weights, &self.settings)?;
        self.evaluations += 1;
        (self.observe)(&p, &v);
        self.cache.insert(key, v);
        Ok(Some(v))
    }
}

/// Full control over the search. `observe` sees every freshly evaluated candidate.
pub fn optimize_an_with<F>(
    start: &AnsatzParams,
    w: &ObjectiveWeights,
    options: &OptimizeOptions,
    observe: F,
) -> Result<OptimizeOutcome>
where
    F: FnMut(&AnsatzParams, &ObjectiveValue),
{
    start.validate()?;
    w.validate()?;
    if options.budget < MIN_BUDGET {
        return Err(PulseError::InvalidParams(format!(
            "budget must be at least {MIN_BUDGET}, got {}",
            options.budget
        )));
    }
    if start.sines.len() < 3 {
        return Err(PulseError::InvalidParams(
            "need at least three sine terms to leave a free coordinate".into(),
        ));
    }

    let mut ev = Evaluator {
        base: start,
        weights: w,
        settings: options.settings,
        budget: options.budget,
        evaluations: 0,
        cache: HashMap::new(),
        observe,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let x0 = start.sines[2..].to_vec();
    let start_value = ev.eval(&x0)?.expect("budget admits the start point");
    let mut best = (x0, start_value);
    let mut trace = vec![TraceRow {
        iteration: 0,
        value: start_value,
        free: best.0.clone(),
    }];
    let mut iteration = 0;
    let mut step = options.initial_step;
    let mut exhausted = false;

    'restarts: while step >= options.min_step {
        let before = best.1.scalar;
        match nelder_mead(&mut ev, &best, step, &mut rng, &mut iteration, &mut trace)? {
            Run::Finished(found) => best = found,
            Run::OutOfBudget(found) => {
                best = found;
                exhausted = true;
                break 'restarts;
            }
        }
        // shrink the restart simplex unless the last run moved the optimum appreciably
        if best.1.scalar > before - 1e-9 * before.abs().max(1e-12) {
            step *= 0.5;
        }
    }

    let params = params_from_free(start, &best.0);
    Ok(OptimizeOutcome {
        params,
        value: best.1,
        start_value,
        evaluations: ev.evaluations,
        budget_exhausted: exhausted,
        trace,
    })
}

type Point = (Vec<f64>, ObjectiveValue);

enum Run {
    Finished(Point),
    OutOfBudget(Point),
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn nelder_mead<F: FnMut(&AnsatzParams, &ObjectiveValue)>(
    ev: &mut Evaluator<'_, F>,
    best: &Point,
    step: f64,
    rng: &mut ChaCha8Rng,
    iteration: &mut usize,
    trace: &mut Vec<TraceRow>,
) -> Result<Run> {
    let dim = best.0.len();
    let mut simplex: Vec<Point> = vec![best.clone()];
    for i in 0..dim {
        let mut x = best.0.clone();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x[i] += sign * step * rng.gen_range(0.5..1.5);
        match ev.eval(&x)? {
            Some(v) => simplex.push((x, v)),
            None => return Ok(Run::OutOfBudget(best.clone())),
        }
    }

    let by_scalar = |a: &Point, b: &Point| a.1.scalar.total_cmp(&b.1.scalar);
    loop {
        simplex.sort_by(by_scalar);
        let lowest = simplex[0].clone();
        *iteration += 1;
        if lowest.1.scalar < trace.last().map_or(f64::INFINITY, |r| r.value.scalar) {
            trace.push(TraceRow {
                iteration: *iteration,
                value: lowest.1,
                free: lowest.0.clone(),
            });
        } else {
            let last = trace
                .last()
                .expect("trace starts with the start point")
                .clone();
            trace.push(TraceRow {
                iteration: *iteration,
                ..last
            });
        }

        let spread = simplex[dim].1.scalar - lowest.1.scalar;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&lowest.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= 1e-12 * lowest.1.scalar.abs().max(1e-12) || size < 1e-9 {
            return Ok(Run::Finished(lowest));
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let worst = simplex[dim].clone();

        let xr = toward(REFLECT, &worst.0);
        let Some(fr) = ev.eval(&xr)? else {
            return Ok(Run::OutOfBudget(lowest));
        };
        if fr.scalar < lowest.1.scalar {
            let xe = toward(EXPAND, &worst.0);
            let Some(fe) = ev.eval(&xe)? else {
                return Ok(Run::OutOfBudget(best_of(lowest, (xr, fr))));
            };
            simplex[dim] = if fe.scalar < fr.scalar {
                (xe, fe)
            } else {
                (xr, fr)
            };
            continue;
        }
        if fr.scalar < simplex[dim - 1].1.scalar {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, outside) = if fr.scalar < worst.1.scalar {
            (toward(CONTRACT, &worst.0), true)
        } else {
            (toward(-CONTRACT, &worst.0), false)
        };
        let Some(fc) = ev.eval(&xc)? else {
            return Ok(Run::OutOfBudget(lowest));
        };
        let accept = if outside {
            fc.scalar <= fr.scalar
        } else {
            fc.scalar < worst.1.scalar
        };
        if accept {
            simplex[dim] = (xc, fc);
            continue;
        }
        for k in 1..=dim {
            let x: Vec<f64> = lowest
                .0
                .iter()
                .zip(&simplex[k].0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            let Some(v) = ev.eval(&x)? else {
                let found = simplex
                    .iter()
                    .cloned()
                    .min_by(by_scalar)
                    .expect("non-empty simplex");
                return Ok(Run::OutOfBudget(found));
            };
            simplex[k] = (x, v);
        }
    }
}

fn best_of(a: Point, b: Point) -> Point {
    if b.1.scalar < a.1.scalar {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheap() -> ObjectiveSettings {
        ObjectiveSettings {
            steps: 1000,
            band_points: 5,
            qs_intervals: 2000,
        }
    }

    #[test]
    fn weights_validation() {
        let mut w = ObjectiveWeights::default();
        w.validate().unwrap();
        w.w_band = -1.0;
        assert!(w.validate().is_err());
        let w = ObjectiveWeights {
            w_band: 0.0,
            w_leak: 0.0,
            w_qs: 0.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
    }

    #[test]
    fn table1_objective_components() {
        let v = objective(&AnsatzParams::table1(), &ObjectiveWeights::default()).unwrap();
        assert!(v.band_infid <= 0.005, "{v:?}");
        assert!(v.leak <= 0.08, "{v:?}");
        assert!(v.qs <= 0.02, "{v:?}");
        assert!((v.scalar - (v.band_infid + v.leak + v.qs)).abs() < 1e-15);
    }

    #[test]
    fn flat_ansatz_has_zero_qs_objective() {
        let mut p = AnsatzParams::zero(4.0);
        p.gaussians.clear();
        let w = ObjectiveWeights {
            w_band: 0.0,
            w_leak: 0.0,
            w_qs: 1.0,
            ..Default::default()
        };
        assert_eq!(objective_with(&p, &w, &cheap()).unwrap().scalar, 0.0);
    }

    #[test]
    fn probe_order_does_not_matter() {
        let p = AnsatzParams::table1();
        let w = ObjectiveWeights::default();
        let mut shuffled = w.clone();
        shuffled.leak_khz = vec![5000.0, 3500.0, 4000.0];
        let a = objective_with(&p, &w, &cheap()).unwrap();
        let b = objective_with(&p, &shuffled, &cheap()).unwrap();
        assert!((a.scalar - b.scalar).abs() < 1e-15);
    }

    #[test]
    fn elimination_is_exact() {
        let base = AnsatzParams::table1();
        let p = params_from_free(&base, &[0.1, -0.2, 0.3, 0.05, -0.07, 0.01]);
        let r = p.constraint_report();
        assert!(r.res13.abs() < 1e-15);
        assert!((r.res14 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_budget_is_rejected() {
        let r = optimize_an(&AnsatzParams::table1(), &ObjectiveWeights::default(), 10, 0);
        assert!(r.is_err());
    }

    #[test]
    fn short_run_contract() {
        let start = AnsatzParams::table1();
        let w = ObjectiveWeights::default();
        let mut opts = OptimizeOptions::new(60, 7);
        opts.settings = cheap();
        let mut seen = 0;
        let out = optimize_an_with(&start, &w, &opts, |p, _| {
            let r = p.constraint_report();
            assert!(r.res13.abs() < 1e-12 && (r.res14 - 0.5).abs() < 1e-12);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, out.evaluations);
        assert!(out.evaluations <= 60);
        assert!(out.budget_exhausted);
        assert!(out.value.scalar <= out.start_value.scalar);
        assert!(out
            .trace
            .windows(2)
            .all(|t| t[1].value.scalar <= t[0].value.scalar));

        let again = optimize_an_with(&start, &w, &opts, |_, _| {}).unwrap();
        assert_eq!(out, again);

        let mut buf = Vec::new();
        out.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,scalar,band_infid,leak,qs,a3,a4,a5,a6,a7,a8\n"));
        assert_eq!(text.lines().count(), out.trace.len() + 1);
    }
}
