//! Parametric robustness studies: detuning response, Rabi-scale variation,
//! Gaussian-beam averaging, `a_2` perturbation and the single-Gaussian width study.
//!
//! Grid points are independent and evaluated with rayon; results are always
//! collected in grid order, so output does not depend on the worker count.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzParams, GaussianTerm};
use crate::dynamics::{khz_to_rad_per_us, Drive, QState};
use crate::error::{PulseError, Result};
use crate::metrics::fidelity;

/// Default detuning grid: 1001 points over +-5 MHz.
pub const DEFAULT_DETUNING_POINTS: usize = 1001;
pub const DEFAULT_DETUNING_SPAN_KHZ: f64 = 5000.0;
pub const DEFAULT_RINGS: usize = 200;

/// `points` evenly spaced values from `min` to `max`, endpoints exact.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let last = (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        max
                    } else {
                        min + (max - min) * i as f64 / last
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Detuning,
    Rabi,
    A2,
    C1Width,
}

impl SweepKind {
    pub fn header(&self) -> &'static str {
        match self {
            SweepKind::Detuning => "detuning_khz,fidelity,p1,pe,p0",
            SweepKind::Rabi => "eta,detuning_khz,fidelity",
            SweepKind::A2 => "delta_frac,detuning_khz,fidelity,p0",
            SweepKind::C1Width => "c1,detuning_khz,fidelity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: &'static str,
    pub values: Vec<f64>,
}

/// Final-state metrics at one grid point. `coords` follows the report's axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub fidelity: f64,
    pub p1: f64,
    pub pe: f64,
    pub p0: f64,
}

impl SweepRow {
    fn new(coords: Vec<f64>, state: &QState, theta: f64, phi: f64) -> Self {
        let [p1, pe, p0] = state.populations();
        SweepRow {
            coords,
            fidelity: fidelity(state, theta, phi),
            p1,
            pe,
            p0,
        }
    }

    /// Population that left the initial level, `1 - P1`.
    pub fn excitation(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn detuning_khz(&self) -> f64 {
        *self.coords.last().expect("every sweep has a detuning axis")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub axes: Vec<Axis>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Checks the grid shape and the probability bookkeeping of every row.
    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.axes.iter().map(|a| a.values.len()).product();
        if expected != self.rows.len() {
            return Err(PulseError::Domain(format!(
                "report has {} rows for a grid of {expected}",
                self.rows.len()
            )));
        }
        let unit = -1e-12..=1.0 + 1e-12;
        for row in &self.rows {
            let total = row.p1 + row.pe + row.p0;
            if !(total - 1.0).abs().le(&1e-6) {
                return Err(PulseError::Domain(format!("populations sum to {total}")));
            }
            if ![row.fidelity, row.p1, row.pe, row.p0]
                .iter()
                .all(|v| unit.contains(v))
            {
                return Err(PulseError::Domain(format!(
                    "value outside [0, 1] in {row:?}"
                )));
            }
        }
        Ok(())
    }

    /// Rows whose leading coordinates equal `prefix`.
    pub fn slice<'a>(&'a self, prefix: &'a [f64]) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.coords.starts_with(prefix))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.kind.header())?;
        for r in &self.rows {
            let coords = r
                .coords
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",");
            match self.kind {
                SweepKind::Detuning => {
                    writeln!(w, "{coords},{},{},{},{}", r.fidelity, r.p1, r.pe, r.p0)?
                }
                SweepKind::Rabi | SweepKind::C1Width => writeln!(w, "{coords},{}", r.fidelity)?,
                SweepKind::A2 => writeln!(w, "{coords},{},{}", r.fidelity, r.p0)?,
            }
        }
        Ok(())
    }
}

/// Final states from `|1>` for every detuning at one envelope scale.
fn detuning_rows(
    drive: &Drive,
    p: &AnsatzParams,
    scale: f64,
    detunings_khz: &[f64],
    prefix: &[f64],
) -> Result<Vec<SweepRow>> {
    detunings_khz
        .par_iter()
        .map(|&khz| {
            let state = drive.final_state(QState::ground_one(), khz_to_rad_per_us(khz), scale)?;
            let mut coords = prefix.to_vec();
            coords.push(khz);
            Ok(SweepRow::new(coords, &state, p.theta, p.phi))
        })
        .collect()
}

/// Fidelity and populations at `t_f` versus detuning, starting from `|1>`.
pub fn sweep_detuning(
    p: &AnsatzParams,
    min_khz: f64,
    max_khz: f64,
    points: usize,
    steps: usize,
) -> Result<SweepReport> {
    if points < 2 {
        return Err(PulseError::InvalidParams(format!(
            "need at least 2 points, got {points}"
        )));
    }
    sweep_detuning_grid(p, &linspace(min_khz, max_khz, points), steps)
}

/// [`sweep_detuning`] on an explicit grid.
pub fn sweep_detuning_grid(
    p: &AnsatzParams,
    detunings_khz: &[f64],
    steps: usize,
) -> Result<SweepReport> {
    require_nonempty(detunings_khz, "detuning")?;
    let drive = Drive::new(p, steps)?;
    let rows = detuning_rows(&drive, p, 1.0, detunings_khz, &[])?;
    Ok(SweepReport {
        kind: SweepKind::Detuning,
        axes: vec![Axis {
            name: "detuning_khz",
            values: detunings_khz.to_vec(),
        }],
        rows,
    })
}

/// Fidelity over fractional Rabi variations `eta` (scale `1 + eta`) and detunings.
pub fn sweep_rabi(
    p: &AnsatzParams,
    etas: &[f64],
    detunings_khz: &[f64],
    steps: usize,
) -> Result<SweepReport> {
    require_nonempty(etas, "eta")?;
    require_nonempty(detunings_khz, "detuning")?;
    if let Some(eta) = etas.iter().find(|e| !(1.0 + **e > 0.0)) {
        return Err(PulseError::InvalidParams(format!(
            "1 + eta must be positive, got eta = {eta}"
        )));
    }
    let drive = Drive::new(p, steps)?;
    let rows = grid_rows(etas, |eta| {
        detuning_rows(&drive, p, 1.0 + eta, detunings_khz, &[eta])
    })?;
    Ok(SweepReport {
        kind: SweepKind::Rabi,
        axes: vec![
            Axis {
                name: "eta",
                values: etas.to_vec(),
            },
            Axis {
                name: "detuning_khz",
                values: detunings_khz.to_vec(),
            },
        ],
        rows,
    })
}

/// Fidelity and `P0` with `a_2` replaced by `a_2 (1 + delta)`.
pub fn sweep_a2(
    p: &AnsatzParams,
    delta_fracs: &[f64],
    detunings_khz: &[f64],
    steps: usize,
) -> Result<SweepReport> {
    require_nonempty(delta_fracs, "delta")?;
    require_nonempty(detunings_khz, "detuning")?;
    if p.sines.len() < 2 {
        return Err(PulseError::InvalidParams(
            "ansatz has no a_2 coefficient".into(),
        ));
    }
    let rows = grid_rows(delta_fracs, |delta| {
        let mut varied = p.clone();
        varied.sines[1] *= 1.0 + delta;
        let drive = Drive::new(&varied, steps)?;
        detuning_rows(&drive, &varied, 1.0, detunings_khz, &[delta])
    })?;
    Ok(SweepReport {
        kind: SweepKind::A2,
        axes: vec![
            Axis {
                name: "delta_frac",
                values: delta_fracs.to_vec(),
            },
            Axis {
                name: "detuning_khz",
                values: detunings_khz.to_vec(),
            },
        ],
        rows,
    })
}

/// The width-study ansatz: one Gaussian `A_1 = 0.1, B_1 = 0.5, C_1 = c1`, only `a_2 = 0.5`,
/// same target and duration as the published pulse.
pub fn width_study_params(c1: f64) -> Result<AnsatzParams> {
    AnsatzParams::new(
        PI / 4.0,
        PI / 2.0,
        4.0,
        vec![GaussianTerm::new(0.1, 0.5, c1)],
        vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )
}

/// Fidelity versus detuning for each single-Gaussian width `C_1`.
pub fn sweep_c1_width(
    c1_values: &[f64],
    detunings_khz: &[f64],
    steps: usize,
) -> Result<SweepReport> {
    require_nonempty(c1_values, "C1")?;
    require_nonempty(detunings_khz, "detuning")?;
    let rows = grid_rows(c1_values, |c1| {
        let p = width_study_params(c1)?;
        let drive = Drive::new(&p, steps)?;
        detuning_rows(&drive, &p, 1.0, detunings_khz, &[c1])
    })?;
    Ok(SweepReport {
        kind: SweepKind::C1Width,
        axes: vec![
            Axis {
                name: "c1",
                values: c1_values.to_vec(),
            },
            Axis {
                name: "detuning_khz",
                values: detunings_khz.to_vec(),
            },
        ],
        rows,
    })
}

/// Smallest positive detuning where the fidelity first drops below `level`,
/// linearly interpolated; `None` if it never does or the centre is already below.
pub fn fidelity_half_width(rows: &[&SweepRow], level: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.detuning_khz() >= 0.0)
        .map(|r| (r.detuning_khz(), r.fidelity))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut prev_d, mut prev_f) = *pts.first()?;
    if prev_f < level {
        return None;
    }
    for &(d, f) in &pts[1..] {
        if f < level {
            return Some(prev_d + (prev_f - level) / (prev_f - f) * (d - prev_d));
        }
        (prev_d, prev_f) = (d, f);
    }
    None
}

fn grid_rows<F>(outer: &[f64], per_value: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> Result<Vec<SweepRow>> + Sync,
{
    let blocks: Vec<Vec<SweepRow>> = outer
        .par_iter()
        .map(|&v| per_value(v))
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn require_nonempty(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(PulseError::InvalidParams(format!("{what} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PulseError::InvalidParams(format!(
            "{what} grid has non-finite values"
        )));
    }
    Ok(())
}

/// How a ring's share of the collected signal is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RingWeighting {
    /// `int Omega(r) 2 pi r dr`: signal summed over the annulus area.
    #[default]
    Annular,
    /// `int Omega(r) dr`: radial line integral, no area factor.
    Radial,
}

/// Gaussian beam cut into `n_rings` rings out to `r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamModel {
    /// Intensity `1/e^2` radius; the Rabi frequency falls as `exp(-r^2/w0^2)`.
    pub w0: f64,
    pub n_rings: usize,
    pub r_max: f64,
    pub weighting: RingWeighting,
}

impl BeamModel {
    pub fn new(w0: f64, n_rings: usize, r_max: f64) -> Self {
        BeamModel {
            w0,
            n_rings,
            r_max,
            weighting: RingWeighting::default(),
        }
    }

    pub fn with_weighting(mut self, weighting: RingWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rings < 10 {
            return Err(PulseError::InvalidParams(format!(
                "beam model needs at least 10 rings, got {}",
                self.n_rings
            )));
        }
        if !(self.r_max > 0.0) || !(self.w0 > 0.0) {
            return Err(PulseError::InvalidParams(
                "w0 and r_max must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Relative Rabi frequency at radius `r`.
    pub fn relative_rabi(&self, r: f64) -> f64 {
        let x = r / self.w0;
        (-x * x).exp()
    }

    /// Outer radius of ring `i` (1-based), `r_i = i r_max / N`.
    pub fn ring_radius(&self, i: usize) -> f64 {
        if i == self.n_rings {
            self.r_max
        } else {
            self.r_max * i as f64 / self.n_rings as f64
        }
    }

    /// Normalized ring weights `p(r_i)`, each ring integrated with Simpson's rule.
    pub fn weights(&self) -> Vec<f64> {
        const SUB: usize = 8;
        let density = |r: f64| match self.weighting {
            RingWeighting::Annular => self.relative_rabi(r) * 2.0 * PI * r,
            RingWeighting::Radial => self.relative_rabi(r),
        };
        let raw: Vec<f64> = (1..=self.n_rings)
            .map(|i| {
                let (a, b) = (self.ring_radius(i - 1), self.ring_radius(i));
                let h = (b - a) / SUB as f64;
                let inner: f64 = (1..SUB)
                    .map(|k| (if k % 2 == 1 { 4.0 } else { 2.0 }) * density(a + h * k as f64))
                    .sum();
                h / 3.0 * (density(a) + inner + density(b))
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Per-ring fidelities and the weighted average over the beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamAverage {
    pub effective_fidelity: f64,
    pub ring_fidelities: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `sum_i p(r_i) F(r_i)` where `F(r_i)` is propagated at scale `Omega(r_i)/Omega_peak`.
pub fn beam_effective_fidelity(
    p: &AnsatzParams,
    beam: &BeamModel,
    detuning_khz: f64,
    steps: usize,
) -> Result<f64> {
    let drive = Drive::new(p, steps)?;
    Ok(beam_average(&drive, p, beam, detuning_khz)?.effective_fidelity)
}

pub fn beam_average(
    drive: &Drive,
    p: &AnsatzParams,
    beam: &BeamModel,
    detuning_khz: f64,
) -> Result<BeamAverage> {
    beam.validate()?;
    let delta = khz_to_rad_per_us(detuning_khz);
    let ring_fidelities: Vec<f64> = (1..=beam.n_rings)
        .into_par_iter()
        .map(|i| {
            let scale = beam.relative_rabi(beam.ring_radius(i));
            let state = drive.final_state(QState::ground_one(), delta, scale)?;
            Ok(fidelity(&state, p.theta, p.phi))
        })
        .collect::<Result<_>>()?;
    let weights = beam.weights();
    let effective_fidelity = weights
        .iter()
        .zip(&ring_fidelities)
        .map(|(w, f)| w * f)
        .sum();
    Ok(BeamAverage {
        effective_fidelity,
        ring_fidelities,
        weights,
    })
}

/// Effective fidelity as a function of the collection radius `r_max / w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSweep {
    pub rows: Vec<(f64, f64)>,
}

impl BeamSweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r_over_w0,effective_fidelity")?;
        for (r, f) in &self.rows {
            writeln!(w, "{r},{f}")?;
        }
        Ok(())
    }
}

pub fn sweep_beam(
    p: &AnsatzParams,
    radii_over_w0: &[f64],
    n_rings: usize,
    weighting: RingWeighting,
    detuning_khz: f64,
    steps: usize,
) -> Result<BeamSweep> {
    require_nonempty(radii_over_w0, "radius")?;
    let drive = Drive::new(p, steps)?;
    let rows = radii_over_w0
        .iter()
        .map(|&r| {
            let beam = BeamModel::new(1.0, n_rings, r).with_weighting(weighting);
            Ok((
                r,
                beam_average(&drive, p, &beam, detuning_khz)?.effective_fidelity,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(BeamSweep { rows })
}
