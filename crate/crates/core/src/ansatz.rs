//! Gaussian/sine parametrization of the invariant angles and inverse-engineered
//! Rabi envelopes.
//!
//! The mixing angle is `gamma(t) = pi + sum_m A_m exp(-(t - B_m t_f)^2 / (C_m t_f)^2)`
//! and the transfer angle is
//! `beta(t) = -(theta/t_f) t + (theta/pi) sum_n a_n sin(n pi t / t_f) + pi`.
//! Given both angles, the pump and Stokes envelopes follow in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};

/// Below this `|sin(gamma)|` the `cot(gamma)` factor of the synthesis is treated as divergent.
pub const SINGULAR_GAMMA_EPS: f64 = 1e-9;

/// Default number of waveform samples for export.
pub const DEFAULT_WAVEFORM_SAMPLES: usize = 4001;

/// One Gaussian bump of the mixing angle. Center and width are fractions of `t_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "B")]
    pub center: f64,
    #[serde(rename = "C")]
    pub width: f64,
}

impl GaussianTerm {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        GaussianTerm {
            amplitude,
            center,
            width,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(PulseError::InvalidParams(format!(
                "gaussian {} has non-positive width C = {}",
                index + 1,
                self.width
            )));
        }
        if !(self.amplitude >= 0.0) {
            return Err(PulseError::InvalidParams(format!(
                "gaussian {} has negative amplitude A = {}",
                index + 1,
                self.amplitude
            )));
        }
        if !(self.center > 0.0 && self.center < 1.0) {
            return Err(PulseError::InvalidParams(format!(
                "gaussian {} center B = {} is outside (0, 1)",
                index + 1,
                self.center
            )));
        }
        Ok(())
    }
}

/// Free parameters of the ansatz.
///
/// `sines[k]` holds the coefficient `a_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    #[serde(rename = "theta_rad")]
    pub theta: f64,
    #[serde(rename = "phi_rad")]
    pub phi: f64,
    #[serde(rename = "t_f_us")]
    pub t_f: f64,
    pub gaussians: Vec<GaussianTerm>,
    pub sines: Vec<f64>,
}

/// Angles and their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub gamma: f64,
    pub beta: f64,
    pub gamma_dot: f64,
    pub beta_dot: f64,
}

impl AnsatzParams {
    /// Builds and validates a parameter set.
    pub fn new(
        theta: f64,
        phi: f64,
        t_f: f64,
        gaussians: Vec<GaussianTerm>,
        sines: Vec<f64>,
    ) -> Result<Self> {
        let p = AnsatzParams {
            theta,
            phi,
            t_f,
            gaussians,
            sines,
        };
        p.validate()?;
        Ok(p)
    }

    /// The published pulse: three Gaussians centred at `t_f/2`, eight sine terms,
    /// target `(|1> + i|0>)/sqrt(2)` reached in 4 us.
    pub fn table1() -> Self {
        AnsatzParams {
            theta: PI / 4.0,
            phi: PI / 2.0,
            t_f: 4.0,
            gaussians: vec![
                GaussianTerm::new(0.08, 0.5, 0.4),
                GaussianTerm::new(0.04, 0.5, 0.31),
                GaussianTerm::new(0.03, 0.5, 0.28),
            ],
            sines: vec![
                0.36, 0.8378, 0.04, -0.0329, -0.02, -0.0639, -0.0543, -0.0201,
            ],
        }
    }

    /// Pulse with no Gaussians, no sines and `theta = 0`: nothing is driven.
    pub fn zero(t_f: f64) -> Self {
        AnsatzParams {
            theta: 0.0,
            phi: 0.0,
            t_f,
            gaussians: Vec::new(),
            sines: vec![0.0; 8],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f > 0.0) || !self.t_f.is_finite() {
            return Err(PulseError::InvalidParams(format!(
                "t_f must be positive, got {}",
                self.t_f
            )));
        }
        if !self.theta.is_finite() || !self.phi.is_finite() {
            return Err(PulseError::InvalidParams(
                "theta and phi must be finite".into(),
            ));
        }
        for (i, g) in self.gaussians.iter().enumerate() {
            g.validate(i)?;
        }
        if self.sines.iter().any(|a| !a.is_finite()) {
            return Err(PulseError::InvalidParams(
                "sine coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn gamma(&self, t: f64) -> f64 {
        let t_f = self.t_f;
        PI + self
            .gaussians
            .iter()
            .map(|g| {
                let x = (t - g.center * t_f) / (g.width * t_f);
                g.amplitude * (-x * x).exp()
            })
            .sum::<f64>()
    }

    pub fn beta(&self, t: f64) -> f64 {
        let x = PI * t / self.t_f;
        let sum: f64 = self
            .sines
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * x).sin())
            .sum();
        -self.theta / self.t_f * t + self.theta / PI * sum + PI
    }

    /// Analytic `(d gamma/dt, d beta/dt)`.
    pub fn derivatives(&self, t: f64) -> (f64, f64) {
        let a = self.angles(t);
        (a.gamma_dot, a.beta_dot)
    }

    /// Both angles and both rates in one pass.
    pub fn angles(&self, t: f64) -> Angles {
        let t_f = self.t_f;
        let mut gamma = PI;
        let mut gamma_dot = 0.0;
        for g in &self.gaussians {
            let w = g.width * t_f;
            let d = t - g.center * t_f;
            let e = g.amplitude * (-(d * d) / (w * w)).exp();
            gamma += e;
            gamma_dot += -2.0 * d / (w * w) * e;
        }

        // sin(n x), cos(n x) by angle addition
        let x = PI * t / t_f;
        let (s1, c1) = x.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut sum_sin = 0.0;
        let mut sum_ncos = 0.0;
        for (k, a) in self.sines.iter().enumerate() {
            let n = (k + 1) as f64;
            sum_sin += a * s;
            sum_ncos += a * n * c;
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        let slope = self.theta / t_f;
        let beta = -slope * t + self.theta / PI * sum_sin + PI;
        let beta_dot = -slope + slope * sum_ncos;

        Angles {
            gamma,
            beta,
            gamma_dot,
            beta_dot,
        }
    }

    /// Pump and Stokes Rabi frequencies (rad/us) that realize the invariant.
    pub fn rabi(&self, t: f64) -> Result<(f64, f64)> {
        rabi_from_angles(&self.angles(t), t)
    }

    /// Residuals of the endpoint conditions. Pure report; thresholds live in
    /// [`ConstraintReport::is_boundary_safe`].
    pub fn constraint_report(&self) -> ConstraintReport {
        let mut res13 = 0.0;
        let mut res14 = 0.0;
        for (k, a) in self.sines.iter().enumerate() {
            let n = k + 1;
            if n % 2 == 1 {
                res13 += n as f64 * a;
            } else {
                res14 += (n / 2) as f64 * a;
            }
        }

        let grid = uniform_grid(self.t_f, DEFAULT_WAVEFORM_SAMPLES);
        let mut peak_gamma_rate: f64 = 0.0;
        let mut peak_rabi = Some(0.0_f64);
        for &t in &grid {
            let a = self.angles(t);
            peak_gamma_rate = peak_gamma_rate.max(a.gamma_dot.abs());
            if let Some(peak) = peak_rabi {
                peak_rabi = rabi_from_angles(&a, t)
                    .ok()
                    .map(|(op, os)| peak.max(op.abs()).max(os.abs()));
            }
        }

        ConstraintReport {
            res13,
            res14,
            res15_start: self.gaussian_slope(0.0),
            res15_end: self.gaussian_slope(self.t_f),
            t_f: self.t_f,
            peak_gamma_rate,
            peak_rabi,
        }
    }

    /// `sum_m A_m 2(t - B_m t_f)/(C_m^2 t_f) exp(..)`, i.e. `-t_f d gamma/dt`.
    fn gaussian_slope(&self, t: f64) -> f64 {
        let t_f = self.t_f;
        self.gaussians
            .iter()
            .map(|g| {
                let d = t - g.center * t_f;
                let w = g.width * t_f;
                g.amplitude * 2.0 * d / (g.width * g.width * t_f) * (-(d * d) / (w * w)).exp()
            })
            .sum()
    }

    /// Rewrites `a_1` and `a_2` so that the odd and even endpoint sums hold exactly.
    pub fn enforce_linear_constraints(&mut self) -> Result<()> {
        if self.sines.len() < 2 {
            return Err(PulseError::InvalidParams(
                "at least two sine terms are needed to eliminate a_1 and a_2".into(),
            ));
        }
        let (a1, a2) = eliminated_leading(&self.sines[2..]);
        self.sines[0] = a1;
        self.sines[1] = a2;
        Ok(())
    }

    /// Copy with `a_1`, `a_2` recomputed by [`Self::enforce_linear_constraints`].
    pub fn projected(&self) -> Result<Self> {
        let mut p = self.clone();
        p.enforce_linear_constraints()?;
        Ok(p)
    }

    /// Samples the Rabi envelopes on a uniform grid over `[0, t_f]`.
    pub fn sample_waveform(&self, n_samples: usize) -> Result<Waveform> {
        if n_samples < 2 {
            return Err(PulseError::InvalidParams(format!(
                "waveform needs at least 2 samples, got {n_samples}"
            )));
        }
        let times = uniform_grid(self.t_f, n_samples);
        let mut omega_p = Vec::with_capacity(n_samples);
        let mut omega_s = Vec::with_capacity(n_samples);
        for &t in &times {
            let (op, os) = self.rabi(t)?;
            omega_p.push(op);
            omega_s.push(os);
        }
        Ok(Waveform {
            times,
            omega_p,
            omega_s,
            phi: self.phi,
        })
    }
}

/// `a_1`, `a_2` implied by the free coefficients `a_3..a_N` (passed starting at `a_3`).
pub fn eliminated_leading(free: &[f64]) -> (f64, f64) {
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, a) in free.iter().enumerate() {
        let n = k + 3;
        if n % 2 == 1 {
            odd += n as f64 * a;
        } else {
            even += (n / 2) as f64 * a;
        }
    }
    (-odd, 0.5 - even)
}

pub(crate) fn rabi_from_angles(a: &Angles, t: f64) -> Result<(f64, f64)> {
    let (sb, cb) = a.beta.sin_cos();
    // beta_dot * cot(gamma); an exactly static beta contributes nothing even at gamma = pi
    let cot_term = if a.beta_dot == 0.0 {
        0.0
    } else {
        let sg = a.gamma.sin();
        if sg.abs() < SINGULAR_GAMMA_EPS {
            return Err(PulseError::SingularGamma { t });
        }
        a.beta_dot * a.gamma.cos() / sg
    };
    let omega_p = 2.0 * (cot_term * sb + a.gamma_dot * cb);
    let omega_s = 2.0 * (cot_term * cb - a.gamma_dot * sb);
    Ok((omega_p, omega_s))
}

pub(crate) fn uniform_grid(t_f: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                t_f
            } else {
                t_f * i as f64 / last
            }
        })
        .collect()
}

/// Thresholds for calling a parameter set boundary-safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTolerance {
    /// Allowed deviation of the odd sum from 0 and the even sum from 0.5.
    pub linear: f64,
    /// Allowed endpoint Rabi magnitude `2|res15|/t_f` as a fraction of the pulse peak.
    pub endpoint_rabi: f64,
}

impl Default for BoundaryTolerance {
    fn default() -> Self {
        BoundaryTolerance {
            linear: 1e-3,
            endpoint_rabi: 1e-2,
        }
    }
}

/// Residuals of the zero-endpoint conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// `a_1 + 3a_3 + 5a_5 + ...`, target 0.
    pub res13: f64,
    /// `a_2 + 2a_4 + 3a_6 + ...`, target 0.5.
    pub res14: f64,
    /// Dimensionless Gaussian-derivative sum at `t = 0`; equals `-t_f d gamma/dt`.
    pub res15_start: f64,
    /// Same sum at `t = t_f`.
    pub res15_end: f64,
    pub t_f: f64,
    /// Peak `|d gamma/dt|` on the export grid.
    pub peak_gamma_rate: f64,
    /// Peak `max(|Omega_p|, |Omega_s|)`; `None` if the synthesis is singular.
    pub peak_rabi: Option<f64>,
}

impl ConstraintReport {
    pub fn is_boundary_safe(&self, tol: &BoundaryTolerance) -> bool {
        self.failures(tol).is_empty()
    }

    /// Human-readable list of violated conditions.
    pub fn failures(&self, tol: &BoundaryTolerance) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.res13.abs() <= tol.linear) {
            out.push(format!(
                "odd-sum residual {:.6} exceeds {}",
                self.res13, tol.linear
            ));
        }
        if !((self.res14 - 0.5).abs() <= tol.linear) {
            out.push(format!(
                "even-sum {:.6} misses 0.5 by more than {}",
                self.res14, tol.linear
            ));
        }
        match self.peak_rabi {
            None => out.push("Rabi synthesis is singular".into()),
            Some(peak) => {
                for (label, r) in [("start", self.res15_start), ("end", self.res15_end)] {
                    let endpoint = 2.0 * r.abs() / self.t_f;
                    if !(endpoint <= tol.endpoint_rabi * peak) {
                        out.push(format!(
                            "gaussian slope at {label} ({r:.3e}) gives an endpoint Rabi \
                             frequency {endpoint:.3e} rad/us, above {} of the peak {peak:.3}",
                            tol.endpoint_rabi
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Time-sampled Rabi envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub omega_p: Vec<f64>,
    pub omega_s: Vec<f64>,
    pub phi: f64,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Peak magnitude over both channels.
    pub fn peak(&self) -> f64 {
        self.omega_p
            .iter()
            .chain(&self.omega_s)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn peak_p(&self) -> f64 {
        self.omega_p.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn peak_s(&self) -> f64 {
        self.omega_s.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// True if all four endpoint samples are within `rel` of the overall peak.
    pub fn endpoints_vanish(&self, rel: f64) -> bool {
        let Some(last) = self.times.len().checked_sub(1) else {
            return false;
        };
        let limit = rel * self.peak();
        [
            self.omega_p[0],
            self.omega_s[0],
            self.omega_p[last],
            self.omega_s[last],
        ]
        .iter()
        .all(|v| v.abs() <= limit)
    }

    /// Time at which each envelope peaks.
    pub fn peak_times(&self) -> (f64, f64) {
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .fold((0, 0.0_f64), |(bi, bv), (i, x)| {
                    if x.abs() > bv {
                        (i, x.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0
        };
        (
            self.times[argmax(&self.omega_p)],
            self.times[argmax(&self.omega_s)],
        )
    }
}
