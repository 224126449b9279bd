//! Three-level Lambda dynamics: Hamiltonian, Lewis-Riesenfeld invariant, the
//! zero-eigenvalue transport state, and a fixed-step RK4 Schrodinger propagator.
//!
//! Basis ordering is `(|1>, |e>, |0>)`, hbar = 1, times in us, rates in rad/us.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{rabi_from_angles, Angles, AnsatzParams, SINGULAR_GAMMA_EPS};
use crate::error::{PulseError, Result};

pub type CMatrix3 = Matrix3<Complex64>;

/// Default RK4 step count over the pulse (0.1 ns steps for a 4 us pulse).
pub const DEFAULT_STEPS: usize = 40_000;
pub const MIN_STEPS: usize = 100;
/// Maximum tolerated drift of `<psi|psi>` over a run.
pub const NORM_TOLERANCE: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Cyclic frequency in kHz to angular frequency in rad/us.
pub fn khz_to_rad_per_us(khz: f64) -> f64 {
    2.0 * PI * khz * 1e-3
}

/// Amplitudes on `|1>`, `|e>`, `|0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QState {
    pub c1: Complex64,
    pub ce: Complex64,
    pub c0: Complex64,
}

impl QState {
    pub fn new(c1: Complex64, ce: Complex64, c0: Complex64) -> Self {
        QState { c1, ce, c0 }
    }

    pub fn ground_one() -> Self {
        QState::new(Complex64::new(1.0, 0.0), ZERO, ZERO)
    }

    pub fn excited() -> Self {
        QState::new(ZERO, Complex64::new(1.0, 0.0), ZERO)
    }

    pub fn ground_zero() -> Self {
        QState::new(ZERO, ZERO, Complex64::new(1.0, 0.0))
    }

    /// `cos(theta)|1> + sin(theta) e^{i phi}|0>`.
    pub fn target(theta: f64, phi: f64) -> Self {
        QState::new(
            Complex64::new(theta.cos(), 0.0),
            ZERO,
            Complex64::from_polar(theta.sin(), phi),
        )
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c1.norm_sqr() + self.ce.norm_sqr() + self.c0.norm_sqr()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// `(P1, Pe, P0)`.
    pub fn populations(&self) -> [f64; 3] {
        [self.c1.norm_sqr(), self.ce.norm_sqr(), self.c0.norm_sqr()]
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QState) -> Complex64 {
        self.c1.conj() * other.c1 + self.ce.conj() * other.ce + self.c0.conj() * other.c0
    }

    /// `|<self|other>|^2`.
    pub fn overlap_sqr(&self, other: &QState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Largest componentwise amplitude difference.
    pub fn max_abs_diff(&self, other: &QState) -> f64 {
        (self.c1 - other.c1)
            .norm()
            .max((self.ce - other.ce).norm())
            .max((self.c0 - other.c0).norm())
    }
}

/// Perturbation knobs for one propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// Ion frequency offset as a cyclic frequency (kHz).
    pub detuning_khz: f64,
    /// Common multiplier on both Rabi envelopes.
    pub rabi_scale: f64,
    pub steps: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            detuning_khz: 0.0,
            rabi_scale: 1.0,
            steps: DEFAULT_STEPS,
        }
    }
}

impl SimSettings {
    pub fn with_detuning_khz(mut self, khz: f64) -> Self {
        self.detuning_khz = khz;
        self
    }

    pub fn with_rabi_scale(mut self, scale: f64) -> Self {
        self.rabi_scale = scale;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn detuning_rad_per_us(&self) -> f64 {
        khz_to_rad_per_us(self.detuning_khz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_scale >= 0.0) || !self.rabi_scale.is_finite() {
            return Err(PulseError::InvalidParams(format!(
                "rabi_scale must be non-negative, got {}",
                self.rabi_scale
            )));
        }
        if self.steps < MIN_STEPS {
            return Err(PulseError::InvalidParams(format!(
                "at least {MIN_STEPS} integrator steps are required, got {}",
                self.steps
            )));
        }
        if !self.detuning_khz.is_finite() {
            return Err(PulseError::InvalidParams("detuning must be finite".into()));
        }
        Ok(())
    }
}

/// Overall scale of the invariant. It cancels from every derived quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSpec {
    pub omega0: f64,
}

impl Default for InvariantSpec {
    fn default() -> Self {
        InvariantSpec { omega0: 1.0 }
    }
}

/// `H = (1/2)[[0, Wp, 0], [Wp, 2D, Ws e^{-i phi}], [0, Ws e^{i phi}, 0]]`.
pub fn hamiltonian(omega_p: f64, omega_s: f64, phi: f64, delta: f64) -> CMatrix3 {
    let p = Complex64::new(0.5 * omega_p, 0.0);
    let s_minus = Complex64::from_polar(0.5 * omega_s, -phi);
    CMatrix3::new(
        ZERO,
        p,
        ZERO, //
        p,
        Complex64::new(delta, 0.0),
        s_minus, //
        ZERO,
        s_minus.conj(),
        ZERO,
    )
}

/// The Lewis-Riesenfeld invariant built on the angles `gamma`, `beta`.
pub fn invariant(gamma: f64, beta: f64, phi: f64, spec: &InvariantSpec) -> CMatrix3 {
    let (sg, cg) = gamma.sin_cos();
    let (sb, cb) = beta.sin_cos();
    invariant_from_parts(cg * sb, sg, cg * cb, phi, 0.5 * spec.omega0)
}

/// Hermitian matrix with upper entries `(a, -i b e^{-i phi}, c e^{-i phi})`, times `scale`.
fn invariant_from_parts(a: f64, b: f64, c: f64, phi: f64, scale: f64) -> CMatrix3 {
    let e_minus = Complex64::from_polar(1.0, -phi);
    let x12 = Complex64::new(scale * a, 0.0);
    let x13 = -I * e_minus * (scale * b);
    let x23 = e_minus * (scale * c);
    CMatrix3::new(
        ZERO,
        x12,
        x13, //
        x12,
        ZERO,
        x23, //
        x13.conj(),
        x23.conj(),
        ZERO,
    )
}

/// Partial time derivative of the invariant along the ansatz angles.
fn invariant_rate(a: &Angles, phi: f64, spec: &InvariantSpec) -> CMatrix3 {
    let (sg, cg) = a.gamma.sin_cos();
    let (sb, cb) = a.beta.sin_cos();
    let (gd, bd) = (a.gamma_dot, a.beta_dot);
    let d12 = -sg * gd * sb + cg * cb * bd;
    let d13 = cg * gd;
    let d23 = -sg * gd * cb - cg * sb * bd;
    invariant_from_parts(d12, d13, d23, phi, 0.5 * spec.omega0)
}

/// Transport eigenstate with zero eigenvalue.
pub fn eigenstate_phi0(gamma: f64, beta: f64, phi: f64) -> QState {
    let (sg, cg) = gamma.sin_cos();
    let (sb, cb) = beta.sin_cos();
    QState::new(
        Complex64::new(cg * cb, 0.0),
        Complex64::new(0.0, -sg),
        Complex64::from_polar(-cg * sb, phi),
    )
}

/// `||dI/dt - i[I, H]||_F` for an arbitrary pair of drive envelopes.
pub fn invariance_residual_with_drive(
    a: &Angles,
    phi: f64,
    omega_p: f64,
    omega_s: f64,
    spec: &InvariantSpec,
) -> f64 {
    let inv = invariant(a.gamma, a.beta, phi, spec);
    let h = hamiltonian(omega_p, omega_s, phi, 0.0);
    let commutator = inv * h - h * inv;
    (invariant_rate(a, phi, spec) - commutator * I).norm()
}

/// Residual of the invariance condition for the inverse-engineered drive at `t`.
pub fn invariance_residual(t: f64, p: &AnsatzParams, spec: &InvariantSpec) -> Result<f64> {
    let a = p.angles(t);
    let (op, os) = rabi_from_angles(&a, t)?;
    Ok(invariance_residual_with_drive(&a, p.phi, op, os, spec))
}

/// Rabi envelopes tabulated at every RK4 stage time `k h / 2`, `k = 0..=2N`.
///
/// The samples are exact evaluations of the ansatz, so detuning and scale
/// sweeps share one table without any interpolation error.
#[derive(Debug, Clone)]
pub struct Drive {
    t_f: f64,
    steps: usize,
    phi: f64,
    omega_p: Vec<f64>,
    omega_s: Vec<f64>,
}

impl Drive {
    pub fn new(p: &AnsatzParams, steps: usize) -> Result<Self> {
        p.validate()?;
        if steps < MIN_STEPS {
            return Err(PulseError::InvalidParams(format!(
                "at least {MIN_STEPS} integrator steps are required, got {steps}"
            )));
        }
        let n = 2 * steps;
        let mut omega_p = Vec::with_capacity(n + 1);
        let mut omega_s = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = stage_time(p.t_f, n, k);
            let (op, os) = p.rabi(t)?;
            omega_p.push(op);
            omega_s.push(os);
        }
        Ok(Drive {
            t_f: p.t_f,
            steps,
            phi: p.phi,
            omega_p,
            omega_s,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn time(&self, step: usize) -> f64 {
        stage_time(self.t_f, self.steps, step)
    }

    /// Final state for detuning `delta` (rad/us) and envelope scale `scale`.
    pub fn final_state(&self, initial: QState, delta: f64, scale: f64) -> Result<QState> {
        self.evolve(initial, delta, scale, |_, _| {})
    }

    pub fn trajectory(&self, initial: QState, delta: f64, scale: f64) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(self.steps + 1);
        self.evolve(initial, delta, scale, |_, s| states.push(*s))?;
        let times = (0..=self.steps).map(|k| self.time(k)).collect();
        Ok(Trajectory { times, states })
    }

    /// RK4 integration of `i d psi/dt = H psi`; `observe` sees the state at every grid time.
    pub fn evolve<F>(
        &self,
        initial: QState,
        delta: f64,
        scale: f64,
        mut observe: F,
    ) -> Result<QState>
    where
        F: FnMut(usize, &QState),
    {
        if !initial.is_normalized(1e-9) {
            return Err(PulseError::InvalidParams(format!(
                "initial state is not normalized (norm^2 = {})",
                initial.norm_sqr()
            )));
        }
        if !(scale >= 0.0) || !scale.is_finite() || !delta.is_finite() {
            return Err(PulseError::InvalidParams(format!(
                "invalid drive scale {scale} or detuning {delta}"
            )));
        }
        let h = self.t_f / self.steps as f64;
        let e_minus = Complex64::from_polar(1.0, -self.phi);
        let e_plus = e_minus.conj();
        // -i H psi, with the sparse Lambda structure spelled out
        let rhs = |psi: &[Complex64; 3], op: f64, os: f64| -> [Complex64; 3] {
            let p = 0.5 * scale * op;
            let s = 0.5 * scale * os;
            [
                -I * (psi[1] * p),
                -I * (psi[0] * p + psi[1] * delta + e_minus * psi[2] * s),
                -I * (e_plus * psi[1] * s),
            ]
        };
        let axpy = |y: &[Complex64; 3], a: f64, k: &[Complex64; 3]| -> [Complex64; 3] {
            [y[0] + k[0] * a, y[1] + k[1] * a, y[2] + k[2] * a]
        };

        let norm0 = initial.norm_sqr();
        let mut psi = [initial.c1, initial.ce, initial.c0];
        let mut max_drift: f64 = 0.0;
        observe(0, &initial);
        for step in 0..self.steps {
            let (p0, s0) = (self.omega_p[2 * step], self.omega_s[2 * step]);
            let (pm, sm) = (self.omega_p[2 * step + 1], self.omega_s[2 * step + 1]);
            let (p1, s1) = (self.omega_p[2 * step + 2], self.omega_s[2 * step + 2]);
            let k1 = rhs(&psi, p0, s0);
            let k2 = rhs(&axpy(&psi, 0.5 * h, &k1), pm, sm);
            let k3 = rhs(&axpy(&psi, 0.5 * h, &k2), pm, sm);
            let k4 = rhs(&axpy(&psi, h, &k3), p1, s1);
            for j in 0..3 {
                psi[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
            }
            let state = QState::new(psi[0], psi[1], psi[2]);
            max_drift = max_drift.max((state.norm_sqr() - norm0).abs());
            observe(step + 1, &state);
        }
        if max_drift > NORM_TOLERANCE {
            return Err(PulseError::StepTooCoarse {
                drift: max_drift,
                steps: self.steps,
            });
        }
        Ok(QState::new(psi[0], psi[1], psi[2]))
    }
}

fn stage_time(t_f: f64, n: usize, k: usize) -> f64 {
    if k == n {
        t_f
    } else {
        t_f * k as f64 / n as f64
    }
}

/// Sampled state history of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &QState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Keeps every `stride`-th sample plus the final one.
    pub fn decimate(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let last = self.states.len() - 1;
        let keep: Vec<usize> = (0..=last)
            .filter(|k| k % stride == 0 || *k == last)
            .collect();
        Trajectory {
            times: keep.iter().map(|&k| self.times[k]).collect(),
            states: keep.iter().map(|&k| self.states[k]).collect(),
        }
    }
}

/// Full trajectory from `initial` under the ansatz drive and the given perturbations.
pub fn propagate(p: &AnsatzParams, s: &SimSettings, initial: QState) -> Result<Trajectory> {
    s.validate()?;
    Drive::new(p, s.steps)?.trajectory(initial, s.detuning_rad_per_us(), s.rabi_scale)
}

/// Final state only; avoids storing the trajectory.
pub fn propagate_final(p: &AnsatzParams, s: &SimSettings, initial: QState) -> Result<QState> {
    s.validate()?;
    Drive::new(p, s.steps)?.final_state(initial, s.detuning_rad_per_us(), s.rabi_scale)
}

/// Integrand of the `+` Lewis-Riesenfeld phase, `-beta_dot / sin(gamma)`.
pub(crate) fn alpha_plus_rate(a: &Angles, t: f64) -> Result<f64> {
    if a.beta_dot == 0.0 {
        return Ok(0.0);
    }
    let sg = a.gamma.sin();
    if sg.abs() < SINGULAR_GAMMA_EPS {
        return Err(PulseError::SingularGamma { t });
    }
    Ok(-a.beta_dot / sg)
}

/// Intervals per `t_f` used for the phase quadrature.
const ALPHA_INTERVALS: usize = 4000;

/// `alpha_+(t) = -int_0^t beta_dot / sin(gamma) dt'` by composite Simpson.
pub fn lr_phase_alpha_plus(t: f64, p: &AnsatzParams) -> Result<f64> {
    if !(0.0..=p.t_f).contains(&t) {
        return Err(PulseError::Domain(format!(
            "t = {t} is outside [0, {}]",
            p.t_f
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut n = ((ALPHA_INTERVALS as f64 * t / p.t_f).ceil() as usize).max(2);
    n += n % 2;
    let h = t / n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let tk = if k == n { t } else { h * k as f64 };
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * alpha_plus_rate(&p.angles(tk), tk)?;
    }
    Ok(sum * h / 3.0)
}
