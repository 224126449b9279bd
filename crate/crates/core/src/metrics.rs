//! Fidelity, excited-state dwell time and the intensity-error sensitivity `q_s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::ansatz::AnsatzParams;
use crate::dynamics::{alpha_plus_rate, eigenstate_phi0, Drive, QState, Trajectory, DEFAULT_STEPS};
use crate::error::{PulseError, Result};

/// Uniform intervals for the `q_s` quadrature (20,001 nodes).
pub const QS_INTERVALS: usize = 20_000;

/// Half-width of the scale stencil used by [`curvature_check`].
pub const CURVATURE_STEP: f64 = 0.02;

/// `|<target|psi>|^2` with target `cos(theta)|1> + sin(theta) e^{i phi}|0>`.
pub fn fidelity(state: &QState, theta: f64, phi: f64) -> f64 {
    QState::target(theta, phi)
        .overlap_sqr(state)
        .clamp(0.0, 1.0)
}

/// Time-integrated excited population `int |c_e|^2 dt` (us), trapezoidal.
pub fn dwell_time(traj: &Trajectory) -> f64 {
    traj.times
        .windows(2)
        .zip(traj.states.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0].ce.norm_sqr() + s[1].ce.norm_sqr()))
        .sum()
}

/// `q_s = |int_0^{t_f} e^{-i alpha_+(t)} (beta_dot cos(gamma) + i gamma_dot) dt|^2`.
pub fn qs_numeric(p: &AnsatzParams) -> Result<f64> {
    qs_numeric_with(p, QS_INTERVALS)
}

/// [`qs_numeric`] with a chosen (even) number of Simpson intervals.
///
/// The phase `alpha_+` is carried node to node with a per-interval Simpson rule
/// (one midpoint evaluation), the outer integral is composite Simpson.
pub fn qs_numeric_with(p: &AnsatzParams, intervals: usize) -> Result<f64> {
    p.validate()?;
    if intervals < 2 || !intervals.is_multiple_of(2) {
        return Err(PulseError::InvalidParams(format!(
            "q_s quadrature needs an even number of intervals, got {intervals}"
        )));
    }
    let h = p.t_f / intervals as f64;
    let node = |k: usize| if k == intervals { p.t_f } else { h * k as f64 };

    let mut alpha = 0.0;
    let mut total = Complex64::default();
    let mut a = p.angles(0.0);
    let mut rate = alpha_plus_rate(&a, 0.0)?;
    for k in 0..=intervals {
        let t = node(k);
        let weight = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let integrand = Complex64::from_polar(1.0, -alpha)
            * Complex64::new(a.beta_dot * a.gamma.cos(), a.gamma_dot);
        total += integrand * weight;

        if k < intervals {
            let tm = t + 0.5 * h;
            let rate_mid = alpha_plus_rate(&p.angles(tm), tm)?;
            let t_next = node(k + 1);
            let a_next = p.angles(t_next);
            let rate_next = alpha_plus_rate(&a_next, t_next)?;
            alpha += h / 6.0 * (rate + 4.0 * rate_mid + rate_next);
            a = a_next;
            rate = rate_next;
        }
    }
    Ok((total * (h / 3.0)).norm_sqr())
}

/// Closed-form `q_s` for a mixing angle held at `pi + eps` with a linear transfer angle.
pub fn qs_approx(epsilon: f64, theta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 6.0_f64.sqrt()) {
        return Err(PulseError::Domain(format!(
            "epsilon must lie in (0, sqrt(6)), got {epsilon}"
        )));
    }
    let arg = 6.0 * theta / (6.0 * epsilon - epsilon.powi(3));
    Ok(2.0 * epsilon * epsilon * (1.0 - arg.cos()))
}

/// Second-order perturbative fidelity `1 - lambda^2 q_s` under a uniform Rabi error.
pub fn perturbed_fidelity(p: &AnsatzParams, lambda: f64) -> Result<f64> {
    if !(lambda.abs() <= 1.0) {
        return Err(PulseError::Domain(format!(
            "|lambda| must be <= 1, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - lambda * lambda * qs_numeric(p)?)
}

/// Finite-difference estimate of `-(1/2) d^2 P / d lambda^2` at `lambda = 0`.
///
/// `P(lambda)` is the overlap of the final state with `|phi_0(t_f)>` after
/// propagating `|phi_0(0)>` with both envelopes scaled by `1 + lambda`, i.e. the
/// quantity whose expansion defines `q_s`.
pub fn curvature_check(p: &AnsatzParams) -> Result<f64> {
    curvature_check_with(p, CURVATURE_STEP, DEFAULT_STEPS)
}

pub fn curvature_check_with(p: &AnsatzParams, step: f64, steps: usize) -> Result<f64> {
    if !(step > 0.0 && step < 1.0) {
        return Err(PulseError::InvalidParams(format!(
            "stencil step must be in (0, 1), got {step}"
        )));
    }
    let drive = Drive::new(p, steps)?;
    let start = eigenstate_phi0(p.gamma(0.0), p.beta(0.0), p.phi);
    let end = eigenstate_phi0(p.gamma(p.t_f), p.beta(p.t_f), p.phi);
    let overlap =
        |scale: f64| -> Result<f64> { Ok(end.overlap_sqr(&drive.final_state(start, 0.0, scale)?)) };
    let plus = overlap(1.0 + step)?;
    let center = overlap(1.0)?;
    let minus = overlap(1.0 - step)?;
    Ok(-0.5 * (plus - 2.0 * center + minus) / (step * step))
}

/// Sensitivity summary for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub qs_numeric: f64,
    /// Mid-pulse deviation `|gamma(t_f/2) - pi|`.
    pub epsilon: f64,
    /// Closed-form estimate at `epsilon`; 0 when `epsilon` is 0.
    pub qs_approx: f64,
    pub theta: f64,
}

pub fn sensitivity_report(p: &AnsatzParams) -> Result<SensitivityReport> {
    let qs = qs_numeric(p)?;
    let epsilon = (p.gamma(0.5 * p.t_f) - PI).abs();
    let approx = if epsilon == 0.0 {
        0.0
    } else {
        qs_approx(epsilon, p.theta)?
    };
    Ok(SensitivityReport {
        qs_numeric: qs,
        epsilon,
        qs_approx: approx,
        theta: p.theta,
    })
}
