//! Lyapunov functions, the quadratic comparison matrices, and envelope
//! checks for recorded runs.

use crate::controllers::{AdaptiveState, GainSet};
use crate::dynamics::{ReferenceSample, RigidBodyState};
use crate::so3::{self, Vec3};
use nalgebra as na;
use std::f64::consts::SQRT_2;
use thiserror::Error;

pub type Mat2 = na::Matrix2<f64>;

/// Relative slack applied to the exponential envelope.
pub const DEFAULT_ENVELOPE_TOL: f64 = 1e-3;

/// A theoretically non-increasing value may rise by this much between
/// samples before it counts as a violation (integrator noise floor).
pub const MONOTONE_STEP_TOL: f64 = 1e-9;

/// Absolute floor added to the envelope so runs started at (or decayed to)
/// zero error are not failed on integrator residue.
const ENVELOPE_ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("comparison matrix W3 is not positive definite (lambda_min = {0:.6})")]
    InvalidGains(f64),
}

/// Baseline Lyapunov value `k_r/4 |R - rd|^2 + 1/2 |omega - omega_d|^2`.
pub fn eval_v0(state: &RigidBodyState, refs: &ReferenceSample, gains: &GainSet) -> f64 {
    let e_att = (state.r.matrix() - refs.rd.matrix()).norm_squared();
    gains.k_r / 4.0 * e_att + (state.omega - refs.omega_d).norm_squared() / 2.0
}

/// Cross-term Lyapunov value `V = V0 + mu <e_R, e_omega>`.
pub fn eval_v(state: &RigidBodyState, refs: &ReferenceSample, gains: &GainSet) -> f64 {
    let e_r = so3::attitude_error_vector(&state.r, &refs.rd);
    eval_v0(state, refs, gains) + gains.mu * e_r.dot(&(state.omega - refs.omega_d))
}

/// Adaptive Lyapunov value `V + |delta - delta_hat|^2 / (2 k_delta)`.
pub fn eval_v_bar(
    state: &RigidBodyState,
    refs: &ReferenceSample,
    gains: &GainSet,
    adaptive: &AdaptiveState,
    delta: &Vec3,
) -> f64 {
    eval_v(state, refs, gains)
        + (delta - adaptive.delta_hat).norm_squared() / (2.0 * gains.k_delta)
}

/// The 2x2 comparison matrices sandwiching V and bounding its decay, plus
/// the resulting rate `sigma = lambda_min(W3) / lambda_max(W2)`.
#[derive(Clone, Copy, Debug)]
pub struct StabilityMatrices {
    pub w1: Mat2,
    pub w2: Mat2,
    pub w3: Mat2,
    pub lambda_min_w3: f64,
    pub lambda_max_w2: f64,
    pub sigma: f64,
}

/// Build the comparison matrices for a gain set. Fails only when W3 is not
/// positive definite, i.e. the cross-term weight is too large for the gains.
pub fn stability_matrices(gains: &GainSet) -> Result<StabilityMatrices, DiagnosticsError> {
    let q = gains.mu / (2.0 * SQRT_2);
    let w1 = Mat2::new(gains.k_r / 4.0, -q, -q, 0.5);
    let w2 = Mat2::new(gains.k_r / 4.0, q, q, 0.5);
    let w3 = Mat2::new(
        (1.0 - gains.a) / 2.0 * gains.mu * gains.k_r,
        -gains.mu * gains.k_omega / (2.0 * SQRT_2),
        -gains.mu * gains.k_omega / (2.0 * SQRT_2),
        gains.k_omega - gains.mu,
    );
    let (lambda_min_w3, _) = eigen_symmetric_2x2(&w3);
    if lambda_min_w3 <= 0.0 {
        return Err(DiagnosticsError::InvalidGains(lambda_min_w3));
    }
    let (_, lambda_max_w2) = eigen_symmetric_2x2(&w2);
    Ok(StabilityMatrices {
        w1,
        w2,
        w3,
        lambda_min_w3,
        lambda_max_w2,
        sigma: lambda_min_w3 / lambda_max_w2,
    })
}

/// Closed-form eigenvalues of a symmetric 2x2 matrix, returned (min, max).
fn eigen_symmetric_2x2(m: &Mat2) -> (f64, f64) {
    let mean = (m[(0, 0)] + m[(1, 1)]) / 2.0;
    let half_diff = (m[(0, 0)] - m[(1, 1)]) / 2.0;
    let radius = (half_diff * half_diff + m[(0, 1)] * m[(1, 0)]).sqrt();
    (mean - radius, mean + radius)
}

/// One recorded Lyapunov sample. The attitude error is the Frobenius norm
/// `|R - rd|`; the adaptive fields are absent for the non-adaptive laws.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovSample {
    pub t: f64,
    pub v0: f64,
    pub v: f64,
    pub v_bar: Option<f64>,
    pub e_r_norm: f64,
    pub e_omega_norm: f64,
    pub e_delta_norm: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Envelope,
    V0Increase,
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeViolation {
    pub kind: ViolationKind,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// Largest V(t) / (V(t0) e^{-sigma (t - t0)}) seen, before slack.
    pub max_envelope_ratio: f64,
    /// Most positive per-sample V0 difference.
    pub max_v0_step: f64,
    pub violations: usize,
    pub first_violation: Option<EnvelopeViolation>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check a recorded series against the exponential envelope
/// `V(t) <= (1 + tol) V(t0) e^{-sigma (t - t0)}` and the monotonicity of V0.
pub fn check_envelope(series: &[LyapunovSample], sigma: f64, tol: f64) -> EnvelopeReport {
    let mut report = EnvelopeReport {
        samples: series.len(),
        max_envelope_ratio: 0.0,
        max_v0_step: f64::NEG_INFINITY,
        violations: 0,
        first_violation: None,
    };
    let Some(first) = series.first() else {
        report.max_v0_step = 0.0;
        return report;
    };
    let mut prev_v0 = first.v0;
    report.max_v0_step = 0.0;
    for s in series {
        let decay = first.v * (-sigma * (s.t - first.t)).exp();
        let bound = (1.0 + tol) * decay + ENVELOPE_ABS_FLOOR;
        if decay > 0.0 {
            report.max_envelope_ratio = report.max_envelope_ratio.max(s.v / decay);
        }
        if s.v > bound {
            report.violations += 1;
            report.first_violation.get_or_insert(EnvelopeViolation {
                kind: ViolationKind::Envelope,
                t: s.t,
                value: s.v,
                bound,
            });
        }
        let step = s.v0 - prev_v0;
        report.max_v0_step = report.max_v0_step.max(step);
        if step > MONOTONE_STEP_TOL {
            report.violations += 1;
            report.first_violation.get_or_insert(EnvelopeViolation {
                kind: ViolationKind::V0Increase,
                t: s.t,
                value: s.v0,
                bound: prev_v0 + MONOTONE_STEP_TOL,
            });
        }
        prev_v0 = s.v0;
    }
    report
}
