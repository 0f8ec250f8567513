//! Tracking control laws: the smooth almost-global law, the shifted-reference
//! construction that extends it to a globally attractive one, and adaptive
//! variants that estimate a constant disturbance torque.

use crate::diagnostics;
use crate::dynamics::{InertiaMatrix, ReferenceSample, ReferenceTrajectory, RigidBodyState};
use crate::so3::{self, Mat3, RotationMatrix, Vec3};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Slack for shift-condition checks whose recipe lands exactly on the
/// boundary.
const SHIFT_CONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("unknown controller mode {0:?} (expected AGTS, GTS, aAGTS, or aGTS)")]
    UnknownMode(String),
    #[error("invalid gains for {mode}: {summary}")]
    InvalidGains { mode: ControllerMode, summary: String },
    #[error("initial attitude already matches the reference (theta_0 = 0), shifting is unnecessary")]
    DegenerateInitialError,
    #[error("shift construction failed: {detail}; raise epsilon or start closer to the reference")]
    InvariantViolation { detail: String },
}

/// Which control law drives the loop. The global variants may replace the
/// reference with a shifted copy when the start is outside the direct basin;
/// the adaptive variants carry a disturbance estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerMode {
    AlmostGlobal,
    Global,
    AdaptiveAlmostGlobal,
    AdaptiveGlobal,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 4] = [
        ControllerMode::AlmostGlobal,
        ControllerMode::Global,
        ControllerMode::AdaptiveAlmostGlobal,
        ControllerMode::AdaptiveGlobal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::AlmostGlobal => "AGTS",
            ControllerMode::Global => "GTS",
            ControllerMode::AdaptiveAlmostGlobal => "aAGTS",
            ControllerMode::AdaptiveGlobal => "aGTS",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, ControllerMode::AdaptiveAlmostGlobal | ControllerMode::AdaptiveGlobal)
    }

    /// Whether the mode is allowed to track a shifted reference.
    pub fn can_shift(self) -> bool {
        matches!(self, ControllerMode::Global | ControllerMode::AdaptiveGlobal)
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerMode {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, ControllerError> {
        ControllerMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ControllerError::UnknownMode(s.to_string()))
    }
}

/// Controller constants. `a` and `mu` must satisfy the feasibility
/// inequalities checked by [`validate_gains`]; [`GainSet::derived`] picks
/// them from `epsilon` the way the bundled scenarios do.
#[derive(Clone, Copy, Debug)]
pub struct GainSet {
    pub k_r: f64,
    pub k_omega: f64,
    pub k_delta: f64,
    pub a: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub delta_max: f64,
}

impl GainSet {
    /// Largest admissible cross-term weight,
    /// `4(1-a) k_r k_omega / (4(1-a) k_r + k_omega^2)`.
    pub fn mu_upper_bound(&self) -> f64 {
        let p = 4.0 * (1.0 - self.a) * self.k_r;
        p * self.k_omega / (p + self.k_omega * self.k_omega)
    }

    /// Single-scalar tuning: `a = epsilon` and `mu = epsilon *
    /// mu_upper_bound`, leaving `k_r` and `k_omega` as the free gains.
    pub fn derived(k_r: f64, k_omega: f64, k_delta: f64, epsilon: f64, delta_max: f64) -> Self {
        let mut gains =
            GainSet { k_r, k_omega, k_delta, a: epsilon, mu: 0.0, epsilon, delta_max };
        gains.mu = gains.mu_upper_bound() * epsilon;
        gains
    }

    /// Lyapunov level bounding the direct basin of the non-adaptive laws,
    /// `2 a k_r`.
    pub fn basin_level(&self) -> f64 {
        2.0 * self.a * self.k_r
    }

    /// Direct-basin level of the adaptive laws,
    /// `B = 2a (sqrt(k_r) - mu) / (sqrt(k_r) + mu) k_r - delta_max^2 / (2 k_delta)`.
    /// Must be positive for the adaptive laws to apply.
    pub fn adaptive_basin_level(&self) -> f64 {
        let s = self.k_r.sqrt();
        2.0 * self.a * (s - self.mu) / (s + self.mu) * self.k_r
            - self.delta_max * self.delta_max / (2.0 * self.k_delta)
    }

    fn basin_level_for(&self, mode: ControllerMode) -> f64 {
        if mode.is_adaptive() {
            self.adaptive_basin_level()
        } else {
            self.basin_level()
        }
    }
}

/// Disturbance estimate carried by the adaptive laws. Starts at zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdaptiveState {
    pub delta_hat: Vec3,
}

/// Tracking torque of the smooth almost-global law:
/// `tau = -(J omega) x omega + J(-k_r e_R - k_omega e_omega + omega x
/// omega_d + omega_d_dot)`.
pub fn agts_torque(
    state: &RigidBodyState,
    refs: &ReferenceSample,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> Vec3 {
    torque_raw(state.r.matrix(), &state.omega, refs, gains, inertia)
}

pub(crate) fn torque_raw(
    r: &Mat3,
    omega: &Vec3,
    refs: &ReferenceSample,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> Vec3 {
    let e_r = so3::attitude_error_raw(r, refs.rd.matrix());
    let e_omega = omega - refs.omega_d;
    let feedback =
        -gains.k_r * e_r - gains.k_omega * e_omega + omega.cross(&refs.omega_d) + refs.omega_d_dot;
    -(inertia.matrix() * omega).cross(omega) + inertia.matrix() * feedback
}

/// Adaptive variant: the same law with the disturbance estimate subtracted.
pub fn adaptive_torque(
    state: &RigidBodyState,
    refs: &ReferenceSample,
    gains: &GainSet,
    inertia: &InertiaMatrix,
    adaptive: &AdaptiveState,
) -> Vec3 {
    agts_torque(state, refs, gains, inertia) - adaptive.delta_hat
}

/// Estimator rate `k_delta J^{-1} (e_omega + mu e_R)`, meant to integrate
/// inside the same RK4 stages as the rigid-body state.
pub fn disturbance_rate(
    state: &RigidBodyState,
    refs: &ReferenceSample,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> Vec3 {
    disturbance_rate_raw(state.r.matrix(), &state.omega, refs, gains, inertia)
}

pub(crate) fn disturbance_rate_raw(
    r: &Mat3,
    omega: &Vec3,
    refs: &ReferenceSample,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> Vec3 {
    let e_r = so3::attitude_error_raw(r, refs.rd.matrix());
    let e_omega = omega - refs.omega_d;
    gains.k_delta * (inertia.inverse() * (e_omega + gains.mu * e_r))
}

/// Shift recipe shared by the reference constructor and the basin reports:
/// `theta_b0 = min{theta_0 eps, theta_0 - arccos(1 - 2 a eps)}` against the
/// non-adaptive level, with `2 a eps` replaced by `B eps / k_r` in adaptive
/// mode, and `gamma` at `eps` times its strict upper bound.
fn shift_parameters(
    theta_0: f64,
    gains: &GainSet,
    adaptive: bool,
) -> Result<(f64, f64), ControllerError> {
    if theta_0 == 0.0 {
        return Err(ControllerError::DegenerateInitialError);
    }
    let eps = gains.epsilon;
    let (reach_cos, gamma_cap_of): (f64, Box<dyn Fn(f64) -> f64>) = if adaptive {
        let b = gains.adaptive_basin_level();
        (
            1.0 - b * eps / gains.k_r,
            Box::new(move |tb0| 2.0 / tb0 * (2.0 * (1.0 - eps) * b).sqrt()),
        )
    } else {
        (
            1.0 - 2.0 * gains.a * eps,
            Box::new(move |tb0| 4.0 / tb0 * (gains.a * gains.k_r * (1.0 - eps)).sqrt()),
        )
    };
    let reach = reach_cos.clamp(-1.0, 1.0).acos();
    let theta_b0 = (theta_0 * eps).min(theta_0 - reach);
    if !(theta_b0 > 0.0 && theta_b0 < theta_0) {
        return Err(ControllerError::InvariantViolation {
            detail: format!("theta_b0 = {theta_b0:.6} outside (0, {theta_0:.6})"),
        });
    }
    let residual = 1.0 - (theta_0 - theta_b0).cos();
    let allowed = 1.0 - reach_cos;
    if residual > allowed + SHIFT_CONDITION_SLACK {
        return Err(ControllerError::InvariantViolation {
            detail: format!(
                "shift condition broken: 1 - cos(theta_0 - theta_b0) = {residual:.6} > {allowed:.6}"
            ),
        });
    }
    let gamma = gamma_cap_of(theta_b0) * eps;
    debug_assert!(gamma > 0.0 && gamma < gamma_cap_of(theta_b0));
    Ok((theta_b0, gamma))
}

/// Reference wrapper that starts rotated toward the initial attitude along
/// its conjugacy class and decays the shift exponentially, keeping the start
/// inside the direct basin while converging to the true reference.
///
/// The shift axis comes from the decomposition `r(0) rd(0)^T = u0 z(theta_0)
/// u0^T`; the shift angle is `theta_b(t) = theta_b0 exp(-gamma t / 2)`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedReference<B> {
    base: B,
    u0: RotationMatrix,
    theta_0: f64,
    pub(crate) theta_b0: f64,
    pub(crate) gamma: f64,
}

impl<B: ReferenceTrajectory> ShiftedReference<B> {
    /// Construct the shift for an initial attitude; `mode` selects which
    /// basin level the shift must reach. Fails when the initial attitude
    /// already matches the reference, or when the recipe cannot place
    /// `theta_b0` inside `(0, theta_0)` under the shift condition, which
    /// happens for velocity-dominated starts or an `epsilon` too small for
    /// the initial angle.
    pub fn build(
        initial_attitude: &RotationMatrix,
        base: B,
        gains: &GainSet,
        mode: ControllerMode,
    ) -> Result<Self, ControllerError> {
        let rd0 = base.sample(0.0).rd;
        let rel = *initial_attitude * rd0.transpose();
        let dec = so3::conjugacy_decompose(&rel);
        let (theta_b0, gamma) = shift_parameters(dec.theta, gains, mode.is_adaptive())?;
        Ok(Self { base, u0: dec.u, theta_0: dec.theta, theta_b0, gamma })
    }

    pub fn theta_b(&self, t: f64) -> f64 {
        self.theta_b0 * (-self.gamma * t / 2.0).exp()
    }

    pub fn theta_0(&self) -> f64 {
        self.theta_0
    }

    pub fn theta_b0(&self) -> f64 {
        self.theta_b0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn base(&self) -> &B {
        &self.base
    }
}

impl<B: ReferenceTrajectory> ReferenceTrajectory for ShiftedReference<B> {
    /// Shifted sample: attitude `u0 z(theta_b) u0^T rd`, rate
    /// `omega_d + theta_b_dot b` with `b = rd_tilde^T u0 e3`, and the
    /// closed-form acceleration `omega_d_dot + theta_b_ddot b - theta_b_dot
    /// (omega_d_tilde x b)`, which uses `b_dot = -omega_d_tilde x b` since
    /// `u0 e3` is fixed in the inertial frame.
    fn sample(&self, t: f64) -> ReferenceSample {
        let base = self.base.sample(t);
        let theta_b = self.theta_b(t);
        let theta_b_dot = -self.gamma / 2.0 * theta_b;
        let theta_b_ddot = self.gamma * self.gamma / 4.0 * theta_b;
        let rd = self.u0 * so3::rotation_z(theta_b) * self.u0.transpose() * base.rd;
        let b = rd.transpose() * (self.u0 * Vec3::z());
        let omega_d = base.omega_d + theta_b_dot * b;
        let omega_d_dot = base.omega_d_dot + theta_b_ddot * b - theta_b_dot * omega_d.cross(&b);
        ReferenceSample { rd, omega_d, omega_d_dot }
    }
}

/// Torque and estimator rate at one instant. The rate is zero for the
/// non-adaptive laws.
#[derive(Clone, Copy, Debug)]
pub struct ControlSignal {
    pub torque: Vec3,
    pub delta_hat_dot: Vec3,
}

enum Plan<B> {
    Direct(B),
    Shifted(ShiftedReference<B>),
}

/// A control plan frozen at t = 0: mode, gains, and whether the loop tracks
/// the true reference or a shifted copy. The branch is decided once, from
/// the initial Lyapunov level against the mode's basin, and never revisited,
/// so the torque stays continuous in time.
pub struct Controller<B> {
    mode: ControllerMode,
    gains: GainSet,
    inertia: InertiaMatrix,
    plan: Plan<B>,
    v0_initial: f64,
}

impl<B: ReferenceTrajectory> Controller<B> {
    /// Validate the gains, measure the initial level, and fix the branch.
    /// A level at or below the basin keeps the true reference; only the
    /// global modes ever shift.
    pub fn new(
        mode: ControllerMode,
        gains: GainSet,
        inertia: InertiaMatrix,
        base: B,
        initial: &RigidBodyState,
    ) -> Result<Self, ControllerError> {
        let report = validate_gains(&gains, mode);
        if !report.is_valid() {
            return Err(ControllerError::InvalidGains { mode, summary: report.summary() });
        }
        let refs0 = base.sample(0.0);
        let v0_initial = diagnostics::eval_v0(initial, &refs0, &gains);
        let plan = if mode.can_shift() && v0_initial > gains.basin_level_for(mode) {
            Plan::Shifted(ShiftedReference::build(&initial.r, base, &gains, mode)?)
        } else {
            Plan::Direct(base)
        };
        Ok(Self { mode, gains, inertia, plan, v0_initial })
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn v0_initial(&self) -> f64 {
        self.v0_initial
    }

    pub fn is_shifted(&self) -> bool {
        matches!(self.plan, Plan::Shifted(_))
    }

    pub fn shift(&self) -> Option<&ShiftedReference<B>> {
        match &self.plan {
            Plan::Direct(_) => None,
            Plan::Shifted(s) => Some(s),
        }
    }

    /// The reference the torque law tracks at time t (shifted on the
    /// shifted branch).
    pub fn active_reference(&self, t: f64) -> ReferenceSample {
        match &self.plan {
            Plan::Direct(base) => base.sample(t),
            Plan::Shifted(shifted) => shifted.sample(t),
        }
    }

    /// The true reference, regardless of branch.
    pub fn base_reference(&self, t: f64) -> ReferenceSample {
        match &self.plan {
            Plan::Direct(base) => base.sample(t),
            Plan::Shifted(shifted) => shifted.base.sample(t),
        }
    }

    /// Torque and estimator rate for the current state.
    pub fn control(&self, t: f64, state: &RigidBodyState, adaptive: &AdaptiveState) -> ControlSignal {
        let (torque, delta_hat_dot) =
            self.control_raw(t, state.r.matrix(), &state.omega, &adaptive.delta_hat);
        ControlSignal { torque, delta_hat_dot }
    }

    pub(crate) fn control_raw(
        &self,
        t: f64,
        r: &Mat3,
        omega: &Vec3,
        delta_hat: &Vec3,
    ) -> (Vec3, Vec3) {
        let refs = self.active_reference(t);
        let mut torque = torque_raw(r, omega, &refs, &self.gains, &self.inertia);
        let rate = if self.mode.is_adaptive() {
            torque -= delta_hat;
            disturbance_rate_raw(r, omega, &refs, &self.gains, &self.inertia)
        } else {
            Vec3::zeros()
        };
        (torque, rate)
    }
}

/// One failed gain inequality.
#[derive(Clone, Debug)]
pub struct GainViolation {
    pub constraint: &'static str,
    pub detail: String,
}

/// Result of checking a gain set against every inequality its mode needs.
#[derive(Clone, Debug)]
pub struct GainReport {
    pub mode: ControllerMode,
    pub violations: Vec<GainViolation>,
    pub mu_upper_bound: f64,
    /// Decay rate of the Lyapunov envelope; present when the comparison
    /// matrices exist.
    pub sigma: Option<f64>,
    pub basin_level: f64,
    /// Present for the adaptive modes.
    pub adaptive_basin_level: Option<f64>,
}

impl GainReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{} ({})", v.constraint, v.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Display for GainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            writeln!(f, "gains check for {}: ok", self.mode)?;
        } else {
            writeln!(f, "gains check for {}: {} violated", self.mode, self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  violated: {} ({})", v.constraint, v.detail)?;
            }
        }
        writeln!(f, "  mu upper bound: {:.12}", self.mu_upper_bound)?;
        match self.sigma {
            Some(s) => writeln!(f, "  sigma: {:.12}", s)?,
            None => writeln!(f, "  sigma: undefined (comparison matrix not positive definite)")?,
        }
        write!(f, "  basin level: {:.12}", self.basin_level)?;
        if let Some(b) = self.adaptive_basin_level {
            write!(f, "\n  adaptive threshold B: {:.12}", b)?;
        }
        Ok(())
    }
}

/// Check every inequality the mode relies on. Never fails; violations are
/// listed by the constraint that breaks.
pub fn validate_gains(gains: &GainSet, mode: ControllerMode) -> GainReport {
    let mut violations = Vec::new();
    if !(gains.k_r > 0.0) {
        violations.push(GainViolation {
            constraint: "k_r > 0",
            detail: format!("k_r = {}", gains.k_r),
        });
    }
    if !(gains.k_omega > 0.0) {
        violations.push(GainViolation {
            constraint: "k_omega > 0",
            detail: format!("k_omega = {}", gains.k_omega),
        });
    }
    if !(gains.a > 0.0 && gains.a < 1.0) {
        violations.push(GainViolation { constraint: "0 < a < 1", detail: format!("a = {}", gains.a) });
    }
    if !(gains.epsilon > 0.0 && gains.epsilon < 1.0) {
        violations.push(GainViolation {
            constraint: "0 < epsilon < 1",
            detail: format!("epsilon = {}", gains.epsilon),
        });
    }
    let basics_ok = violations.is_empty();
    let mu_upper_bound = gains.mu_upper_bound();
    if basics_ok {
        if !(gains.mu > 0.0 && gains.mu < mu_upper_bound) {
            violations.push(GainViolation {
                constraint: "0 < mu < 4(1-a) k_r k_omega / (4(1-a) k_r + k_omega^2)",
                detail: format!("mu = {}, bound = {mu_upper_bound}", gains.mu),
            });
        }
        if !(gains.mu < gains.k_r.sqrt()) {
            violations.push(GainViolation {
                constraint: "mu < sqrt(k_r)",
                detail: format!("mu = {}, sqrt(k_r) = {}", gains.mu, gains.k_r.sqrt()),
            });
        }
    }
    let sigma = if violations.is_empty() {
        match diagnostics::stability_matrices(gains) {
            Ok(sm) => Some(sm.sigma),
            Err(err) => {
                violations.push(GainViolation {
                    constraint: "lambda_min(W3) > 0",
                    detail: err.to_string(),
                });
                None
            }
        }
    } else {
        None
    };
    let mut adaptive_basin_level = None;
    if mode.is_adaptive() {
        if !(gains.k_delta > 0.0) {
            violations.push(GainViolation {
                constraint: "k_delta > 0",
                detail: format!("k_delta = {}", gains.k_delta),
            });
        }
        if !(gains.delta_max >= 0.0) {
            violations.push(GainViolation {
                constraint: "delta_max >= 0",
                detail: format!("delta_max = {}", gains.delta_max),
            });
        }
        if basics_ok && gains.k_delta > 0.0 {
            let b = gains.adaptive_basin_level();
            adaptive_basin_level = Some(b);
            if !(b > 0.0) {
                violations.push(GainViolation {
                    constraint: "B = 2a (sqrt(k_r)-mu)/(sqrt(k_r)+mu) k_r - delta_max^2/(2 k_delta) > 0",
                    detail: format!("B = {b}"),
                });
            }
        }
    }
    GainReport {
        mode,
        violations,
        mu_upper_bound,
        sigma,
        basin_level: gains.basin_level(),
        adaptive_basin_level,
    }
}

/// Which argument of the velocity bound is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityBound {
    Direct,
    Shifted,
}

/// Basin membership of one initial condition.
#[derive(Clone, Debug)]
pub struct RoaReport {
    pub mode: ControllerMode,
    pub theta_0: f64,
    pub e_omega_norm: f64,
    pub v0: f64,
    /// `2 a k_r`, or `B` for the adaptive modes.
    pub basin_level: f64,
    /// Initial level inside the direct basin: convergence without shifting.
    pub in_direct_basin: bool,
    /// Shift recipe output when it is constructible for this start.
    pub shift: Option<(f64, f64)>,
    /// Shifted level inside the basin: convergence after shifting.
    pub in_shifted_basin: Option<bool>,
    pub velocity_bound_direct: Option<f64>,
    pub velocity_bound_shifted: Option<f64>,
    pub active_bound: Option<VelocityBound>,
    /// Member of the closed-form velocity-bound set.
    pub in_velocity_set: bool,
    /// At least one basin holds, so the matching construction converges.
    pub guaranteed: bool,
}

/// Evaluate an initial condition against the direct and shifted basins and
/// the closed-form velocity bound for the mode.
pub fn roa_membership(
    initial: &RigidBodyState,
    refs0: &ReferenceSample,
    gains: &GainSet,
    mode: ControllerMode,
) -> RoaReport {
    let rel = initial.r * refs0.rd.transpose();
    let dec = so3::conjugacy_decompose(&rel);
    let theta_0 = dec.theta;
    let e_omega = initial.omega - refs0.omega_d;
    let e_omega_norm = e_omega.norm();
    let v0 = diagnostics::eval_v0(initial, refs0, gains);
    let adaptive = mode.is_adaptive();
    let level = gains.basin_level_for(mode);

    let in_direct_basin =
        gains.k_r * (1.0 - theta_0.cos()) + e_omega.norm_squared() / 2.0 <= level;

    let velocity_bound_direct = {
        let arg = if adaptive {
            level - gains.k_r * (1.0 - theta_0.cos())
        } else {
            2.0 * gains.k_r * (2.0 * gains.a - 1.0 + theta_0.cos())
        };
        (arg > 0.0).then(|| arg.sqrt())
    };

    let mut shift = None;
    let mut in_shifted_basin = None;
    let mut velocity_bound_shifted = None;
    if let Ok((theta_b0, gamma)) = shift_parameters(theta_0, gains, adaptive) {
        shift = Some((theta_b0, gamma));
        let rd_tilde0 = dec.u * so3::rotation_z(theta_b0) * dec.u.transpose() * refs0.rd;
        let b = rd_tilde0.transpose() * (dec.u * Vec3::z());
        let omega_tilde0 = refs0.omega_d - gamma / 2.0 * theta_b0 * b;
        let e_tilde = initial.omega - omega_tilde0;
        in_shifted_basin = Some(
            gains.k_r * (1.0 - (theta_0 - theta_b0).cos()) + e_tilde.norm_squared() / 2.0 <= level,
        );
        let reach = if adaptive {
            (2.0 * (1.0 - gains.epsilon) * level).sqrt()
        } else {
            2.0 * (gains.a * gains.k_r * (1.0 - gains.epsilon)).sqrt()
        };
        velocity_bound_shifted = Some(reach - gamma / 2.0 * theta_b0);
    }

    let active_bound = match (velocity_bound_direct, velocity_bound_shifted) {
        (Some(d), Some(s)) => Some(if d >= s { VelocityBound::Direct } else { VelocityBound::Shifted }),
        (Some(_), None) => Some(VelocityBound::Direct),
        (None, Some(_)) => Some(VelocityBound::Shifted),
        (None, None) => None,
    };
    let best = velocity_bound_direct
        .unwrap_or(f64::NEG_INFINITY)
        .max(velocity_bound_shifted.unwrap_or(f64::NEG_INFINITY));
    let in_velocity_set = e_omega_norm < best;
    let guaranteed = in_direct_basin || in_shifted_basin == Some(true);

    RoaReport {
        mode,
        theta_0,
        e_omega_norm,
        v0,
        basin_level: level,
        in_direct_basin,
        shift,
        in_shifted_basin,
        velocity_bound_direct,
        velocity_bound_shifted,
        active_bound,
        in_velocity_set,
        guaranteed,
    }
}

impl fmt::Display for RoaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn yes_no(b: bool) -> &'static str {
            if b {
                "yes"
            } else {
                "no"
            }
        }
        writeln!(f, "basin membership for {}", self.mode)?;
        writeln!(f, "  theta_0: {:.12}", self.theta_0)?;
        writeln!(f, "  |e_Omega(0)|: {:.12}", self.e_omega_norm)?;
        writeln!(f, "  V0(0): {:.12}", self.v0)?;
        writeln!(f, "  basin level: {:.12}", self.basin_level)?;
        writeln!(f, "  direct basin: {}", yes_no(self.in_direct_basin))?;
        match self.shift {
            Some((theta_b0, gamma)) => {
                writeln!(f, "  shift: theta_b0 = {:.12}, gamma = {:.12}", theta_b0, gamma)?
            }
            None => writeln!(f, "  shift: not constructible")?,
        }
        if let Some(m) = self.in_shifted_basin {
            writeln!(f, "  shifted basin: {}", yes_no(m))?;
        }
        match (self.velocity_bound_direct, self.velocity_bound_shifted) {
            (None, None) => writeln!(f, "  velocity bound: none")?,
            (d, s) => {
                if let Some(d) = d {
                    writeln!(f, "  velocity bound (direct): {:.12}", d)?;
                }
                if let Some(s) = s {
                    writeln!(f, "  velocity bound (shifted): {:.12}", s)?;
                }
            }
        }
        writeln!(f, "  inside velocity-bound set: {}", yes_no(self.in_velocity_set))?;
        write!(f, "  convergence guaranteed: {}", yes_no(self.guaranteed))
    }
}
