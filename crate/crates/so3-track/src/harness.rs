//! Scenario configuration, the closed-loop driver, and CSV emission.
//!
//! A [`Scenario`] is plain data (parsed from TOML or built by a preset);
//! [`run_scenario`] wires it to a controller and integrator and returns the
//! decimated trajectory plus a [`RunSummary`]. CSV columns follow
//! [`CSV_HEADER`]; fields that do not apply to a run (tilde errors on the
//! direct branch, estimator columns for the non-adaptive modes) are left
//! empty.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controllers::{AdaptiveState, Controller, ControllerError, ControllerMode, GainSet};
use crate::diagnostics::{self, eval_v, eval_v0, eval_v_bar};
use crate::dynamics::{
    integrate_step_coupled, ConstantReference, Disturbance, DynamicsError, FixedAxisReference,
    InertiaMatrix, ReferenceSample, ReferenceTrajectory, RigidBodyState, TumblingReference,
};
use crate::so3::{self, exp_rodrigues, rotation_distance, Mat3, RotationMatrix, Vec3};

/// Column contract for trajectory CSVs. `eR_norm`/`eOmega_norm` are errors
/// against the true reference; the tilde columns are against the shifted
/// reference and stay empty on the direct branch. `V0`, `V`, and `Vbar` are
/// evaluated against the active reference, so they are the quantities the
/// decay certificate speaks about.
pub const CSV_HEADER: &str = "t,eR_norm,eOmega_norm,eR_tilde_norm,eOmega_tilde_norm,tau_x,tau_y,tau_z,dhat_x,dhat_y,dhat_z,V0,V,Vbar,theta_b";

/// Reserved for future stochastic features (sensor noise, randomized
/// starts). Nothing reads it today; runs are fully deterministic.
pub const SEED_ENV_VAR: &str = "SO3_TRACK_SEED";

/// Default ceiling on `|omega_d|` and `|omega_d_dot|`; the control law
/// assumes a bounded reference, so a runaway reference is a config error.
pub const DEFAULT_REFERENCE_CAP: f64 = 1e3;

/// A run counts as settled once `|E_R|` first drops below this.
pub const SETTLE_TOL: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical divergence at t = {t:.6}")]
    Divergence { t: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 for config and I/O trouble, 2 for divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Divergence { .. } => 2,
        }
    }
}

impl From<ControllerError> for HarnessError {
    fn from(e: ControllerError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<DynamicsError> for HarnessError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Diverged { t } => HarnessError::Divergence { t },
            other => HarnessError::Config(other.to_string()),
        }
    }
}

fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Clone, Copy, Debug)]
pub enum InitialAttitude {
    /// `R(0) = R_d(0) exp(theta0 axis^)`.
    RotatedFromReference { theta0: f64, axis: Vec3 },
    Explicit(RotationMatrix),
}

#[derive(Clone, Copy, Debug)]
pub enum ReferenceKind {
    /// The aggressive closed-form tumbling trajectory of the bundled demos.
    Tumbling,
    Constant(RotationMatrix),
    FixedAxis { attitude: RotationMatrix, axis: Vec3, rate: f64 },
}

/// One closed-loop run, fully specified. Plain data: building one performs
/// no validation beyond what its constructors already guarantee; the rest
/// happens in [`run_scenario`].
#[derive(Clone, Debug)]
pub struct Scenario {
    pub mode: ControllerMode,
    pub inertia: InertiaMatrix,
    pub reference: ReferenceKind,
    pub initial_attitude: InitialAttitude,
    pub omega0: Vec3,
    pub disturbance: Disturbance,
    pub k_r: f64,
    pub k_omega: f64,
    pub k_delta: f64,
    pub epsilon: f64,
    pub t_final: f64,
    pub h: f64,
    pub record_every: usize,
    pub reference_cap: f64,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        let mode = raw.controller.parse::<ControllerMode>()?;
        let inertia = match raw.inertia {
            RawInertia::Diagonal([x, y, z]) => InertiaMatrix::diagonal(x, y, z)?,
            RawInertia::Full(rows) => InertiaMatrix::try_new(mat3_from_rows(&rows))?,
        };
        let k_delta = match raw.gains.k_delta {
            Some(k) => k,
            None if mode.is_adaptive() => {
                return Err(config("k_delta is required for the adaptive modes"))
            }
            None => 1.0,
        };
        let disturbance = match raw.disturbance {
            Some(d) => Disturbance::try_new(Vec3::from(d.delta), d.delta_max)?,
            None => Disturbance::zero(),
        };
        let scenario = Scenario {
            mode,
            inertia,
            reference: reference_kind(raw.reference)?,
            initial_attitude: initial_attitude(&raw.initial)?,
            omega0: Vec3::from(raw.initial.omega0),
            disturbance,
            k_r: raw.gains.k_r,
            k_omega: raw.gains.k_omega,
            k_delta,
            epsilon: raw.gains.epsilon,
            t_final: raw.t_final,
            h: raw.h,
            record_every: raw.record_every.unwrap_or(10),
            reference_cap: raw.reference_cap.unwrap_or(DEFAULT_REFERENCE_CAP),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Gains with `a` and `mu` derived from `epsilon`.
    pub fn gains(&self) -> GainSet {
        GainSet::derived(
            self.k_r,
            self.k_omega,
            self.k_delta,
            self.epsilon,
            self.disturbance.delta_max(),
        )
    }

    pub fn build_reference(&self) -> Result<Box<dyn ReferenceTrajectory>, HarnessError> {
        match self.reference {
            ReferenceKind::Tumbling => Ok(Box::new(TumblingReference)),
            ReferenceKind::Constant(rd) => Ok(Box::new(ConstantReference::new(rd))),
            ReferenceKind::FixedAxis { attitude, axis, rate } => Ok(Box::new(
                FixedAxisReference::new(attitude, axis, rate)
                    .map_err(|e| config(e.to_string()))?,
            )),
        }
    }

    pub fn initial_state(&self, rd0: &RotationMatrix) -> Result<RigidBodyState, HarnessError> {
        let r = match &self.initial_attitude {
            InitialAttitude::RotatedFromReference { theta0, axis } => {
                *rd0 * exp_rodrigues(*theta0, axis).map_err(|e| config(e.to_string()))?
            }
            InitialAttitude::Explicit(r) => *r,
        };
        Ok(RigidBodyState { r, omega: self.omega0 })
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if !(self.t_final > 0.0) {
            return Err(config("t_final must be positive"));
        }
        if !(self.h > 0.0) {
            return Err(config("h must be positive"));
        }
        if self.h > self.t_final {
            return Err(config("h must not exceed t_final"));
        }
        if self.record_every == 0 {
            return Err(config("record_every must be at least 1"));
        }
        if !(self.reference_cap > 0.0) {
            return Err(config("reference_cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    controller: String,
    inertia: RawInertia,
    reference: RawReference,
    initial: RawInitial,
    gains: RawGains,
    disturbance: Option<RawDisturbance>,
    t_final: f64,
    h: f64,
    record_every: Option<usize>,
    reference_cap: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawInertia {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawReference {
    Named(String),
    Table(RawReferenceTable),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReferenceTable {
    kind: String,
    attitude: Option<[[f64; 3]; 3]>,
    axis: Option<[f64; 3]>,
    rate: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    theta0: Option<f64>,
    axis: Option<[f64; 3]>,
    attitude: Option<[[f64; 3]; 3]>,
    omega0: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_r: f64,
    k_omega: f64,
    k_delta: Option<f64>,
    epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    delta: [f64; 3],
    delta_max: f64,
}

fn mat3_from_rows(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    )
}

fn rotation_from_rows(rows: &[[f64; 3]; 3]) -> Result<RotationMatrix, HarnessError> {
    RotationMatrix::try_new(mat3_from_rows(rows)).map_err(|e| config(e.to_string()))
}

fn unit_axis(raw: [f64; 3]) -> Result<Vec3, HarnessError> {
    let v = Vec3::from(raw);
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(config("axis must have positive finite norm"));
    }
    Ok(v / n)
}

fn reference_kind(raw: RawReference) -> Result<ReferenceKind, HarnessError> {
    let (kind, attitude, axis, rate) = match raw {
        RawReference::Named(name) => (name, None, None, None),
        RawReference::Table(t) => (t.kind, t.attitude, t.axis, t.rate),
    };
    let attitude_or_identity = |attitude: Option<[[f64; 3]; 3]>| match attitude {
        Some(rows) => rotation_from_rows(&rows),
        None => Ok(RotationMatrix::identity()),
    };
    match kind.as_str() {
        "tumbling" | "paper" => {
            if attitude.is_some() || axis.is_some() || rate.is_some() {
                return Err(config("the tumbling reference takes no extra fields"));
            }
            Ok(ReferenceKind::Tumbling)
        }
        "constant" => {
            if axis.is_some() || rate.is_some() {
                return Err(config("a constant reference takes only an optional attitude"));
            }
            Ok(ReferenceKind::Constant(attitude_or_identity(attitude)?))
        }
        "fixed-axis" => Ok(ReferenceKind::FixedAxis {
            attitude: attitude_or_identity(attitude)?,
            axis: unit_axis(axis.ok_or_else(|| config("fixed-axis reference needs an axis"))?)?,
            rate: rate.ok_or_else(|| config("fixed-axis reference needs a rate"))?,
        }),
        other => Err(config(format!(
            "unknown reference kind '{other}' (expected tumbling, constant, or fixed-axis)"
        ))),
    }
}

fn initial_attitude(raw: &RawInitial) -> Result<InitialAttitude, HarnessError> {
    match (raw.theta0, &raw.axis, &raw.attitude) {
        (Some(theta0), Some(axis), None) => {
            Ok(InitialAttitude::RotatedFromReference { theta0, axis: unit_axis(*axis)? })
        }
        (None, None, Some(rows)) => Ok(InitialAttitude::Explicit(rotation_from_rows(rows)?)),
        (Some(_), None, None) => Err(config("theta0 needs an axis")),
        (None, Some(_), None) => Err(config("axis needs a theta0")),
        (None, None, None) => {
            Err(config("initial attitude missing: give theta0 + axis or an explicit attitude"))
        }
        _ => Err(config("give either theta0 + axis or an explicit attitude, not both")),
    }
}

/// Tumbling reference, near-antipodal initial attitude about e2, matched
/// initial rate. The adaptive modes get the constant disturbance variant
/// and a longer horizon so the estimate has time to converge.
pub fn tumbling_recovery(mode: ControllerMode) -> Scenario {
    let adaptive = mode.is_adaptive();
    Scenario {
        mode,
        inertia: InertiaMatrix::diagonal(3.0, 2.0, 1.0).expect("diagonal SPD"),
        reference: ReferenceKind::Tumbling,
        initial_attitude: InitialAttitude::RotatedFromReference {
            theta0: 0.999 * std::f64::consts::PI,
            axis: Vec3::y(),
        },
        omega0: Vec3::new(2.0, 0.0, 1.0),
        disturbance: if adaptive {
            Disturbance::try_new(Vec3::new(1.0, -2.0, 0.5), 3.0).expect("within bound")
        } else {
            Disturbance::zero()
        },
        k_r: 9.0,
        k_omega: 4.2,
        k_delta: 25.0,
        epsilon: 0.9,
        t_final: if adaptive { 30.0 } else { 10.0 },
        h: 1e-3,
        record_every: 10,
        reference_cap: DEFAULT_REFERENCE_CAP,
    }
}

/// Small-inertia vehicle holding a constant attitude, started nearly
/// upside down under a constant disturbance. Gains sized for
/// hardware-scale inertia; qualitative companion to the tumbling demo.
pub fn inverted_recovery(mode: ControllerMode) -> Scenario {
    let adaptive = mode.is_adaptive();
    Scenario {
        mode,
        inertia: InertiaMatrix::diagonal(0.05, 0.05, 0.08).expect("diagonal SPD"),
        reference: ReferenceKind::Constant(RotationMatrix::identity()),
        initial_attitude: InitialAttitude::RotatedFromReference {
            theta0: 0.995 * std::f64::consts::PI,
            axis: Vec3::x(),
        },
        omega0: Vec3::zeros(),
        disturbance: if adaptive {
            Disturbance::try_new(Vec3::new(0.5, -0.7, 0.3), 1.0).expect("within bound")
        } else {
            Disturbance::zero()
        },
        k_r: 1.45,
        k_omega: 0.4,
        k_delta: 2.0,
        epsilon: 0.9,
        t_final: 30.0,
        h: 1e-3,
        record_every: 10,
        reference_cap: DEFAULT_REFERENCE_CAP,
    }
}

/// One output row. `None` renders as an empty CSV field.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub t: f64,
    /// `|R - R_d|` against the true reference.
    pub e_r_norm: f64,
    pub e_omega_norm: f64,
    /// Against the shifted reference; `None` on the direct branch.
    pub e_r_tilde_norm: Option<f64>,
    pub e_omega_tilde_norm: Option<f64>,
    pub tau: Vec3,
    /// `None` for the non-adaptive modes.
    pub delta_hat: Option<Vec3>,
    /// Lyapunov values against the active reference.
    pub v0: f64,
    pub v: f64,
    pub v_bar: Option<f64>,
    pub theta_b: Option<f64>,
}

/// End-of-run report.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub mode: ControllerMode,
    pub shifted: bool,
    /// Conjugacy angle between the initial attitude and the reference.
    pub theta_0: f64,
    pub theta_b0: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma: f64,
    /// `2 a k_r`, or `B` for the adaptive modes.
    pub basin_level: f64,
    pub v0_initial: f64,
    pub steps: usize,
    pub final_e_r_norm: f64,
    pub final_e_omega_norm: f64,
    pub final_delta_error: Option<f64>,
    /// First recorded time with `|E_R| <` [`SETTLE_TOL`].
    pub settled_at: Option<f64>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "branch: {}", if self.shifted { "shifted" } else { "direct" })?;
        writeln!(f, "theta_0: {:.12}", self.theta_0)?;
        if let (Some(theta_b0), Some(gamma)) = (self.theta_b0, self.gamma) {
            writeln!(f, "theta_b0: {:.12}", theta_b0)?;
            writeln!(f, "gamma: {:.12}", gamma)?;
        }
        writeln!(f, "sigma: {:.12}", self.sigma)?;
        writeln!(f, "basin level: {:.12}", self.basin_level)?;
        writeln!(f, "V0(0): {:.12}", self.v0_initial)?;
        writeln!(f, "steps: {}", self.steps)?;
        writeln!(f, "final |E_R|: {:.6e}", self.final_e_r_norm)?;
        writeln!(f, "final |e_Omega|: {:.6e}", self.final_e_omega_norm)?;
        if let Some(d) = self.final_delta_error {
            writeln!(f, "final |dhat - delta|: {:.6e}", d)?;
        }
        match self.settled_at {
            Some(t) => write!(f, "settled (|E_R| < {:.0e}) at t = {:.3}", SETTLE_TOL, t),
            None => write!(f, "settled (|E_R| < {:.0e}): never", SETTLE_TOL),
        }
    }
}

/// Run the closed loop over `[0, t_final]` and return the decimated
/// trajectory plus a summary. The last step is always recorded.
pub fn run_scenario(scenario: &Scenario) -> Result<(Vec<TrajectoryRecord>, RunSummary), HarnessError> {
    scenario.validate()?;
    let gains = scenario.gains();
    let base = scenario.build_reference()?;
    let initial = scenario.initial_state(&base.sample(0.0).rd)?;
    let controller = Controller::new(scenario.mode, gains, scenario.inertia, base, &initial)?;
    let sigma = diagnostics::stability_matrices(&gains).expect("gains already validated").sigma;
    let theta_0 =
        so3::conjugacy_angle(&(initial.r * controller.base_reference(0.0).rd.transpose()));

    let n = ((scenario.t_final / scenario.h).round() as usize).max(1);
    let mut records = Vec::with_capacity(n / scenario.record_every + 2);
    let mut state = initial;
    let mut adaptive = AdaptiveState::default();

    for i in 0..=n {
        let t = i as f64 * scenario.h;
        let refs = controller.base_reference(t);
        if refs.omega_d.norm() > scenario.reference_cap
            || refs.omega_d_dot.norm() > scenario.reference_cap
        {
            return Err(config(format!(
                "reference rates exceed the cap {:e} at t = {:.6}",
                scenario.reference_cap, t
            )));
        }
        if i % scenario.record_every == 0 || i == n {
            records.push(make_record(scenario, &controller, &gains, t, &state, &adaptive, &refs));
        }
        if i == n {
            break;
        }
        let (next, delta_next) = integrate_step_coupled(
            &state,
            &adaptive.delta_hat,
            |ti, r, w, d| controller.control_raw(ti, r, w, d),
            &scenario.disturbance,
            &scenario.inertia,
            t,
            scenario.h,
        )?;
        state = next;
        adaptive.delta_hat = delta_next;
    }

    let last = records.last().expect("at least one record");
    let summary = RunSummary {
        mode: scenario.mode,
        shifted: controller.is_shifted(),
        theta_0,
        theta_b0: controller.shift().map(|s| s.theta_b0()),
        gamma: controller.shift().map(|s| s.gamma()),
        sigma,
        basin_level: if scenario.mode.is_adaptive() {
            gains.adaptive_basin_level()
        } else {
            gains.basin_level()
        },
        v0_initial: controller.v0_initial(),
        steps: n,
        final_e_r_norm: last.e_r_norm,
        final_e_omega_norm: last.e_omega_norm,
        final_delta_error: scenario
            .mode
            .is_adaptive()
            .then(|| (adaptive.delta_hat - scenario.disturbance.delta()).norm()),
        settled_at: records.iter().find(|r| r.e_r_norm < SETTLE_TOL).map(|r| r.t),
    };
    Ok((records, summary))
}

fn make_record(
    scenario: &Scenario,
    controller: &Controller<Box<dyn ReferenceTrajectory>>,
    gains: &GainSet,
    t: f64,
    state: &RigidBodyState,
    adaptive: &AdaptiveState,
    base: &ReferenceSample,
) -> TrajectoryRecord {
    let active = controller.active_reference(t);
    let signal = controller.control(t, state, adaptive);
    let (e_r_tilde_norm, e_omega_tilde_norm, theta_b) = match controller.shift() {
        Some(shift) => (
            Some(rotation_distance(&state.r, &active.rd)),
            Some((state.omega - active.omega_d).norm()),
            Some(shift.theta_b(t)),
        ),
        None => (None, None, None),
    };
    let adaptive_mode = scenario.mode.is_adaptive();
    TrajectoryRecord {
        t,
        e_r_norm: rotation_distance(&state.r, &base.rd),
        e_omega_norm: (state.omega - base.omega_d).norm(),
        e_r_tilde_norm,
        e_omega_tilde_norm,
        tau: signal.torque,
        delta_hat: adaptive_mode.then(|| adaptive.delta_hat),
        v0: eval_v0(state, &active, gains),
        v: eval_v(state, &active, gains),
        v_bar: adaptive_mode
            .then(|| eval_v_bar(state, &active, gains, adaptive, &scenario.disturbance.delta())),
        theta_b,
    }
}

/// Render records under the fixed column contract, 17 significant digits.
pub fn render_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + records.len() * 360);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        let fields = [
            Some(rec.t),
            Some(rec.e_r_norm),
            Some(rec.e_omega_norm),
            rec.e_r_tilde_norm,
            rec.e_omega_tilde_norm,
            Some(rec.tau.x),
            Some(rec.tau.y),
            Some(rec.tau.z),
            rec.delta_hat.map(|d| d.x),
            rec.delta_hat.map(|d| d.y),
            rec.delta_hat.map(|d| d.z),
            Some(rec.v0),
            Some(rec.v),
            rec.v_bar,
            rec.theta_b,
        ];
        for (k, field) in fields.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            if let Some(x) = field {
                out.push_str(&format!("{:.16e}", x));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv_file(path: &Path, records: &[TrajectoryRecord]) -> Result<(), HarnessError> {
    fs::write(path, render_csv(records))?;
    Ok(())
}

/// The bundled scenario sets behind `reproduce`: file stem plus scenario.
pub fn reproduce_set(target: &str) -> Result<Vec<(String, Scenario)>, HarnessError> {
    let set = match target {
        "fig1" => vec![
            ("fig1_AGTS".to_string(), tumbling_recovery(ControllerMode::AlmostGlobal)),
            ("fig1_GTS".to_string(), tumbling_recovery(ControllerMode::Global)),
        ],
        "fig2" => vec![
            ("fig2_aAGTS".to_string(), tumbling_recovery(ControllerMode::AdaptiveAlmostGlobal)),
            ("fig2_aGTS".to_string(), tumbling_recovery(ControllerMode::AdaptiveGlobal)),
        ],
        "exp" => vec![
            ("exp_aAGTS".to_string(), inverted_recovery(ControllerMode::AdaptiveAlmostGlobal)),
            ("exp_aGTS".to_string(), inverted_recovery(ControllerMode::AdaptiveGlobal)),
        ],
        other => {
            return Err(config(format!(
                "unknown reproduction target '{other}' (expected fig1, fig2, or exp)"
            )))
        }
    };
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::validate_gains;
    use approx::assert_relative_eq;

    const DEMO_TOML: &str = r#"
controller = "GTS"
inertia = [3.0, 2.0, 1.0]
reference = "tumbling"
t_final = 10.0
h = 1e-3

[initial]
theta0 = 3.1384510609362032
axis = [0.0, 1.0, 0.0]
omega0 = [2.0, 0.0, 1.0]

[gains]
k_r = 9.0
k_omega = 4.2
epsilon = 0.9
"#;

    #[test]
    fn parses_the_demo_config() {
        let s = Scenario::from_toml_str(DEMO_TOML).unwrap();
        assert_eq!(s.mode, ControllerMode::Global);
        assert!(matches!(s.reference, ReferenceKind::Tumbling));
        assert_eq!(s.record_every, 10);
        assert_eq!(s.reference_cap, DEFAULT_REFERENCE_CAP);
        assert_eq!(s.disturbance.delta(), Vec3::zeros());
        assert_eq!(s.k_delta, 1.0);
        match s.initial_attitude {
            InitialAttitude::RotatedFromReference { theta0, axis } => {
                assert_relative_eq!(theta0, 0.999 * std::f64::consts::PI, epsilon = 1e-12);
                assert_eq!(axis, Vec3::y());
            }
            _ => panic!("expected theta0 + axis"),
        }
    }

    #[test]
    fn parses_matrix_inertia_explicit_attitude_and_fixed_axis() {
        let text = r#"
controller = "aAGTS"
inertia = [[2.0, 0.1, 0.0], [0.1, 2.0, 0.0], [0.0, 0.0, 1.0]]
reference = { kind = "fixed-axis", axis = [0.0, 0.0, 2.0], rate = 0.5 }
t_final = 1.0
h = 0.01
record_every = 1
reference_cap = 50.0

[initial]
attitude = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
omega0 = [0.0, 0.0, 0.0]

[gains]
k_r = 2.0
k_omega = 1.0
k_delta = 4.0
epsilon = 0.5

[disturbance]
delta = [0.1, 0.0, 0.0]
delta_max = 0.5
"#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s.mode, ControllerMode::AdaptiveAlmostGlobal);
        assert_eq!(s.record_every, 1);
        assert_eq!(s.reference_cap, 50.0);
        match s.reference {
            ReferenceKind::FixedAxis { axis, rate, .. } => {
                assert_eq!(axis, Vec3::z());
                assert_eq!(rate, 0.5);
            }
            _ => panic!("expected fixed-axis"),
        }
        assert!(matches!(s.initial_attitude, InitialAttitude::Explicit(_)));
        assert_eq!(s.inertia.matrix()[(0, 1)], 0.1);
    }

    #[test]
    fn named_reference_aliases_are_accepted() {
        let text = DEMO_TOML.replace("\"tumbling\"", "\"paper\"");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(matches!(s.reference, ReferenceKind::Tumbling));
    }

    #[test]
    fn rejects_malformed_configs() {
        let cases: Vec<(&str, String)> = vec![
            ("unknown key", DEMO_TOML.replace("t_final = 10.0", "t_final = 10.0\nwhat = 1")),
            ("unknown controller", DEMO_TOML.replace("\"GTS\"", "\"PID\"")),
            ("unknown reference", DEMO_TOML.replace("\"tumbling\"", "\"spline\"")),
            ("axis without theta0", DEMO_TOML.replace("theta0 = 3.1384510609362032", "")),
            ("zero axis", DEMO_TOML.replace("axis = [0.0, 1.0, 0.0]", "axis = [0.0, 0.0, 0.0]")),
            ("adaptive without k_delta", DEMO_TOML.replace("\"GTS\"", "\"aGTS\"")),
            ("zero t_final", DEMO_TOML.replace("t_final = 10.0", "t_final = 0.0")),
            ("h over t_final", DEMO_TOML.replace("h = 1e-3", "h = 20.0")),
            (
                "zero record_every",
                DEMO_TOML.replace("t_final = 10.0", "t_final = 10.0\nrecord_every = 0"),
            ),
            (
                "both attitude forms",
                DEMO_TOML.replace(
                    "theta0 = 3.1384510609362032",
                    "theta0 = 1.0\nattitude = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]",
                ),
            ),
            (
                "disturbance over bound",
                format!("{DEMO_TOML}\n[disturbance]\ndelta = [9.0, 0.0, 0.0]\ndelta_max = 1.0"),
            ),
            (
                "non-rotation attitude",
                DEMO_TOML.replace(
                    "theta0 = 3.1384510609362032\naxis = [0.0, 1.0, 0.0]",
                    "attitude = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]",
                ),
            ),
        ];
        for (label, text) in &cases {
            let got = Scenario::from_toml_str(text);
            assert!(
                matches!(got, Err(HarnessError::Config(_))),
                "case '{label}' should be a config error, got {got:?}"
            );
        }
    }

    #[test]
    fn presets_pass_gain_validation() {
        for mode in ControllerMode::ALL {
            for preset in [tumbling_recovery(mode), inverted_recovery(mode)] {
                let report = validate_gains(&preset.gains(), mode);
                assert!(report.is_valid(), "{mode}: {}", report.summary());
                preset.validate().unwrap();
            }
        }
        let adaptive = tumbling_recovery(ControllerMode::AdaptiveGlobal);
        assert_eq!(adaptive.disturbance.delta(), Vec3::new(1.0, -2.0, 0.5));
        assert_eq!(adaptive.t_final, 30.0);
        assert_eq!(tumbling_recovery(ControllerMode::Global).t_final, 10.0);
    }

    #[test]
    fn zero_error_start_stays_at_zero() {
        let mut s = tumbling_recovery(ControllerMode::Global);
        s.initial_attitude = InitialAttitude::RotatedFromReference { theta0: 0.0, axis: Vec3::y() };
        s.t_final = 1.0;
        let (records, summary) = run_scenario(&s).unwrap();
        assert!(!summary.shifted);
        assert_eq!(records.len(), 101);
        for rec in &records {
            assert!(rec.e_r_norm <= 1e-9, "e_r = {} at t = {}", rec.e_r_norm, rec.t);
            assert!(rec.e_omega_norm <= 1e-9);
            assert!(rec.v0 <= 1e-12);
        }
    }

    #[test]
    fn short_shifted_run_reports_the_recipe() {
        let mut s = tumbling_recovery(ControllerMode::Global);
        s.t_final = 0.2;
        let (records, summary) = run_scenario(&s).unwrap();
        assert!(summary.shifted);
        assert_relative_eq!(summary.theta_0, 0.999 * std::f64::consts::PI, epsilon = 1e-9);
        assert_relative_eq!(summary.theta_b0.unwrap(), 0.8989120309389351, epsilon = 1e-12);
        assert_relative_eq!(summary.gamma.unwrap(), 3.6043571433967148, epsilon = 1e-12);
        assert_relative_eq!(summary.v0_initial, 17.999955586816725, epsilon = 1e-9);
        assert_eq!(summary.steps, 200);
        assert_eq!(records.len(), 21);
        assert!(records.windows(2).all(|w| w[0].t < w[1].t));
        assert_relative_eq!(records.last().unwrap().t, 0.2, epsilon = 1e-12);
        let first = &records[0];
        assert_relative_eq!(first.theta_b.unwrap(), summary.theta_b0.unwrap(), epsilon = 1e-15);
        assert!(first.e_r_tilde_norm.is_some() && first.e_omega_tilde_norm.is_some());
        assert!(records.last().unwrap().theta_b.unwrap() < first.theta_b.unwrap());
        assert!(first.delta_hat.is_none() && first.v_bar.is_none());
        let text = summary.to_string();
        assert!(text.contains("branch: shifted"), "{text}");
    }

    #[test]
    fn identical_scenarios_render_identical_csv() {
        let mut s = tumbling_recovery(ControllerMode::AdaptiveGlobal);
        s.t_final = 0.05;
        let (first, _) = run_scenario(&s).unwrap();
        let (second, _) = run_scenario(&s).unwrap();
        assert_eq!(render_csv(&first), render_csv(&second));
    }

    #[test]
    fn runaway_gains_diverge_with_exit_code_two() {
        let mut s = tumbling_recovery(ControllerMode::AlmostGlobal);
        s.initial_attitude = InitialAttitude::RotatedFromReference { theta0: 0.5, axis: Vec3::y() };
        s.k_r = 1e12;
        s.h = 1.0;
        let err = run_scenario(&s).unwrap_err();
        match &err {
            HarnessError::Divergence { t } => assert_eq!(*t, 1.0),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
        assert_eq!(config("x").exit_code(), 1);
    }

    #[test]
    fn runaway_reference_is_a_config_error() {
        let mut s = tumbling_recovery(ControllerMode::AlmostGlobal);
        s.reference = ReferenceKind::FixedAxis {
            attitude: RotationMatrix::identity(),
            axis: Vec3::z(),
            rate: 2e3,
        };
        s.initial_attitude = InitialAttitude::RotatedFromReference { theta0: 0.5, axis: Vec3::y() };
        s.omega0 = Vec3::zeros();
        assert!(matches!(run_scenario(&s), Err(HarnessError::Config(_))));
    }

    #[test]
    fn csv_rendering_is_exact() {
        let rec = TrajectoryRecord {
            t: 1.0,
            e_r_norm: 2.0,
            e_omega_norm: 0.5,
            e_r_tilde_norm: None,
            e_omega_tilde_norm: None,
            tau: Vec3::new(1.0, 2.0, 3.0),
            delta_hat: None,
            v0: 4.0,
            v: 5.0,
            v_bar: None,
            theta_b: None,
        };
        let text = render_csv(&[rec]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "1.0000000000000000e0,2.0000000000000000e0,5.0000000000000000e-1,,,\
             1.0000000000000000e0,2.0000000000000000e0,3.0000000000000000e0,,,,\
             4.0000000000000000e0,5.0000000000000000e0,,"
        );
        assert!(lines.next().is_none());
        assert_eq!(CSV_HEADER.split(',').count(), 15);
    }

    #[test]
    fn reproduce_sets_are_paired() {
        for (target, prefix) in [("fig1", "fig1_"), ("fig2", "fig2_"), ("exp", "exp_")] {
            let set = reproduce_set(target).unwrap();
            assert_eq!(set.len(), 2);
            assert!(set.iter().all(|(stem, _)| stem.starts_with(prefix)));
            let (a, b) = (&set[0].1, &set[1].1);
            assert_eq!(a.omega0, b.omega0);
            assert_eq!(a.t_final, b.t_final);
        }
        assert!(matches!(reproduce_set("fig3"), Err(HarnessError::Config(_))));
    }
}
