//! Rigid-body rotational dynamics: inertia, disturbances, reference
//! trajectories, and the fixed-step integrator driving the closed loop.

use crate::so3::{self, Mat3, RotationMatrix, Vec3};
use thiserror::Error;

/// Symmetry tolerance for caller-supplied inertia matrices.
pub const INERTIA_SYM_TOL: f64 = 1e-12;

/// Integration aborts once the angular rate passes this; the trajectory has
/// left any physically meaningful regime.
pub const DIVERGENCE_RATE: f64 = 1e9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("inertia matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("inertia matrix is not positive definite")]
    SingularInertia,
    #[error("disturbance norm {norm:.6} exceeds its declared bound {bound:.6}")]
    DisturbanceBound { norm: f64, bound: f64 },
    #[error("state diverged at t = {t:.6}")]
    Diverged { t: f64 },
    #[error(transparent)]
    Rotation(#[from] so3::So3Error),
}

/// Symmetric positive definite inertia with its inverse cached.
#[derive(Clone, Copy, Debug)]
pub struct InertiaMatrix {
    j: Mat3,
    j_inv: Mat3,
}

impl InertiaMatrix {
    /// Checks symmetry and positive definiteness (leading principal minors).
    pub fn try_new(j: Mat3) -> Result<Self, DynamicsError> {
        let asym = (j - j.transpose()).norm();
        if asym > INERTIA_SYM_TOL {
            return Err(DynamicsError::NotSymmetric(asym));
        }
        let m1 = j[(0, 0)];
        let m2 = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        let m3 = j.determinant();
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(DynamicsError::SingularInertia);
        }
        let j_inv = j.try_inverse().ok_or(DynamicsError::SingularInertia)?;
        Ok(Self { j, j_inv })
    }

    pub fn diagonal(jx: f64, jy: f64, jz: f64) -> Result<Self, DynamicsError> {
        Self::try_new(Mat3::from_diagonal(&Vec3::new(jx, jy, jz)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.j
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.j_inv
    }
}

/// Attitude and body-frame angular velocity.
#[derive(Clone, Copy, Debug)]
pub struct RigidBodyState {
    pub r: RotationMatrix,
    pub omega: Vec3,
}

/// One sample of a reference trajectory: attitude, body rate, and body
/// acceleration, consistent with `rd_dot = rd hat(omega_d)`.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceSample {
    pub rd: RotationMatrix,
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
}

/// Constant body-frame disturbance torque with its declared norm bound.
#[derive(Clone, Copy, Debug)]
pub struct Disturbance {
    delta: Vec3,
    delta_max: f64,
}

impl Disturbance {
    pub fn try_new(delta: Vec3, delta_max: f64) -> Result<Self, DynamicsError> {
        let norm = delta.norm();
        if !(norm <= delta_max) {
            return Err(DynamicsError::DisturbanceBound { norm, bound: delta_max });
        }
        Ok(Self { delta, delta_max })
    }

    pub fn zero() -> Self {
        Self { delta: Vec3::zeros(), delta_max: 0.0 }
    }

    pub fn delta(&self) -> Vec3 {
        self.delta
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }
}

pub trait ReferenceTrajectory {
    fn sample(&self, t: f64) -> ReferenceSample;
}

impl<T: ReferenceTrajectory + ?Sized> ReferenceTrajectory for &T {
    fn sample(&self, t: f64) -> ReferenceSample {
        (**self).sample(t)
    }
}

impl<T: ReferenceTrajectory + ?Sized> ReferenceTrajectory for Box<T> {
    fn sample(&self, t: f64) -> ReferenceSample {
        (**self).sample(t)
    }
}

/// Built-in periodic tumbling reference. Starts at the identity with body
/// rate (2, 0, 1) and keeps all three axes exercised; rate and acceleration
/// are closed forms consistent with the attitude kinematics.
#[derive(Clone, Copy, Debug, Default)]
pub struct TumblingReference;

impl ReferenceTrajectory for TumblingReference {
    fn sample(&self, t: f64) -> ReferenceSample {
        let (s, c) = t.sin_cos();
        let rd = Mat3::new(
            c,
            -c * s,
            s * s,
            c * s,
            c * c * c - s * s,
            -c * s - c * c * s,
            s * s,
            c * s + c * c * s,
            c * c - c * s * s,
        );
        ReferenceSample {
            rd: RotationMatrix::from_matrix_unchecked(rd),
            omega_d: Vec3::new(1.0 + c, s - s * c, c + s * s),
            omega_d_dot: Vec3::new(-s, c - c * c + s * s, -s + 2.0 * s * c),
        }
    }
}

/// Fixed attitude with zero rate.
#[derive(Clone, Copy, Debug)]
pub struct ConstantReference {
    rd: RotationMatrix,
}

impl ConstantReference {
    pub fn new(rd: RotationMatrix) -> Self {
        Self { rd }
    }
}

impl ReferenceTrajectory for ConstantReference {
    fn sample(&self, _t: f64) -> ReferenceSample {
        ReferenceSample { rd: self.rd, omega_d: Vec3::zeros(), omega_d_dot: Vec3::zeros() }
    }
}

/// Constant spin about a fixed body axis: `rd(t) = r0 exp(rate t hat(axis))`.
#[derive(Clone, Copy, Debug)]
pub struct FixedAxisReference {
    r0: RotationMatrix,
    axis: Vec3,
    rate: f64,
}

impl FixedAxisReference {
    /// The axis must be unit length.
    pub fn new(r0: RotationMatrix, axis: Vec3, rate: f64) -> Result<Self, so3::So3Error> {
        if (axis.norm() - 1.0).abs() > so3::ROTATION_TOL {
            return Err(so3::So3Error::NonUnitAxis(axis.norm()));
        }
        Ok(Self { r0, axis, rate })
    }
}

impl ReferenceTrajectory for FixedAxisReference {
    fn sample(&self, t: f64) -> ReferenceSample {
        let spin = so3::exp_rodrigues(self.rate * t, &self.axis).expect("axis checked unit");
        ReferenceSample {
            rd: self.r0 * spin,
            omega_d: self.axis * self.rate,
            omega_d_dot: Vec3::zeros(),
        }
    }
}

/// Plant right-hand side: `r_dot = r hat(omega)` and Euler's equation
/// `J omega_dot = (J omega) x omega + tau + delta`.
pub fn state_derivative(
    state: &RigidBodyState,
    torque: &Vec3,
    disturbance: &Disturbance,
    inertia: &InertiaMatrix,
) -> (Mat3, Vec3) {
    let r_dot = state.r.matrix() * so3::hat(&state.omega);
    let omega_dot =
        inertia.j_inv * ((inertia.j * state.omega).cross(&state.omega) + torque + disturbance.delta);
    (r_dot, omega_dot)
}

/// One classical RK4 step of the plant together with an estimator state.
///
/// `law` maps `(t, attitude, omega, delta_hat)` to `(torque, delta_hat
/// rate)` and is evaluated at all four stage points, so the estimator
/// integrates at the same order as the plant. Stage attitudes live in the
/// ambient space; the result is projected back onto the manifold. Errors
/// mean divergence (non-finite values or rate above `DIVERGENCE_RATE`).
pub fn integrate_step_coupled<F>(
    state: &RigidBodyState,
    delta_hat: &Vec3,
    mut law: F,
    disturbance: &Disturbance,
    inertia: &InertiaMatrix,
    t: f64,
    h: f64,
) -> Result<(RigidBodyState, Vec3), DynamicsError>
where
    F: FnMut(f64, &Mat3, &Vec3, &Vec3) -> (Vec3, Vec3),
{
    let mut deriv = |ti: f64, r: &Mat3, w: &Vec3, d: &Vec3| -> (Mat3, Vec3, Vec3) {
        let (tau, d_dot) = law(ti, r, w, d);
        let r_dot = r * so3::hat(w);
        let w_dot = inertia.j_inv * ((inertia.j * w).cross(w) + tau + disturbance.delta);
        (r_dot, w_dot, d_dot)
    };

    let r0 = *state.r.matrix();
    let w0 = state.omega;
    let d0 = *delta_hat;
    let half = h / 2.0;
    let k1 = deriv(t, &r0, &w0, &d0);
    let k2 = deriv(t + half, &(r0 + k1.0 * half), &(w0 + k1.1 * half), &(d0 + k1.2 * half));
    let k3 = deriv(t + half, &(r0 + k2.0 * half), &(w0 + k2.1 * half), &(d0 + k2.2 * half));
    let k4 = deriv(t + h, &(r0 + k3.0 * h), &(w0 + k3.1 * h), &(d0 + k3.2 * h));

    let r_new = r0 + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0);
    let w_new = w0 + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0);
    let d_new = d0 + (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (h / 6.0);

    let finite = r_new.iter().all(|x| x.is_finite())
        && w_new.iter().all(|x| x.is_finite())
        && d_new.iter().all(|x| x.is_finite());
    if !finite || w_new.norm() > DIVERGENCE_RATE {
        return Err(DynamicsError::Diverged { t: t + h });
    }
    let r = so3::project_so3(&r_new).map_err(|_| DynamicsError::Diverged { t: t + h })?;
    Ok((RigidBodyState { r, omega: w_new }, d_new))
}

/// One RK4 step under a torque program, without estimator state.
pub fn integrate_step<F>(
    state: &RigidBodyState,
    mut torque: F,
    disturbance: &Disturbance,
    inertia: &InertiaMatrix,
    t: f64,
    h: f64,
) -> Result<RigidBodyState, DynamicsError>
where
    F: FnMut(f64, &Mat3, &Vec3) -> Vec3,
{
    let (next, _) = integrate_step_coupled(
        state,
        &Vec3::zeros(),
        |ti, r, w, _| (torque(ti, r, w), Vec3::zeros()),
        disturbance,
        inertia,
        t,
        h,
    )?;
    Ok(next)
}
