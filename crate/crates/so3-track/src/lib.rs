//! Rigid-body attitude tracking on SO(3).
//!
//! The crate centers on a smooth tracking law that is almost globally
//! convergent, plus a shifted-reference construction that extends it to a
//! globally attractive one without introducing discontinuities: when the
//! initial attitude error is too large, the loop tracks a reference rotated
//! toward the initial attitude along its conjugacy class, and the shift
//! decays exponentially. Adaptive variants estimate a constant disturbance
//! torque alongside the state.
//!
//! - [`so3`]: rotation algebra (hat/vee, Rodrigues exponential,
//!   conjugacy-class decomposition, manifold projection).
//! - [`dynamics`]: inertia, reference trajectories, and the coupled RK4
//!   integrator.
//! - [`controllers`]: the four control laws, gain validation, and basin
//!   membership reports.
//! - [`diagnostics`]: Lyapunov values, comparison matrices, and envelope
//!   checks.
//! - [`harness`]: scenario configs, the closed-loop driver, and the CSV
//!   trajectory contract behind the `so3-track` binary.

pub mod controllers;
pub mod diagnostics;
pub mod dynamics;
pub mod harness;
pub mod so3;

#[cfg(test)]
pub(crate) mod test_util;
