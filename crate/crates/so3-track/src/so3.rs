//! Rotation-matrix algebra: hat/vee maps, the Rodrigues exponential,
//! conjugacy-class decomposition, and projection back onto the manifold.

use nalgebra as na;
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec3 = na::Vector3<f64>;
pub type Mat3 = na::Matrix3<f64>;

/// Frobenius tolerance for orthonormality, determinant, unit-axis, and
/// skew-symmetry checks on caller-supplied matrices. Products of many exact
/// rotations stay orders of magnitude inside this.
pub const ROTATION_TOL: f64 = 1e-9;

/// Within this distance of a half turn the skew part of a rotation is too
/// small to carry the axis reliably, so the decomposition switches to the
/// symmetric rank-one extraction.
pub const NEAR_PI_THRESHOLD: f64 = 1e-4;

/// Axis-sign candidates whose reconstructions differ by less than this in
/// Frobenius norm are treated as tied and resolved by the canonical-sign
/// rule. Only a hair above the comparison's own noise floor: at a half turn
/// the candidates genuinely tie, while even a 1e-11 shy of it they do not.
const SIGN_TEST_TOL: f64 = 1e-12;

/// The polar iteration stops once the iterate is orthonormal to this
/// tolerance. Slack enough that a matrix already orthonormal to machine
/// precision is returned untouched.
const POLAR_CONVERGED: f64 = 4e-15;

const MAX_POLAR_ITERS: usize = 40;

#[derive(Debug, Error)]
pub enum So3Error {
    #[error("matrix is not a rotation (orthonormality error {ortho:.3e}, det {det:.6})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("matrix is not skew-symmetric (symmetric part has norm {0:.3e})")]
    NonSkewInput(f64),
    #[error("axis norm {0:.6} is not 1")]
    NonUnitAxis(f64),
    #[error("matrix with determinant {0:.3e} has no rotation factor")]
    DegenerateInput(f64),
}

/// Proper orthogonal 3x3 matrix. `try_new` checks `R^T R = I` and
/// `det R = 1` to `ROTATION_TOL`; arithmetic that provably stays on the
/// manifold goes through `from_matrix_unchecked`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn try_new(m: Mat3) -> Result<Self, So3Error> {
        let ortho = orthonormality_error(&m);
        let det = m.determinant();
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(So3Error::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Wrap a matrix already known to be a rotation (closed-form
    /// constructions, products of rotations). Checked in debug builds only.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        debug_assert!(
            orthonormality_error(&m) <= ROTATION_TOL && (m.determinant() - 1.0).abs() <= ROTATION_TOL,
            "matrix left the manifold: orthonormality error {:.3e}, det {:.6}",
            orthonormality_error(&m),
            m.determinant()
        );
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Frobenius norm of `m^T m - I`.
pub fn orthonormality_error(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Skew matrix of `v`: `hat(v) w = v x w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of `hat`. Rejects matrices whose symmetric part exceeds
/// `ROTATION_TOL` in Frobenius norm.
pub fn vee(m: &Mat3) -> Result<Vec3, So3Error> {
    let sym_norm = (m + m.transpose()).norm() / 2.0;
    if sym_norm > ROTATION_TOL {
        return Err(So3Error::NonSkewInput(sym_norm));
    }
    Ok(vee_raw(&((m - m.transpose()) / 2.0)))
}

pub(crate) fn vee_raw(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues form of `exp(theta hat(axis))`. The axis must be unit length;
/// `theta` is unrestricted.
pub fn exp_rodrigues(theta: f64, axis: &Vec3) -> Result<RotationMatrix, So3Error> {
    if (axis.norm() - 1.0).abs() > ROTATION_TOL {
        return Err(So3Error::NonUnitAxis(axis.norm()));
    }
    let k = hat(axis);
    let m = Mat3::identity() + k * theta.sin() + (k * k) * (1.0 - theta.cos());
    Ok(RotationMatrix::from_matrix_unchecked(m))
}

/// Rotation by `theta` about the third axis.
pub fn rotation_z(theta: f64) -> RotationMatrix {
    let (s, c) = theta.sin_cos();
    RotationMatrix(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Frobenius distance between two rotations. Bi-invariant, ranges over
/// `[0, 2 sqrt(2)]`, and attains the maximum exactly when `r1 r2^T` is a
/// half turn.
pub fn rotation_distance(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    (r1.0 - r2.0).norm()
}

/// Conjugacy-class angle of a rotation, `arccos((tr x - 1) / 2)` with the
/// argument clamped into `[-1, 1]` against rounding. Lands in `[0, pi]`.
pub fn conjugacy_angle(x: &RotationMatrix) -> f64 {
    ((x.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Factorization `x = u z(theta) u^T` with `theta` in `[0, pi]`; the third
/// column of `u` is the rotation axis.
#[derive(Clone, Copy, Debug)]
pub struct ConjugacyDecomposition {
    pub theta: f64,
    pub u: RotationMatrix,
}

impl ConjugacyDecomposition {
    pub fn reconstruct(&self) -> RotationMatrix {
        self.u * rotation_z(self.theta) * self.u.transpose()
    }
}

/// Split a rotation into its class angle and a conjugating rotation,
/// `x = u z(theta) u^T`.
///
/// The angle comes from atan2 of the skew-part magnitude against the shifted
/// trace, which stays accurate where arccos of the trace alone degrades
/// (within ~1e-8 of either endpoint). Away from a half turn the axis is the
/// normalized vee of `x - x^T`. Above `pi - NEAR_PI_THRESHOLD` that
/// difference vanishes, and the axis is taken from the symmetric part
/// instead: `(x + x^T)/2 - cos(theta) I` equals `(1 - cos(theta)) u3 u3^T`,
/// so its largest-diagonal column is the axis up to sign. The residual skew
/// part picks the sign; at an exact half turn both signs reconstruct `x`
/// equally well and the first component of magnitude above 1e-12 is made
/// nonnegative.
///
/// The identity returns `theta = 0` with `u = I`.
pub fn conjugacy_decompose(x: &RotationMatrix) -> ConjugacyDecomposition {
    let m = &x.0;
    let cos_theta = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let half_skew = vee_raw(&(m - m.transpose())) / 2.0;
    let sin_theta = half_skew.norm();
    let theta = sin_theta.atan2(cos_theta);
    if theta == 0.0 {
        return ConjugacyDecomposition { theta, u: RotationMatrix::identity() };
    }

    let u3 = if theta > PI - NEAR_PI_THRESHOLD {
        let sym = (m + m.transpose()) / 2.0 - Mat3::identity() * cos_theta;
        let j = (0..3)
            .max_by(|&a, &b| sym[(a, a)].partial_cmp(&sym[(b, b)]).unwrap())
            .unwrap();
        let mut u3 = sym.column(j).into_owned().normalize();
        let plus = exp_rodrigues(theta, &u3).unwrap();
        let d_plus = (plus.0 - m).norm();
        let d_minus = (plus.0.transpose() - m).norm();
        if (d_plus - d_minus).abs() <= SIGN_TEST_TOL {
            if let Some(lead) = u3.iter().copied().find(|c| c.abs() > 1e-12) {
                if lead < 0.0 {
                    u3 = -u3;
                }
            }
        } else if d_minus < d_plus {
            u3 = -u3;
        }
        u3
    } else {
        half_skew / sin_theta
    };

    let k = (0..3)
        .min_by(|&a, &b| u3[a].abs().partial_cmp(&u3[b].abs()).unwrap())
        .unwrap();
    let mut seed = Vec3::zeros();
    seed[k] = 1.0;
    let u1 = (seed - u3 * u3[k]).normalize();
    let u2 = u3.cross(&u1);
    let u = Mat3::from_columns(&[u1, u2, u3]);
    ConjugacyDecomposition { theta, u: RotationMatrix::from_matrix_unchecked(u) }
}

/// Vector attitude error `e_R = 1/2 vee(rd^T r - r^T rd)`. Its norm equals
/// the sine of the relative angle, so it vanishes both at perfect tracking
/// and at the antipodal set.
pub fn attitude_error_vector(r: &RotationMatrix, rd: &RotationMatrix) -> Vec3 {
    attitude_error_raw(&r.0, &rd.0)
}

pub(crate) fn attitude_error_raw(r: &Mat3, rd: &Mat3) -> Vec3 {
    vee_raw(&(rd.transpose() * r - r.transpose() * rd)) / 2.0
}

/// Transport matrix `C = 1/2 (tr(r^T rd) I - r^T rd)` relating the vector
/// error rate to the velocity error. Its spectral norm never exceeds 1.
pub fn transport_matrix(r: &RotationMatrix, rd: &RotationMatrix) -> Mat3 {
    let a = r.0.transpose() * rd.0;
    (Mat3::identity() * a.trace() - a) / 2.0
}

/// Nearest rotation to `m` in the polar sense, by Newton iteration on the
/// orthogonal factor, `x <- (x + x^{-T}) / 2`. Exact rotations pass through
/// unchanged; matrices with nonpositive determinant have no rotation factor
/// and are rejected.
pub fn project_so3(m: &Mat3) -> Result<RotationMatrix, So3Error> {
    let det = m.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(So3Error::DegenerateInput(det));
    }
    let mut x = *m;
    for _ in 0..MAX_POLAR_ITERS {
        if orthonormality_error(&x) <= POLAR_CONVERGED {
            break;
        }
        let inv = x.try_inverse().ok_or(So3Error::DegenerateInput(det))?;
        x = (x + inv.transpose()) / 2.0;
    }
    RotationMatrix::try_new(x)
}
