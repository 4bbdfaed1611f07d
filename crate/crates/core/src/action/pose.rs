//! Rigid poses and per-tick relative displacements.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform: position in meters and a unit quaternion kept in the
/// `w >= 0` hemisphere so that equal rotations serialize to equal bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonical(orientation.into_inner()),
        }
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Builds a pose from a position and a `(w, x, y, z)` quaternion that
    /// need not be normalized.
    pub fn from_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self {
            position: Vector3::from(position),
            orientation: canonical(q),
        }
    }

    /// Roll-pitch-yaw (extrinsic x, y, z) convenience constructor.
    pub fn from_xyz_rpy(position: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(position),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    /// Reassembles a pose from already-canonical serialized components
    /// without renormalizing, so decoded bytes stay bit-identical. Returns
    /// `None` when the quaternion is not unit norm within 1e-9 or is in the
    /// wrong hemisphere.
    pub(crate) fn from_canonical_parts(position: [f64; 3], wxyz: [f64; 4]) -> Option<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        if !position.iter().chain(wxyz.iter()).all(|v| v.is_finite()) {
            return None;
        }
        if (q.norm() - 1.0).abs() > 1e-9 || q.w < 0.0 {
            return None;
        }
        Some(Self {
            position: Vector3::from(position),
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    /// `(w, x, y, z)` in canonical hemisphere.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Composition `self ∘ other` (apply `other` in this pose's frame).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * other.position,
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }

    /// Angle of the relative rotation between two poses, radians.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        quat_log(&(other.orientation * self.orientation.inverse())).norm()
    }

    /// Quaternion distance `min(|q1 - q2|, |q1 + q2|)`.
    pub fn quat_distance(&self, other: &Pose) -> f64 {
        let a = self.orientation.quaternion();
        let b = other.orientation.quaternion();
        (a - b).norm().min((a + b).norm())
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    /// (w, x, y, z)
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: self.position.into(),
            orientation: self.wxyz(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        Ok(Pose::from_wxyz(r.position, r.orientation))
    }
}

fn canonical(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let n = q.norm();
    let q = if n > 0.0 && n.is_finite() {
        q / n
    } else {
        Quaternion::identity()
    };
    UnitQuaternion::new_unchecked(if q.w < 0.0 { -q } else { q })
}

/// Logarithm map of a unit quaternion to a rotation vector (axis·angle) with
/// angle in `[0, π]`. Uses `atan2` for accuracy at small angles.
pub fn quat_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}

/// Exponential map of a rotation vector to a unit quaternion.
pub fn quat_exp(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = r.norm();
    let half = 0.5 * theta;
    // sin(θ/2)/θ, series near zero
    let k = if theta < 1e-6 {
        0.5 - theta * theta / 48.0
    } else {
        half.sin() / theta
    };
    let q = Quaternion::new(half.cos(), r.x * k, r.y * k, r.z * k);
    canonical(q)
}

/// Relative displacement between two consecutive poses: translation in the
/// fixed reference frame plus a rotation vector with magnitude `<= π`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaPose {
    translation: Vector3<f64>,
    rotation: Vector3<f64>,
}

impl DeltaPose {
    /// Rotation vectors of magnitude `>= π` are wrapped to the equivalent
    /// rotation on the short side.
    pub fn new(translation: Vector3<f64>, rotation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: wrap_rotation(rotation),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_arrays(translation: [f64; 3], rotation: [f64; 3]) -> Self {
        Self::new(Vector3::from(translation), Vector3::from(rotation))
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation(&self) -> &Vector3<f64> {
        &self.rotation
    }

    pub fn is_zero(&self) -> bool {
        self.translation == Vector3::zeros() && self.rotation == Vector3::zeros()
    }

    /// Componentwise scaling of translation and rotation parts.
    pub fn scaled(&self, translation_gain: f64, rotation_gain: f64) -> Self {
        Self::new(
            self.translation * translation_gain,
            self.rotation * rotation_gain,
        )
    }

    /// The displacement equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &DeltaPose) -> DeltaPose {
        let r = quat_exp(&next.rotation) * quat_exp(&self.rotation);
        DeltaPose::new(self.translation + next.translation, quat_log(&r))
    }

    /// Expresses the displacement in another frame rotated by `rot`.
    pub fn rotated(&self, rot: &UnitQuaternion<f64>) -> DeltaPose {
        DeltaPose::new(rot * self.translation, rot * self.rotation)
    }

    /// `[tx, ty, tz, rx, ry, rz]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
        ]
    }
}

fn wrap_rotation(r: Vector3<f64>) -> Vector3<f64> {
    let theta = r.norm();
    if theta < PI || !theta.is_finite() {
        return r;
    }
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    r * (wrapped / theta)
}

/// Relative displacement from `prev` to `cur`.
pub fn compose_delta(prev: &Pose, cur: &Pose) -> DeltaPose {
    let rel = cur.orientation * prev.orientation.inverse();
    DeltaPose::new(cur.position - prev.position, quat_log(&rel))
}

/// Inverse of [`compose_delta`]: `apply_delta(prev, compose_delta(prev, cur)) == cur`.
pub fn apply_delta(pose: &Pose, d: &DeltaPose) -> Pose {
    Pose::new(
        pose.position + d.translation,
        quat_exp(&d.rotation) * pose.orientation,
    )
}
