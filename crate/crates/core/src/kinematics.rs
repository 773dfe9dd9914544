//! Denavit–Hartenberg forward kinematics for serial revolute chains.
//!
//! Component `i` of a [`RobotModel`] is rigidly attached to the frame that
//! follows its last DOF, so its pose is a function of the DOF prefix
//! `q[..n_i]` alone. [`prefix_forward_kinematics`] exploits that to pose one
//! component without the trailing joints.

use std::ops::{Deref, DerefMut};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::robot::RobotModel;

/// One row of a standard DH table (revolute joint).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    /// Link length `a`, meters.
    pub a: f64,
    /// Link twist `alpha`, radians.
    pub alpha: f64,
    /// Link offset `d`, meters.
    pub d: f64,
    /// Constant added to the joint variable, radians.
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.alpha.is_finite() && self.d.is_finite() && self.theta_offset.is_finite()
    }

    /// Transform from this joint's frame to the previous one:
    /// `Rz(theta) * Tz(d) * Tx(a) * Rx(alpha)`.
    pub fn transform(&self, angle: f64) -> Pose {
        let (st, ct) = (angle + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Pose {
            rotation: Matrix3::new(
                ct, -st * ca, st * sa, //
                st, ct * ca, -ct * sa, //
                0.0, sa, ca,
            ),
            translation: Vector3::new(self.a * ct, self.a * st, self.d),
        }
    }
}

/// A point in configuration space: one angle per DOF, radians.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(n: usize) -> Self {
        JointVector(vec![0.0; n])
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        joint_distance(self, other)
    }
}

impl Deref for JointVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        JointVector(v)
    }
}

impl AsRef<[f64]> for JointVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Unweighted Euclidean distance in joint space.
pub fn joint_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rigid transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Largest entry of `R^T R - I` plus the determinant error.
    pub fn orthonormality_error(&self) -> f64 {
        let e = self.rotation.transpose() * self.rotation - Matrix3::identity();
        e.amax() + (self.rotation.determinant() - 1.0).abs()
    }

    /// Max-norm difference of rotation and translation blocks.
    pub fn max_deviation(&self, other: &Pose) -> f64 {
        (self.rotation - other.rotation)
            .amax()
            .max((self.translation - other.translation).amax())
    }
}

/// Poses of joint frames `1..=frames` (frame `j` follows joint `j`).
pub(crate) fn chain_frames(rows: &[DhRow], q: &[f64], frames: usize, out: &mut Vec<Pose>) {
    out.clear();
    let mut acc = Pose::identity();
    for (row, &angle) in rows.iter().zip(q).take(frames) {
        acc = acc.compose(&row.transform(angle));
        out.push(acc);
    }
}

/// World pose of every component, in component order.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Vec<Pose>> {
    check_dim(model.dof(), q.len())?;
    let mut frames = Vec::with_capacity(model.dof());
    chain_frames(model.dh(), q, model.dof(), &mut frames);
    Ok(model
        .prefix_dims()
        .iter()
        .map(|&n| frames[n - 1])
        .collect())
}

/// World pose of component `level` (0-based) from the first `n_level` angles.
pub fn prefix_forward_kinematics(model: &RobotModel, q_prefix: &[f64], level: usize) -> Result<Pose> {
    let levels = model.levels();
    if level >= levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    let n = model.prefix_dim(level);
    check_dim(n, q_prefix.len())?;
    let mut acc = Pose::identity();
    for (row, &angle) in model.dh().iter().zip(q_prefix) {
        acc = acc.compose(&row.transform(angle));
    }
    Ok(acc)
}
