use serde::{Deserialize, Serialize};

use super::{EngagementInstance, Mat3, Point3};

const AXIS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    None,
    /// Attacker lies on the line through the origin and the defender; the plane is not unique.
    AttackerOnAxis,
    /// Defender sits at the origin, so every breach point is equidistant for it.
    DefenderAtOrigin,
}

/// The engagement rotated so the defender sits at `(a, 0, 0)` and the attacker at `(x0, s, 0)`.
///
/// `rotation` maps canonical coordinates back to the world frame; its columns are the canonical
/// axes expressed in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInstance {
    pub a: f64,
    pub r_attacker: f64,
    /// Effective pitch angle: the angle at the origin between defender and attacker, in `[0, π]`.
    pub phi_attacker: f64,
    pub x0: f64,
    pub s: f64,
    pub radius: f64,
    pub v: f64,
    pub rotation: Mat3,
    pub degeneracy: Degeneracy,
}

impl CanonicalInstance {
    pub fn to_world(&self, p: Point3) -> Point3 {
        self.rotation.apply(p)
    }

    pub fn to_canonical(&self, p: Point3) -> Point3 {
        self.rotation.transpose().apply(p)
    }

    /// World position of the in-plane boundary point at angle `theta` from the defender axis.
    pub fn boundary_point(&self, theta: f64) -> Point3 {
        let (s, c) = theta.sin_cos();
        self.to_world(Point3::new(self.radius * c, self.radius * s, 0.0))
    }

    pub fn defender_canonical(&self) -> Point3 {
        Point3::new(self.a, 0.0, 0.0)
    }

    pub fn attacker_canonical(&self) -> Point3 {
        Point3::new(self.x0, self.s, 0.0)
    }
}

/// Unit vector perpendicular to `axis`, preferring the one closest to +z so that the canonical
/// plane reaches over the dome.
fn upward_perpendicular(axis: Point3) -> Point3 {
    let candidate = Point3::Z - axis * axis.z;
    candidate
        .normalized()
        .unwrap_or_else(|| (Point3::X - axis * axis.x).normalized().expect("axis is a unit vector"))
}

/// Rotates the instance into the plane spanned by the origin, defender and attacker.
pub fn canonicalize(instance: &EngagementInstance) -> CanonicalInstance {
    let d = instance.defender;
    let a_pos = instance.attacker;
    let a = d.norm();
    let r_attacker = a_pos.norm();

    let (e1, degeneracy) = match d.normalized() {
        Some(e1) if a > AXIS_EPS => (e1, Degeneracy::None),
        _ => (
            a_pos.normalized().unwrap_or(Point3::X),
            Degeneracy::DefenderAtOrigin,
        ),
    };
    let x0 = a_pos.dot(e1);
    let lateral = a_pos - e1 * x0;
    let s_raw = lateral.norm();
    let (e2, degeneracy) = if s_raw > AXIS_EPS * r_attacker.max(1.0) {
        (lateral * (1.0 / s_raw), degeneracy)
    } else {
        let deg = if degeneracy == Degeneracy::None { Degeneracy::AttackerOnAxis } else { degeneracy };
        (upward_perpendicular(e1), deg)
    };
    let e3 = e1.cross(e2);
    let s = a_pos.dot(e2).max(0.0);
    let phi_attacker = s.atan2(x0);

    CanonicalInstance {
        a,
        r_attacker,
        phi_attacker,
        x0,
        s,
        radius: instance.radius,
        v: instance.v,
        rotation: Mat3::from_columns(e1, e2, e3),
        degeneracy,
    }
}
