//! Zero-payoff surface: attacker starting positions from which both players reach the optimal
//! breach point at the same moment.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::canonical::canonicalize;
use super::solver::{solve_breach, solve_breach_sphere};
use super::{EngagementInstance, GeometryError, Point3};
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub radius: f64,
    /// Directions sampled around the defender in the planar slice, over `[0, 2π)`.
    pub theta_samples: usize,
    /// Rotations of the planar curve about the defender axis.
    pub slices: usize,
    pub radial_tol: f64,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self { radius: 1.0, theta_samples: 72, slices: 36, radial_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    /// Planar direction angle, measured from the defender axis.
    pub theta: f64,
    /// Revolution angle about the defender axis.
    pub slice: f64,
    pub point: Point3,
    /// Optimal payoff at this attacker position under the ground-plane constraint.
    pub payoff: f64,
    /// True when the revolved point had to be re-solved along its own ray.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPayoffSurface {
    pub defender: Point3,
    pub v: f64,
    /// `(theta, attacker radius)` of the planar curve.
    pub planar: Vec<(f64, f64)>,
    pub points: Vec<SurfacePoint>,
    /// `(theta, slice)` pairs for which no sign change was bracketed.
    pub omitted: Vec<(f64, f64)>,
    /// Radius difference between the curve traced once around and its starting sample.
    pub closure_gap: f64,
}

impl ZeroPayoffSurface {
    /// Share of points whose optimal payoff is positive when the attacker is moved inward by
    /// the relative amount `rel` and negative when moved outward by it. An inward point at or
    /// inside the dome counts as positive: the attacker is already through.
    pub fn sign_flip_fraction(&self, rel: f64, radius: f64) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let payoff = |a: Point3| solve_breach(&EngagementInstance::unchecked(self.defender, a, self.v, radius)).payoff;
        let flips = self
            .points
            .iter()
            .filter(|p| {
                let inner = p.point * (1.0 - rel);
                let inside_wins = inner.norm() <= radius || payoff(inner) > 0.0;
                inside_wins && payoff(p.point * (1.0 + rel)) < 0.0
            })
            .count();
        flips as f64 / self.points.len() as f64
    }
}

const MAX_RADIUS_FACTOR: f64 = 256.0;

/// Radius along `dir` at which the optimal payoff crosses zero.
fn root_along(
    defender: Point3,
    dir: Point3,
    v: f64,
    radius: f64,
    tol: f64,
    dome: bool,
) -> Option<f64> {
    let payoff_at = |r: f64| {
        let mut a = dir * r;
        if dome && a.z < 0.0 {
            a.z = 0.0;
        }
        let inst = EngagementInstance::unchecked(defender, a, v, radius);
        if dome {
            solve_breach(&inst).payoff
        } else {
            solve_breach_sphere(&inst).payoff
        }
    };
    let lo = radius * (1.0 + 1e-9);
    let mut hi = 2.0 * radius;
    while payoff_at(hi) > 0.0 {
        hi *= 2.0;
        if hi > MAX_RADIUS_FACTOR * radius {
            return None;
        }
    }
    bisect(payoff_at, lo, hi, tol, 1e-13 * radius).map(|(r, _)| r)
}

/// Places an attacker on the zero-payoff surface along `direction` from the origin.
pub fn attacker_on_zero_surface(
    defender: Point3,
    direction: Point3,
    v: f64,
    radius: f64,
    tol: f64,
) -> Result<Point3, GeometryError> {
    let dir = direction
        .normalized()
        .ok_or_else(|| GeometryError::InvalidParameter("zero direction".into()))?;
    if defender.norm() >= radius {
        return Err(GeometryError::InvalidInstance("defender must start inside the hemisphere".into()));
    }
    let r = root_along(defender, dir, v, radius, tol, true)
        .ok_or_else(|| GeometryError::InvalidInstance("no zero-payoff radius along direction".into()))?;
    let mut a = dir * r;
    a.z = a.z.max(0.0);
    Ok(a)
}

/// Samples the zero-payoff surface around `defender`.
///
/// The planar curve is found by root-finding the attacker radius in each direction of one slice
/// through the defender axis, then revolved about that axis. Revolved points below the ground
/// plane are dropped; the rest are checked against the constrained solver and re-solved along
/// their ray if the check fails.
pub fn zero_payoff_surface(defender: Point3, v: f64, params: &SurfaceParams) -> Result<ZeroPayoffSurface, GeometryError> {
    let r = params.radius;
    if !defender.is_finite() {
        return Err(GeometryError::NonFinite("defender"));
    }
    if defender.norm() >= r || defender.z < 0.0 {
        return Err(GeometryError::InvalidInstance("defender must start inside the hemisphere".into()));
    }
    if !(v.is_finite() && v > 0.0) || params.theta_samples < 4 || params.slices == 0 || params.radial_tol <= 0.0 {
        return Err(GeometryError::InvalidParameter("surface sampling parameters".into()));
    }

    // Any attacker position works here; only the defender axis and an upward perpendicular matter.
    let probe = EngagementInstance::unchecked(defender, Point3::new(0.0, 0.0, 2.0 * r), v, r);
    let frame = canonicalize(&probe);
    let e1 = frame.rotation.column(0);
    let e2 = frame.rotation.column(1);
    let e3 = frame.rotation.column(2);

    let n = params.theta_samples;
    let mut planar = Vec::with_capacity(n);
    for k in 0..n {
        let theta = TAU * k as f64 / n as f64;
        let dir = e1 * theta.cos() + e2 * theta.sin();
        if let Some(radius) = root_along(defender, dir, v, r, params.radial_tol, false) {
            planar.push((theta, radius));
        }
    }
    let closure_gap = match (planar.first(), root_along(defender, e1 * TAU.cos() + e2 * TAU.sin(), v, r, params.radial_tol, false)) {
        (Some(&(_, r0)), Some(r_end)) => (r_end - r0).abs(),
        _ => f64::INFINITY,
    };

    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for m in 0..params.slices {
        let slice = TAU * m as f64 / params.slices as f64;
        let (sw, cw) = slice.sin_cos();
        let lateral = e2 * cw + e3 * sw;
        for &(theta, radius) in &planar {
            let dir = e1 * theta.cos() + lateral * theta.sin();
            let mut candidate = dir * radius;
            if candidate.z < -1e-12 {
                continue;
            }
            candidate.z = candidate.z.max(0.0);
            let inst = EngagementInstance::unchecked(defender, candidate, v, r);
            let mut payoff = solve_breach(&inst).payoff;
            let mut refined = false;
            if payoff.abs() >= params.radial_tol {
                match root_along(defender, dir, v, r, params.radial_tol, true) {
                    Some(rr) => {
                        candidate = dir * rr;
                        candidate.z = candidate.z.max(0.0);
                        payoff = solve_breach(&EngagementInstance::unchecked(defender, candidate, v, r)).payoff;
                        refined = true;
                    }
                    None => {
                        omitted.push((theta, slice));
                        continue;
                    }
                }
            }
            if payoff.abs() < params.radial_tol {
                points.push(SurfacePoint { theta, slice, point: candidate, payoff, refined });
            } else {
                omitted.push((theta, slice));
            }
        }
    }

    Ok(ZeroPayoffSurface { defender, v, planar, points, omitted, closure_gap })
}

/// Writes `theta,x,y,z` rows, one per surface point.
pub fn write_surface_csv<W: Write>(surface: &ZeroPayoffSurface, mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta,x,y,z")?;
    for p in &surface.points {
        writeln!(out, "{},{},{},{}", p.theta, p.point.x, p.point.y, p.point.z)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SurfaceParams {
        SurfaceParams { theta_samples: 24, slices: 8, ..SurfaceParams::default() }
    }

    #[test]
    fn every_point_has_zero_payoff() {
        let s = zero_payoff_surface(Point3::new(0.2, 0.2, 0.0), 0.8, &small()).unwrap();
        assert!(!s.points.is_empty());
        for p in &s.points {
            assert!(p.payoff.abs() < 1e-6);
            assert!(p.point.norm() > 1.0);
            assert!(p.point.z >= 0.0);
        }
    }

    #[test]
    fn radial_perturbation_flips_sign() {
        let d = Point3::new(0.2, 0.2, 0.0);
        let s = zero_payoff_surface(d, 0.8, &small()).unwrap();
        for p in &s.points {
            let out = solve_breach(&EngagementInstance::unchecked(d, p.point * 1.01, 0.8, 1.0));
            let inn = solve_breach(&EngagementInstance::unchecked(d, p.point * 0.99, 0.8, 1.0));
            assert!(out.payoff < 0.0, "outward payoff {}", out.payoff);
            if (p.point * 0.99).norm() > 1.0 {
                assert!(inn.payoff > 0.0, "inward payoff {}", inn.payoff);
            }
        }
    }

    #[test]
    fn planar_curve_closes() {
        let s = zero_payoff_surface(Point3::new(0.2, 0.2, 0.0), 1.25, &small()).unwrap();
        assert_eq!(s.planar.len(), 24);
        assert!(s.closure_gap < 1e-6);
        // Symmetric about the defender axis.
        for k in 1..12 {
            assert!((s.planar[k].1 - s.planar[24 - k].1).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = zero_payoff_surface(Point3::new(0.2, 0.2, 0.0), 0.8, &small()).unwrap();
        let mut buf = Vec::new();
        write_surface_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("theta,x,y,z"));
        assert_eq!(lines.count(), s.points.len());
    }

    #[test]
    fn rejects_defender_outside() {
        assert!(zero_payoff_surface(Point3::new(1.2, 0.0, 0.0), 0.8, &small()).is_err());
    }
}
