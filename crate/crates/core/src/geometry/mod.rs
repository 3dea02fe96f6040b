//! One-on-one game theory on the hemispherical perimeter.
//!
//! The defender moves at unit speed, the attacker at speed ratio `v`. The attacker picks a
//! breach point `B` on the dome to maximize the temporal payoff
//! `P = ‖D − B‖ − ‖A − B‖ / v`; a positive payoff means the attacker arrives first.

mod canonical;
mod duel;
mod point;
mod solver;
mod surface;
mod verify;

pub use canonical::{canonicalize, CanonicalInstance, Degeneracy};
pub use duel::{deviate_breach, line_intercept_point, simulate_1v1, DuelOutcome, DuelSample};
pub use point::{wrap_pi, wrap_two_pi, Mat3, Point3, SphericalCoord};
pub use solver::{
    fixed_point_residual, solve_breach, solve_breach_fixed_point, solve_breach_grid, BreachSolution,
    SolveMethod, DEFAULT_GRID_N, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use surface::{
    attacker_on_zero_surface, write_surface_csv, zero_payoff_surface, SurfaceParams, SurfacePoint,
    ZeroPayoffSurface,
};
pub use verify::{nash_scenarios, write_nash_csv, NashParams, Scenario, ScenarioRecord, NASH_CSV_HEADER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid engagement: {0}")]
    InvalidInstance(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Temporal payoff `‖D − B‖ − ‖A − B‖ / v`. Positive means the attacker wins.
pub fn payoff(defender: Point3, attacker: Point3, breach: Point3, v: f64) -> Result<f64, GeometryError> {
    if !defender.is_finite() || !attacker.is_finite() || !breach.is_finite() {
        return Err(GeometryError::NonFinite("position"));
    }
    if !v.is_finite() {
        return Err(GeometryError::NonFinite("speed ratio"));
    }
    if v <= 0.0 {
        return Err(GeometryError::InvalidParameter(format!("speed ratio must be positive, got {v}")));
    }
    Ok(payoff_unchecked(defender, attacker, breach, v))
}

#[inline]
pub(crate) fn payoff_unchecked(defender: Point3, attacker: Point3, breach: Point3, v: f64) -> f64 {
    defender.distance(breach) - attacker.distance(breach) / v
}

/// One defender/attacker configuration of the 1v1 game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementInstance {
    pub defender: Point3,
    pub attacker: Point3,
    /// Attacker speed divided by defender speed.
    pub v: f64,
    pub radius: f64,
}

impl EngagementInstance {
    pub fn new(defender: Point3, attacker: Point3, v: f64, radius: f64) -> Result<Self, GeometryError> {
        if !defender.is_finite() || !attacker.is_finite() {
            return Err(GeometryError::NonFinite("position"));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(GeometryError::InvalidInstance(format!("speed ratio must be positive, got {v}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidInstance(format!("radius must be positive, got {radius}")));
        }
        if defender.norm() >= radius {
            return Err(GeometryError::InvalidInstance("defender must start inside the hemisphere".into()));
        }
        if attacker.norm() <= radius {
            return Err(GeometryError::InvalidInstance("attacker must start outside the hemisphere".into()));
        }
        if defender.z < 0.0 || attacker.z < 0.0 {
            return Err(GeometryError::InvalidInstance("agents must lie in the upper half-space".into()));
        }
        Ok(Self { defender, attacker, v, radius })
    }

    /// Unit-radius instance.
    pub fn unit(defender: Point3, attacker: Point3, v: f64) -> Result<Self, GeometryError> {
        Self::new(defender, attacker, v, 1.0)
    }

    /// Skips the inside/outside checks. The multi-agent engine uses this for agents that have
    /// strayed across the perimeter; the solvers stay well defined there.
    pub(crate) fn unchecked(defender: Point3, attacker: Point3, v: f64, radius: f64) -> Self {
        Self { defender, attacker, v, radius }
    }

    pub fn payoff_at(&self, breach: Point3) -> f64 {
        payoff_unchecked(self.defender, self.attacker, breach, self.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Written independently of `payoff` so the two can be compared.
    fn reference_payoff(d: [f64; 3], a: [f64; 3], b: [f64; 3], v: f64) -> f64 {
        let dd = ((d[0] - b[0]).powi(2) + (d[1] - b[1]).powi(2) + (d[2] - b[2]).powi(2)).sqrt();
        let da = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        dd - da / v
    }

    #[test]
    fn payoff_equidistant_is_zero() {
        let p = payoff(Point3::ZERO, Point3::new(2.0, 0.0, 0.0), Point3::X, 1.0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn payoff_direct_substitution() {
        let p = payoff(Point3::new(0.5, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), Point3::X, 0.8).unwrap();
        assert!((p + 0.75).abs() < 1e-15);
    }

    #[test]
    fn payoff_matches_reference_arithmetic() {
        let b = Point3::new(0.3, 0.5, 0.2).normalized().unwrap();
        let p = payoff(Point3::new(0.2, 0.2, 0.0), Point3::new(1.5, 0.3, 0.4), b, 0.9).unwrap();
        let r = reference_payoff([0.2, 0.2, 0.0], [1.5, 0.3, 0.4], b.to_array(), 0.9);
        assert!((p - r).abs() < 1e-12);
    }

    #[test]
    fn payoff_rejects_non_finite() {
        let err = payoff(Point3::new(f64::NAN, 0.0, 0.0), Point3::X, Point3::X, 1.0);
        assert!(matches!(err, Err(GeometryError::NonFinite(_))));
        assert!(payoff(Point3::ZERO, Point3::X, Point3::X, f64::INFINITY).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(EngagementInstance::unit(Point3::new(1.2, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), 1.0).is_err());
        assert!(EngagementInstance::unit(Point3::new(0.2, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0), 1.0).is_err());
        assert!(EngagementInstance::unit(Point3::new(0.2, 0.0, -0.1), Point3::new(2.0, 0.0, 0.0), 1.0).is_err());
        assert!(EngagementInstance::unit(Point3::new(0.2, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), 0.0).is_err());
        assert!(EngagementInstance::unit(Point3::new(0.2, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), 1.3).is_ok());
    }
}
