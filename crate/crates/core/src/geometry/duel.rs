//! Straight-line 1v1 engagements used to check the equilibrium strategies.

use serde::{Deserialize, Serialize};

use super::solver::solve_breach;
use super::{EngagementInstance, GeometryError, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuelSample {
    pub t: f64,
    pub defender: Point3,
    pub attacker: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelOutcome {
    pub optimal_breach: Point3,
    pub optimal_payoff: f64,
    /// Where the attacker actually flies.
    pub attacker_target: Point3,
    /// Waypoints the defender visits; the last one is always the attacker's target.
    pub defender_waypoints: Vec<Point3>,
    pub defender_arrival: f64,
    pub attacker_arrival: f64,
    /// `defender_arrival − attacker_arrival`.
    pub realized_payoff: f64,
    pub trajectory: Vec<DuelSample>,
    /// Largest distance between the re-solved breach point and the original one, sampled every
    /// step while both players are still moving. Only tracked under mutual optimal play.
    pub max_breach_drift: Option<f64>,
}

/// Intersection of the segment from the attacker to the defender with the dome, nearest the
/// attacker.
pub fn line_intercept_point(defender: Point3, attacker: Point3, radius: f64) -> Point3 {
    let dir = defender - attacker;
    let a = dir.norm_squared();
    let b = 2.0 * attacker.dot(dir);
    let c = attacker.norm_squared() - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let t = (-b - disc.sqrt()) / (2.0 * a);
    let p = attacker + dir * t.clamp(0.0, 1.0);
    p * (radius / p.norm())
}

/// A dome point `deviation` radians away from `breach`, rotated so that its angle to the attacker
/// (seen from the origin) does not shrink. Falls back to an azimuthal rotation when the in-plane
/// rotation would leave the dome.
pub fn deviate_breach(breach: Point3, attacker: Point3, deviation: f64) -> Point3 {
    if deviation == 0.0 {
        return breach;
    }
    let radius = breach.norm();
    let b_hat = breach * (1.0 / radius);
    // Tangent at B, in the plane of O, A and B, pointing away from A.
    let away = (b_hat * attacker.dot(b_hat) - attacker).normalized();
    if let Some(t) = away {
        let p = (b_hat * deviation.cos() + t * deviation.sin()) * radius;
        if p.z >= 0.0 {
            return p;
        }
    }
    let rotate_z = |angle: f64| {
        let (s, c) = angle.sin_cos();
        Point3::new(c * breach.x - s * breach.y, s * breach.x + c * breach.y, breach.z)
    };
    let plus = rotate_z(deviation);
    let minus = rotate_z(-deviation);
    if plus.dot(attacker) <= minus.dot(attacker) {
        plus
    } else {
        minus
    }
}

struct Mover {
    pos: Point3,
    speed: f64,
    waypoints: Vec<Point3>,
    next: usize,
    arrival: Option<f64>,
}

impl Mover {
    fn advance(&mut self, t: f64, dt: f64) {
        let mut budget = self.speed * dt;
        let mut elapsed = 0.0;
        while self.arrival.is_none() && budget > 0.0 {
            let target = self.waypoints[self.next];
            let gap = self.pos.distance(target);
            if gap <= budget {
                self.pos = target;
                budget -= gap;
                elapsed += gap / self.speed;
                self.next += 1;
                if self.next == self.waypoints.len() {
                    self.arrival = Some(t + elapsed);
                }
            } else {
                self.pos = self.pos + (target - self.pos) * (budget / gap);
                budget = 0.0;
            }
        }
    }
}

/// Runs one engagement with the defender at unit speed and the attacker at speed `v`.
///
/// - Attacker optimal: flies straight to the optimal breach point. Otherwise it flies to a point
///   `deviation` radians away (see [`deviate_breach`]).
/// - Defender optimal: flies straight to the attacker's (observable) target. Otherwise it first
///   heads for the intersection of the attacker–defender line with the dome, then on to the
///   attacker's target.
pub fn simulate_1v1(
    instance: &EngagementInstance,
    defender_optimal: bool,
    attacker_optimal: bool,
    deviation: f64,
    dt: f64,
) -> Result<DuelOutcome, GeometryError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(deviation.is_finite() && deviation >= 0.0) {
        return Err(GeometryError::InvalidParameter(format!("deviation must be non-negative, got {deviation}")));
    }
    let sol = solve_breach(instance);
    let optimal_breach = sol.breach_world;
    let attacker_target = if attacker_optimal {
        optimal_breach
    } else {
        deviate_breach(optimal_breach, instance.attacker, deviation)
    };
    let defender_waypoints = if defender_optimal {
        vec![attacker_target]
    } else {
        vec![line_intercept_point(instance.defender, instance.attacker, instance.radius), attacker_target]
    };

    let mut defender = Mover {
        pos: instance.defender,
        speed: 1.0,
        waypoints: defender_waypoints.clone(),
        next: 0,
        arrival: None,
    };
    let mut attacker = Mover {
        pos: instance.attacker,
        speed: instance.v,
        waypoints: vec![attacker_target],
        next: 0,
        arrival: None,
    };
    let track_drift = defender_optimal && attacker_optimal;
    let mut max_drift: f64 = 0.0;
    let mut trajectory = vec![DuelSample { t: 0.0, defender: defender.pos, attacker: attacker.pos }];
    let mut t = 0.0;
    let limit = 1e6 as usize;
    for _ in 0..limit {
        if defender.arrival.is_some() && attacker.arrival.is_some() {
            break;
        }
        defender.advance(t, dt);
        attacker.advance(t, dt);
        t += dt;
        trajectory.push(DuelSample { t, defender: defender.pos, attacker: attacker.pos });
        if track_drift && defender.arrival.is_none() && attacker.arrival.is_none() {
            let now = EngagementInstance::unchecked(defender.pos, attacker.pos, instance.v, instance.radius);
            // Close to the breach point the plane through O, D and A becomes ill-conditioned.
            if defender.pos.distance(optimal_breach) > 1e-3 && attacker.pos.distance(optimal_breach) > 1e-3 {
                let b = solve_breach(&now).breach_world;
                max_drift = max_drift.max(b.distance(optimal_breach));
            }
        }
    }
    let defender_arrival = defender.arrival.unwrap_or(f64::INFINITY);
    let attacker_arrival = attacker.arrival.unwrap_or(f64::INFINITY);
    Ok(DuelOutcome {
        optimal_breach,
        optimal_payoff: sol.payoff,
        attacker_target,
        defender_waypoints,
        defender_arrival,
        attacker_arrival,
        realized_payoff: defender_arrival - attacker_arrival,
        trajectory,
        max_breach_drift: track_drift.then_some(max_drift),
    })
}
