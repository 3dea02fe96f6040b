//! Heterogeneous agent dynamics and the wind field.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_pi, wrap_two_pi, Point3};

pub const NUM_TYPES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsFamily {
    /// Action scales yaw/pitch angular velocity.
    MissileRate,
    /// Action scales the change of yaw/pitch angular velocity.
    AngleAcceleration,
    /// Action sets yaw/pitch directly.
    DirectAngle,
}

impl DynamicsFamily {
    pub const ALL: [DynamicsFamily; 3] =
        [DynamicsFamily::MissileRate, DynamicsFamily::AngleAcceleration, DynamicsFamily::DirectAngle];

    pub fn index(self) -> usize {
        match self {
            DynamicsFamily::MissileRate => 0,
            DynamicsFamily::AngleAcceleration => 1,
            DynamicsFamily::DirectAngle => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub family: DynamicsFamily,
    pub max_speed: f64,
    /// rad/s. Unused by the direct-angle family.
    pub max_turn_rate: f64,
    /// rad/s², angle-acceleration family only.
    pub max_turn_accel: f64,
    pub wind_profile_id: usize,
    pub type_id: usize,
}

const SPEEDS: [f64; 2] = [1.0, 1.2];
const MISSILE_TURN: f64 = 2.0;
const ACCEL_TURN: f64 = 3.0;
const ACCEL_LIMIT: f64 = 12.0;
/// (speed index, wind profile, turn rate) of the extra missile variants.
const MISSILE_VARIANTS: [(usize, usize, f64); 4] = [(0, 0, 1.0), (1, 1, 1.0), (0, 1, 4.0), (1, 0, 4.0)];

/// The 16 dynamics types: every family at two speeds and two wind profiles, followed by four
/// missile variants with different turn rates.
pub fn dynamics_table() -> [DynamicsSpec; NUM_TYPES] {
    let mut out = [DynamicsSpec {
        family: DynamicsFamily::MissileRate,
        max_speed: 1.0,
        max_turn_rate: MISSILE_TURN,
        max_turn_accel: 0.0,
        wind_profile_id: 0,
        type_id: 0,
    }; NUM_TYPES];
    let mut id = 0;
    for family in DynamicsFamily::ALL {
        for speed in SPEEDS {
            for wind in 0..2 {
                let (rate, accel) = match family {
                    DynamicsFamily::MissileRate => (MISSILE_TURN, 0.0),
                    DynamicsFamily::AngleAcceleration => (ACCEL_TURN, ACCEL_LIMIT),
                    DynamicsFamily::DirectAngle => (0.0, 0.0),
                };
                out[id] = DynamicsSpec {
                    family,
                    max_speed: speed,
                    max_turn_rate: rate,
                    max_turn_accel: accel,
                    wind_profile_id: wind,
                    type_id: id,
                };
                id += 1;
            }
        }
    }
    for (speed, wind, rate) in MISSILE_VARIANTS {
        out[id] = DynamicsSpec {
            family: DynamicsFamily::MissileRate,
            max_speed: SPEEDS[speed],
            max_turn_rate: rate,
            max_turn_accel: 0.0,
            wind_profile_id: wind,
            type_id: id,
        };
        id += 1;
    }
    out
}

/// `w = shear·z·base − drag·v + N(0, σ²)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    pub shear_coefficient: f64,
    pub base_direction: Point3,
    pub sigma: f64,
    pub drag_coefficient: f64,
}

impl WindModel {
    pub const CALM: WindModel =
        WindModel { shear_coefficient: 0.0, base_direction: Point3::X, sigma: 0.0, drag_coefficient: 0.0 };

    /// Built-in profile `id` with every coefficient multiplied by `scale`.
    pub fn profile(id: usize, scale: f64) -> WindModel {
        let base = match id {
            0 => WindModel { shear_coefficient: 0.05, base_direction: Point3::X, sigma: 0.01, drag_coefficient: 0.05 },
            _ => WindModel {
                shear_coefficient: 0.1,
                base_direction: Point3::new(0.6, 0.8, 0.0),
                sigma: 0.02,
                drag_coefficient: 0.1,
            },
        };
        WindModel {
            shear_coefficient: base.shear_coefficient * scale,
            sigma: base.sigma * scale,
            drag_coefficient: base.drag_coefficient * scale,
            ..base
        }
    }

    /// Deterministic part of the wind for an agent at height `z` flying with own velocity `v`.
    pub fn mean(&self, z: f64, v: Point3) -> Point3 {
        self.base_direction * (self.shear_coefficient * z) - v * self.drag_coefficient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Defender,
    Attacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point3,
    /// Ground velocity over the last step: own velocity plus wind.
    pub velocity: Point3,
    /// Velocity produced by the agent's own dynamics.
    pub own_velocity: Point3,
    /// Acceleration implied by the last heading change.
    pub acceleration: Point3,
    /// `[0, 2π)`.
    pub yaw: f64,
    /// Elevation, `[-π/2, π/2]`.
    pub pitch: f64,
    pub yaw_rate: f64,
    pub pitch_rate: f64,
    pub dynamics: DynamicsSpec,
    pub alive: bool,
    pub role: Role,
}

impl AgentState {
    pub fn new(position: Point3, yaw: f64, pitch: f64, dynamics: DynamicsSpec, role: Role) -> Self {
        let own = Point3::from_heading(yaw, pitch) * dynamics.max_speed;
        AgentState {
            position,
            velocity: own,
            own_velocity: own,
            acceleration: Point3::ZERO,
            yaw: wrap_two_pi(yaw),
            pitch: pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            yaw_rate: 0.0,
            pitch_rate: 0.0,
            dynamics,
            alive: true,
            role,
        }
    }

    pub fn heading(&self) -> Point3 {
        Point3::from_heading(self.yaw, self.pitch)
    }
}

pub fn wind_at<R: Rng + ?Sized>(agent: &AgentState, model: &WindModel, rng: &mut R) -> Point3 {
    let mut noise = [0.0; 3];
    for n in &mut noise {
        let z: f64 = StandardNormal.sample(rng);
        *n = model.sigma * z;
    }
    model.mean(agent.position.z, agent.own_velocity) + Point3::from_array(noise)
}

/// Advances one agent by `dt` under `action` (components clipped to `[-1, 1]`) and `wind`.
///
/// The heading changes according to the dynamics family, own velocity is rebuilt at max speed
/// along it, and the position moves by `(own + wind)·dt`. Positions never go below the ground.
pub fn integrate(agent: &AgentState, action: [f64; 2], wind: Point3, dt: f64) -> AgentState {
    let mut next = *agent;
    let u = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
    let spec = &agent.dynamics;
    match spec.family {
        DynamicsFamily::MissileRate => {
            next.yaw_rate = u[0] * spec.max_turn_rate;
            next.pitch_rate = u[1] * spec.max_turn_rate;
            next.yaw += next.yaw_rate * dt;
            next.pitch += next.pitch_rate * dt;
        }
        DynamicsFamily::AngleAcceleration => {
            let lim = spec.max_turn_rate;
            next.yaw_rate = (agent.yaw_rate + u[0] * spec.max_turn_accel * dt).clamp(-lim, lim);
            next.pitch_rate = (agent.pitch_rate + u[1] * spec.max_turn_accel * dt).clamp(-lim, lim);
            next.yaw += next.yaw_rate * dt;
            next.pitch += next.pitch_rate * dt;
        }
        DynamicsFamily::DirectAngle => {
            next.yaw = (u[0] + 1.0) * PI;
            next.pitch = u[1] * FRAC_PI_2;
            next.yaw_rate = 0.0;
            next.pitch_rate = 0.0;
        }
    }
    next.yaw = wrap_two_pi(next.yaw);
    if next.pitch.abs() > FRAC_PI_2 {
        next.pitch = next.pitch.clamp(-FRAC_PI_2, FRAC_PI_2);
        next.pitch_rate = 0.0;
    }
    let own = Point3::from_heading(next.yaw, next.pitch) * spec.max_speed;
    next.acceleration = (own - agent.own_velocity) * (1.0 / dt);
    next.own_velocity = own;
    next.velocity = own + wind;
    next.position = agent.position + next.velocity * dt;
    if next.position.z < 0.0 {
        next.position.z = 0.0;
    }
    next
}

/// Action that turns `agent` toward `direction` as fast as its family allows.
pub fn steer_action(agent: &AgentState, direction: Point3, dt: f64) -> [f64; 2] {
    let (yaw_d, pitch_d) = direction.heading_angles();
    let spec = &agent.dynamics;
    let dyaw = wrap_pi(yaw_d - agent.yaw);
    let dpitch = pitch_d - agent.pitch;
    let clip = |x: f64| if x.is_finite() { x.clamp(-1.0, 1.0) } else { 0.0 };
    match spec.family {
        DynamicsFamily::DirectAngle => [clip(yaw_d / PI - 1.0), clip(pitch_d / FRAC_PI_2)],
        DynamicsFamily::MissileRate => {
            let step = spec.max_turn_rate * dt;
            [clip(dyaw / step), clip(dpitch / step)]
        }
        DynamicsFamily::AngleAcceleration => {
            // Rate that can still be braked to zero before reaching the target angle.
            let wanted = |err: f64| {
                let brake = (2.0 * spec.max_turn_accel * err.abs()).sqrt();
                err.signum() * spec.max_turn_rate.min(brake).min(err.abs() / dt)
            };
            let step = spec.max_turn_accel * dt;
            [clip((wanted(dyaw) - agent.yaw_rate) / step), clip((wanted(dpitch) - agent.pitch_rate) / step)]
        }
    }
}

/// Heading that makes `own + wind` point along `direction` when the wind is the deterministic
/// field of `model` (drag included). Falls back to `direction` when the wind is too strong.
pub fn wind_compensated_heading(agent: &AgentState, model: &WindModel, direction: Point3) -> Point3 {
    let Some(u) = direction.normalized() else {
        return agent.heading();
    };
    let speed = agent.dynamics.max_speed * (1.0 - model.drag_coefficient);
    if speed <= 0.0 {
        return u;
    }
    // own·(1 − drag) + shear term = λ·u with |own| = max_speed.
    let c = model.base_direction * (model.shear_coefficient * agent.position.z);
    let uc = u.dot(c);
    let disc = uc * uc - c.norm_squared() + speed * speed;
    if disc < 0.0 {
        return u;
    }
    let lambda = uc + disc.sqrt();
    (u * lambda - c).normalized().unwrap_or(u)
}
