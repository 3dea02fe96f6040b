//! Comparison policies: a scripted breach-point chaser and two learning baselines that reuse the
//! EMFAC loop with the mean-field and attention pathways swapped out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emfac::{EmfacError, TrainConfig, TrainOutcome, Trainer, Variant};
use crate::engine::{steer_action, wind_compensated_heading, GameConfig, WorldState};
use crate::geometry::{solve_breach, EngagementInstance, Point3};

/// Teammates closer than this multiple of `d_safe` trigger an evasive heading.
pub const AVOID_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    RuleBased,
    IndependentAc,
    PlainMeanField,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::RuleBased, BaselineKind::IndependentAc, BaselineKind::PlainMeanField];

    /// Learner variant behind a learning baseline.
    pub fn variant(self) -> Option<Variant> {
        match self {
            BaselineKind::RuleBased => None,
            BaselineKind::IndependentAc => Some(Variant::Independent),
            BaselineKind::PlainMeanField => Some(Variant::MeanField),
        }
    }
}

/// Optimal breach point of the attacker assigned to defender `i`, solved against that defender.
pub fn assigned_breach_point(world: &WorldState, i: usize) -> Option<Point3> {
    let d = &world.defenders[i];
    let j = world.assignment[i].filter(|&j| world.attackers[j].alive)?;
    let a = &world.attackers[j];
    let v = a.dynamics.max_speed / d.dynamics.max_speed;
    Some(solve_breach(&EngagementInstance::unchecked(d.position, a.position, v, world.config.radius)).breach_world)
}

/// Scripted defender: head for the assigned breach point at full speed. When a teammate is
/// within `AVOID_FACTOR · d_safe` the heading is replaced by a random direction perpendicular to
/// it for that step.
#[derive(Debug, Clone)]
pub struct RulePolicy {
    rng: ChaCha8Rng,
    /// Correct the heading for the mean wind like the attackers do. Off for the baseline.
    pub compensate_wind: bool,
}

impl RulePolicy {
    pub fn new(seed: u64) -> Self {
        RulePolicy { rng: ChaCha8Rng::seed_from_u64(seed), compensate_wind: false }
    }

    pub fn action(&mut self, world: &WorldState, i: usize) -> [f64; 2] {
        rule_based_policy(world, i, self.compensate_wind, &mut self.rng)
    }

    pub fn actions(&mut self, world: &WorldState) -> Vec<[f64; 2]> {
        (0..world.n_defenders()).map(|i| self.action(world, i)).collect()
    }
}

pub fn rule_based_policy<R: Rng + ?Sized>(world: &WorldState, i: usize, compensate_wind: bool, rng: &mut R) -> [f64; 2] {
    let d = &world.defenders[i];
    let dt = world.config.dt;
    if !d.alive {
        return [0.0; 2];
    }
    let Some(b) = assigned_breach_point(world, i) else {
        return steer_action(d, d.heading(), dt);
    };
    let mut dir = b - d.position;
    let crowded = world.defenders.iter().enumerate().any(|(j, o)| {
        j != i && o.alive && o.position.distance(d.position) < AVOID_FACTOR * world.config.d_safe
    });
    if crowded {
        dir = random_perpendicular(dir, rng);
    } else if compensate_wind {
        dir = wind_compensated_heading(d, &world.wind_model(d), dir);
    }
    steer_action(d, dir, dt)
}

fn random_perpendicular<R: Rng + ?Sized>(dir: Point3, rng: &mut R) -> Point3 {
    let u = dir.normalized().unwrap_or(Point3::X);
    let helper = if u.z.abs() < 0.9 { Point3::Z } else { Point3::X };
    let e1 = u.cross(helper).normalized().expect("helper is not parallel");
    let e2 = u.cross(e1);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    e1 * phi.cos() + e2 * phi.sin()
}

/// Per-agent actor-critic on raw observations and actions.
pub fn independent_ac(game: &GameConfig, config: &TrainConfig) -> Result<TrainOutcome, EmfacError> {
    Trainer::new(game, &TrainConfig { variant: Variant::Independent, ..config.clone() })?.run_to_end()
}

/// Actor-critic with a raw per-family mean-field action and no attention.
pub fn plain_mean_field(game: &GameConfig, config: &TrainConfig) -> Result<TrainOutcome, EmfacError> {
    Trainer::new(game, &TrainConfig { variant: Variant::MeanField, ..config.clone() })?.run_to_end()
}
