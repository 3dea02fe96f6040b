//! Multi-agent perimeter-defense simulator.
//!
//! Defenders are driven by external actions; attackers follow a scripted equilibrium policy.
//! Every defender is matched to one attacker by [`crate::assignment`] at reset and again
//! whenever an agent is retired.

mod config;
mod dynamics;
mod observe;
mod trace;

pub use config::{GameConfig, STATE_OTHER_DIM};
pub use dynamics::{
    dynamics_table, integrate, steer_action, wind_at, wind_compensated_heading, AgentState, DynamicsFamily,
    DynamicsSpec, Role, WindModel, NUM_TYPES,
};
pub use observe::{agent_state, observe, relative_angles};
pub use trace::{write_trace_line, TraceRecord};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{build_cost_matrix, hungarian};
use crate::geometry::{solve_breach, EngagementInstance, Point3};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Capture { defender: usize, attacker: usize },
    Breach { attacker: usize },
    Collision { a: usize, b: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub steps: usize,
    pub captures: usize,
    pub breaches: usize,
    /// Defender pairs closer than `d_safe`, summed over steps.
    pub collisions: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub total: f64,
    pub task: f64,
    pub guide: f64,
    pub collide: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<RewardTerms>,
    pub dones: Vec<bool>,
    pub events: Vec<Event>,
    pub episode_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub config: GameConfig,
    pub defenders: Vec<AgentState>,
    pub attackers: Vec<AgentState>,
    pub step_index: usize,
    pub defender_done: Vec<bool>,
    /// Attacker each defender pursues.
    pub assignment: Vec<Option<usize>>,
    /// Distance from each defender to the attacker it pursued during the last step; the
    /// closest approach on a capture step.
    pub target_distance: Vec<f64>,
    pub stats: EpisodeStats,
    /// Actions supplied for defenders that were already done.
    pub ignored_actions: usize,
}

const MAX_SPAWN_TRIES: usize = 10_000;

impl WorldState {
    pub fn n_defenders(&self) -> usize {
        self.defenders.len()
    }

    pub fn wind_model(&self, agent: &AgentState) -> WindModel {
        WindModel::profile(agent.dynamics.wind_profile_id, self.config.wind_scale)
    }

    /// Distance from defender `i` to its assigned attacker, if any.
    pub fn distance_to_target(&self, i: usize) -> Option<f64> {
        self.assignment[i].map(|j| self.defenders[i].position.distance(self.attackers[j].position))
    }

    /// Recomputes the matching between living defenders and attackers.
    pub fn reassign(&mut self) {
        self.assignment = vec![None; self.defenders.len()];
        let costs = build_cost_matrix(self);
        if let Ok((perm, _)) = hungarian(&costs) {
            for (row, col) in perm.into_iter().enumerate() {
                self.assignment[costs.defenders[row]] = Some(costs.attackers[col]);
            }
        }
    }

    pub fn episode_done(&self) -> bool {
        self.stats.finished
    }
}

/// Draws a fresh episode.
pub fn reset<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> Result<WorldState, EngineError> {
    config.validate()?;
    let r = config.radius;
    let table = dynamics_table();
    let mut placed: Vec<Point3> = Vec::new();
    let mut place = |rng: &mut R, sample: &dyn Fn(&mut R) -> Point3| -> Result<Point3, EngineError> {
        for _ in 0..MAX_SPAWN_TRIES {
            let p = sample(rng);
            if placed.iter().all(|q| q.distance(p) >= config.d_safe) {
                placed.push(p);
                return Ok(p);
            }
        }
        Err(EngineError::Config("could not place agents with the requested separation".into()))
    };

    let inner = config.defender_spawn * r;
    let sample_defender = |rng: &mut R| loop {
        let p = Point3::new(rng.random_range(-inner..inner), rng.random_range(-inner..inner), rng.random_range(0.0..inner));
        if p.norm() < inner {
            return p;
        }
    };
    let (r1, r2) = (config.attacker_shell_min * r, config.attacker_shell_max * r);
    let sample_attacker = |rng: &mut R| loop {
        let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let n = p.norm();
        if n > 1e-6 && n <= 1.0 {
            let u: f64 = rng.random();
            let radius = (r1.powi(3) + u * (r2.powi(3) - r1.powi(3))).cbrt();
            return p * (radius / n);
        }
    };

    let mut defenders = Vec::with_capacity(config.n_defenders);
    for i in 0..config.n_defenders {
        let p = place(rng, &sample_defender)?;
        let (yaw, _) = p.heading_angles();
        defenders.push(AgentState::new(p, yaw, 0.0, table[i % NUM_TYPES], Role::Defender));
    }
    let mut attackers = Vec::with_capacity(config.n_attackers);
    for j in 0..config.n_attackers {
        let p = place(rng, &sample_attacker)?;
        let (yaw, pitch) = (-p).heading_angles();
        let mut spec = *table
            .iter()
            .filter(|s| s.family == DynamicsFamily::DirectAngle)
            .nth(j % 4)
            .expect("four direct-angle types");
        spec.max_speed = config.attacker_speed;
        attackers.push(AgentState::new(p, yaw, pitch, spec, Role::Attacker));
    }

    let n = config.n_defenders;
    let mut world = WorldState {
        config: config.clone(),
        defenders,
        attackers,
        step_index: 0,
        defender_done: vec![false; n],
        assignment: vec![None; n],
        target_distance: vec![0.0; n],
        stats: EpisodeStats::default(),
        ignored_actions: 0,
    };
    world.reassign();
    for i in 0..n {
        world.target_distance[i] = world.distance_to_target(i).unwrap_or(0.0);
    }
    Ok(world)
}

/// Optimal breach point an attacker heads for, and the defender it was computed against.
///
/// The threat is the living defender that leaves the attacker the smallest time margin.
pub fn attacker_target(world: &WorldState, j: usize) -> (Point3, Option<usize>) {
    let a = &world.attackers[j];
    let r = world.config.radius;
    let mut best: Option<(f64, Point3, usize)> = None;
    for (i, d) in world.defenders.iter().enumerate() {
        if !d.alive {
            continue;
        }
        let v = a.dynamics.max_speed / d.dynamics.max_speed;
        let sol = solve_breach(&EngagementInstance::unchecked(d.position, a.position, v, r));
        let margin = sol.payoff / d.dynamics.max_speed;
        if best.is_none_or(|(m, _, _)| margin < m) {
            best = Some((margin, sol.breach_world, i));
        }
    }
    match best {
        Some((_, b, i)) => (b, Some(i)),
        None => (a.position.normalized().unwrap_or(Point3::Z) * r, None),
    }
}

/// Scripted attacker: steer at the optimal breach point, compensating for the mean wind.
pub fn attacker_policy(world: &WorldState, j: usize) -> [f64; 2] {
    let a = &world.attackers[j];
    let (target, _) = attacker_target(world, j);
    let heading = wind_compensated_heading(a, &world.wind_model(a), target - a.position);
    steer_action(a, heading, world.config.dt)
}

/// Closest approach of two agents moving linearly over one step.
fn closest_approach(p0: Point3, p1: Point3, q0: Point3, q1: Point3) -> f64 {
    let d0 = p0 - q0;
    let dd = (p1 - q1) - d0;
    let len = dd.norm_squared();
    let s = if len > 0.0 { (-d0.dot(dd) / len).clamp(0.0, 1.0) } else { 0.0 };
    (d0 + dd * s).norm()
}

/// Reward split for one defender given its target distance before and after a step.
pub fn reward_terms(config: &GameConfig, d_prev: Option<f64>, d_now: Option<f64>, close_neighbors: usize) -> RewardTerms {
    let hit = d_now.is_some_and(|d| d < config.d_th);
    let task = config.alpha1 + if hit { config.alpha2 } else { 0.0 };
    let guide = match (d_prev, d_now) {
        (Some(p), Some(n)) => config.alpha3 * (p - n),
        _ => 0.0,
    };
    let collide = config.alpha4 * close_neighbors as f64;
    RewardTerms { total: task + guide + collide, task, guide, collide }
}

/// Reward of defender `i` for the step that turned `prev` into `next`.
pub fn reward(prev: &WorldState, next: &WorldState, i: usize) -> RewardTerms {
    let d_prev = prev.distance_to_target(i);
    let d_now = prev.assignment[i].map(|_| next.target_distance[i]);
    let p = next.defenders[i].position;
    let close = (0..prev.n_defenders())
        .filter(|&j| j != i && prev.defenders[j].alive && next.defenders[j].position.distance(p) < prev.config.d_safe)
        .count();
    reward_terms(&prev.config, d_prev, d_now, close)
}

impl WorldState {
    /// Advances the world by one step. `actions[i]` drives defender `i`.
    pub fn step<R: Rng + ?Sized>(&mut self, actions: &[[f64; 2]], rng: &mut R) -> StepResult {
        let n = self.n_defenders();
        assert_eq!(actions.len(), n, "one action per defender");
        let cfg = self.config.clone();
        let prev = self.clone();
        if self.stats.finished {
            self.ignored_actions += actions.iter().filter(|a| **a != [0.0, 0.0]).count();
            return self.result(vec![RewardTerms::default(); n], Vec::new());
        }

        let attacker_actions: Vec<[f64; 2]> =
            (0..self.attackers.len()).map(|j| if self.attackers[j].alive { attacker_policy(self, j) } else { [0.0; 2] }).collect();
        for i in 0..n {
            if !self.defenders[i].alive {
                if actions[i] != [0.0, 0.0] {
                    self.ignored_actions += 1;
                }
                continue;
            }
            let d = self.defenders[i];
            let w = wind_at(&d, &self.wind_model(&d), rng);
            self.defenders[i] = integrate(&d, actions[i], w, cfg.dt);
        }
        for (j, action) in attacker_actions.iter().enumerate() {
            let a = self.attackers[j];
            if !a.alive {
                continue;
            }
            let w = wind_at(&a, &self.wind_model(&a), rng);
            self.attackers[j] = integrate(&a, *action, w, cfg.dt);
        }

        let mut events = Vec::new();
        for i in 0..n {
            self.target_distance[i] = self.distance_to_target(i).unwrap_or(0.0);
        }
        // Captures: closest approach within the step, the assigned defender first.
        let mut captured_by = vec![None; n];
        for j in 0..self.attackers.len() {
            if !prev.attackers[j].alive {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if !prev.defenders[i].alive || captured_by[i].is_some() {
                    continue;
                }
                let d = closest_approach(
                    prev.defenders[i].position,
                    self.defenders[i].position,
                    prev.attackers[j].position,
                    self.attackers[j].position,
                );
                if d >= cfg.epsilon {
                    continue;
                }
                let assigned = prev.assignment[i] == Some(j);
                let better = match best {
                    None => true,
                    Some((k, dk)) => {
                        let k_assigned = prev.assignment[k] == Some(j);
                        (assigned && !k_assigned) || (assigned == k_assigned && d < dk)
                    }
                };
                if better {
                    best = Some((i, d));
                }
            }
            if let Some((i, d)) = best {
                captured_by[i] = Some(j);
                if prev.assignment[i] == Some(j) {
                    self.target_distance[i] = d;
                }
                self.attackers[j].alive = false;
                self.defenders[i].alive = false;
                self.defender_done[i] = true;
                self.stats.captures += 1;
                events.push(Event::Capture { defender: i, attacker: j });
            }
        }
        // Breaches retire the attacker and the defender assigned to it.
        for j in 0..self.attackers.len() {
            let a = &self.attackers[j];
            if a.alive && a.position.norm() <= cfg.radius + cfg.delta {
                self.attackers[j].alive = false;
                self.stats.breaches += 1;
                events.push(Event::Breach { attacker: j });
                if let Some(i) = (0..n).find(|&i| prev.assignment[i] == Some(j) && self.defenders[i].alive) {
                    self.defenders[i].alive = false;
                    self.defender_done[i] = true;
                }
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                if prev.defenders[a].alive
                    && prev.defenders[b].alive
                    && self.defenders[a].position.distance(self.defenders[b].position) < cfg.d_safe
                {
                    self.stats.collisions += 1;
                    events.push(Event::Collision { a, b });
                }
            }
        }

        let rewards: Vec<RewardTerms> =
            (0..n).map(|i| if prev.defenders[i].alive { reward(&prev, self, i) } else { RewardTerms::default() }).collect();

        self.step_index += 1;
        self.stats.steps = self.step_index;
        let any_died = (0..n).any(|i| prev.defenders[i].alive != self.defenders[i].alive)
            || (0..self.attackers.len()).any(|j| prev.attackers[j].alive != self.attackers[j].alive);
        if any_died {
            self.reassign();
        }
        let attackers_left = self.attackers.iter().any(|a| a.alive);
        if self.step_index >= cfg.horizon || !attackers_left {
            self.stats.finished = true;
            for i in 0..n {
                self.defender_done[i] = true;
            }
        }
        self.result(rewards, events)
    }

    fn result(&self, rewards: Vec<RewardTerms>, events: Vec<Event>) -> StepResult {
        StepResult {
            observations: (0..self.n_defenders()).map(|i| observe(self, i)).collect(),
            rewards,
            dones: self.defender_done.clone(),
            events,
            episode_done: self.stats.finished,
        }
    }

    /// Fraction of attackers intercepted so far.
    pub fn success_rate(&self) -> f64 {
        self.stats.captures as f64 / self.attackers.len() as f64
    }

    /// Close defender pairs per step and pair.
    pub fn collision_rate(&self) -> f64 {
        let n = self.n_defenders();
        let pairs = n * n.saturating_sub(1) / 2;
        if pairs == 0 || self.stats.steps == 0 {
            return 0.0;
        }
        self.stats.collisions as f64 / (pairs * self.stats.steps) as f64
    }
}

#[cfg(test)]
mod tests;
