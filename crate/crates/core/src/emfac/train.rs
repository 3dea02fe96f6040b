use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Batch, EmfacError, Learner, ReplayBuffer, TrainConfig, Transition};
use crate::engine::{agent_state, observe, reset, write_trace_line, GameConfig, TraceRecord, WorldState};

pub const CURVE_HEADER: &str = "step,mean_reward,success_rate,collision_rate,L1,L2,critic_loss";

/// Stream ids separating the random sources of one seed.
const LEARN_STREAM: u64 = 1;
const ENV_STREAM: u64 = 2;
const PROBE_STREAM: u64 = 3;
const EVAL_STREAM_BASE: u64 = 1 << 32;

/// Generator for stream `stream` of `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    /// Per-agent episode return, averaged over agents and episodes.
    pub mean_reward: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub captures: usize,
    pub attackers: usize,
    pub collisions: usize,
    pub pair_steps: usize,
}

/// Runs `episodes` noise-free episodes. Episode `e` is drawn from a generator that depends only
/// on `seed` and `e`, so every policy meets the same initial conditions and wind. When `trace`
/// is given every step is written to it as one JSON line.
pub fn evaluate(
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    policy: &mut dyn FnMut(&WorldState) -> Vec<[f64; 2]>,
    mut trace: Option<&mut dyn Write>,
) -> Result<EvalMetrics, EmfacError> {
    let n = game.n_defenders;
    let pairs = n * n.saturating_sub(1) / 2;
    let mut m = EvalMetrics {
        episodes,
        mean_reward: 0.0,
        success_rate: 0.0,
        collision_rate: 0.0,
        captures: 0,
        attackers: 0,
        collisions: 0,
        pair_steps: 0,
    };
    let mut reward_sum = 0.0;
    for e in 0..episodes {
        let mut rng = stream_rng(seed, EVAL_STREAM_BASE + e as u64);
        let mut world = reset(game, &mut rng)?;
        let mut returns = vec![0.0; n];
        while !world.episode_done() {
            let mut actions = policy(&world);
            for (i, a) in actions.iter_mut().enumerate() {
                if !world.defenders[i].alive {
                    *a = [0.0; 2];
                }
            }
            let res = world.step(&actions, &mut rng);
            for (ret, r) in returns.iter_mut().zip(&res.rewards) {
                *ret += r.total;
            }
            if let Some(w) = trace.as_deref_mut() {
                write_trace_line(w, &TraceRecord::new(&world, &actions, &res))?;
            }
        }
        reward_sum += returns.iter().sum::<f64>() / n as f64;
        m.captures += world.stats.captures;
        m.attackers += world.attackers.len();
        m.collisions += world.stats.collisions;
        m.pair_steps += pairs * world.stats.steps;
    }
    if episodes > 0 {
        m.mean_reward = reward_sum / episodes as f64;
        m.success_rate = m.captures as f64 / m.attackers.max(1) as f64;
        m.collision_rate = if m.pair_steps > 0 { m.collisions as f64 / m.pair_steps as f64 } else { 0.0 };
    }
    Ok(m)
}

/// Noise-free actor policy.
pub fn learner_policy(learner: &Learner) -> impl FnMut(&WorldState) -> Vec<[f64; 2]> + '_ {
    move |world| {
        let obs: Vec<Vec<f64>> = (0..world.n_defenders()).map(|i| observe(world, i)).collect();
        learner.act(&obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    /// Mean losses since the previous row; absent when nothing was trained.
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub critic_loss: Option<f64>,
}

impl CurveRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.mean_reward,
            self.success_rate,
            self.collision_rate,
            opt(self.l1),
            opt(self.l2),
            opt(self.critic_loss)
        )
    }
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> std::io::Result<()> {
    let mut text = String::from(CURVE_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.csv_line());
        text.push('\n');
    }
    std::fs::write(path, text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Mean {
    sum: f64,
    count: usize,
}

impl Mean {
    fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.count += 1;
        }
    }

    fn take(&mut self) -> Option<f64> {
        let out = (self.count > 0).then(|| self.sum / self.count as f64);
        *self = Mean::default();
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: Vec<CurveRow>,
    pub learner: Learner,
    pub episodes: usize,
}

/// Training loop state. Everything except the replay buffer serializes, so a run can be
/// suspended and resumed; a resumed run refills its buffer before updating again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    pub game: GameConfig,
    pub config: TrainConfig,
    pub learner: Learner,
    pub step: usize,
    pub episodes: usize,
    pub curve: Vec<CurveRow>,
    world: WorldState,
    env_rng: ChaCha8Rng,
    learn_rng: ChaCha8Rng,
    l1: Mean,
    l2: Mean,
    critic: Mean,
    #[serde(skip)]
    buffer: Option<ReplayBuffer>,
}

impl Trainer {
    pub fn new(game: &GameConfig, config: &TrainConfig) -> Result<Self, EmfacError> {
        let mut learn_rng = stream_rng(config.seed, LEARN_STREAM);
        let mut env_rng = stream_rng(config.seed, ENV_STREAM);
        let learner = Learner::new(game, config, &mut learn_rng)?;
        let world = reset(game, &mut env_rng)?;
        Ok(Trainer {
            game: game.clone(),
            config: config.clone(),
            learner,
            step: 0,
            episodes: 0,
            curve: Vec::new(),
            world,
            env_rng,
            learn_rng,
            l1: Mean::default(),
            l2: Mean::default(),
            critic: Mean::default(),
            buffer: None,
        })
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.as_ref().map_or(0, ReplayBuffer::len)
    }

    pub fn buffer(&mut self) -> &mut ReplayBuffer {
        let (cap, bs) = (self.config.buffer_capacity, self.config.batch_size);
        self.buffer.get_or_insert_with(|| ReplayBuffer::new(cap, bs))
    }

    pub fn save_state(&self, path: &Path) -> Result<(), EmfacError> {
        let text = serde_json::to_string(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_state(path: &Path) -> Result<Self, EmfacError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text).map_err(std::io::Error::other)?)
    }

    /// A batch drawn from the current buffer on its own RNG stream, leaving training untouched.
    pub fn probe_batch(&self, size: usize) -> Option<Batch> {
        let mut rng = stream_rng(self.config.seed, PROBE_STREAM);
        self.buffer.as_ref()?.sample(size, &mut rng)
    }

    pub fn evaluate_now(&self) -> Result<EvalMetrics, EmfacError> {
        evaluate(&self.game, self.config.eval_episodes, self.config.seed, &mut learner_policy(&self.learner), None)
    }

    fn record(&mut self) -> Result<CurveRow, EmfacError> {
        if !self.learner.all_finite() {
            return Err(EmfacError::Divergence { step: self.step, detail: "non-finite network parameters".into() });
        }
        let m = self.evaluate_now()?;
        let row = CurveRow {
            step: self.step,
            mean_reward: m.mean_reward,
            success_rate: m.success_rate,
            collision_rate: m.collision_rate,
            l1: self.l1.take(),
            l2: self.l2.take(),
            critic_loss: self.critic.take(),
        };
        self.curve.push(row.clone());
        Ok(row)
    }

    /// Advances training to `until` environment steps (capped at `total_steps`), calling
    /// `on_row` for every evaluation row. The step-0 evaluation is recorded first.
    pub fn run(&mut self, until: usize, on_row: &mut dyn FnMut(&CurveRow)) -> Result<(), EmfacError> {
        if self.curve.is_empty() {
            let row = self.record()?;
            on_row(&row);
        }
        let end = until.min(self.config.total_steps);
        while self.step < end {
            self.env_step()?;
            if self.step % self.config.eval_every == 0 || self.step == self.config.total_steps {
                let row = self.record()?;
                on_row(&row);
            }
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<TrainOutcome, EmfacError> {
        self.run(self.config.total_steps, &mut |_| {})?;
        Ok(TrainOutcome { curve: self.curve, learner: self.learner, episodes: self.episodes })
    }

    fn env_step(&mut self) -> Result<(), EmfacError> {
        self.step += 1;
        let n = self.world.n_defenders();
        let observations: Vec<Vec<f64>> = (0..n).map(|i| observe(&self.world, i)).collect();
        let states: Vec<Vec<f64>> = (0..n).map(|i| agent_state(&self.world, i)).collect();
        let active: Vec<bool> = self.world.defenders.iter().map(|d| d.alive).collect();
        let mut actions = if self.step <= self.config.warmup_steps {
            (0..n).map(|_| [self.learn_rng.random_range(-1.0..=1.0), self.learn_rng.random_range(-1.0..=1.0)]).collect()
        } else {
            let sigma = self.config.exploration_noise;
            let mut acts = self.learner.act(&observations);
            for a in &mut acts {
                for x in a.iter_mut() {
                    *x = (*x + sigma * self.learn_rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
                }
            }
            acts
        };
        for (a, &alive) in actions.iter_mut().zip(&active) {
            if !alive {
                *a = [0.0; 2];
            }
        }
        let res = self.world.step(&actions, &mut self.env_rng);
        let transition = Transition {
            states,
            observations,
            actions: actions.clone(),
            types: self.world.defenders.iter().map(|d| d.dynamics.type_id).collect(),
            rewards: res.rewards.iter().map(|r| r.total).collect(),
            next_states: (0..n).map(|i| agent_state(&self.world, i)).collect(),
            next_observations: res.observations.clone(),
            dones: res.dones.clone(),
            active,
            next_active: self.world.defenders.iter().map(|d| d.alive).collect(),
        };
        self.buffer().push(transition);
        if res.episode_done {
            self.world = reset(&self.game, &mut self.env_rng)?;
            self.episodes += 1;
        }
        if self.step > self.config.warmup_steps
            && self.buffer_len() >= self.config.batch_size
            && self.step % self.config.update_every == 0
        {
            self.update()?;
        }
        if self.step >= self.config.freeze_step() {
            self.learner.frozen = true;
        }
        Ok(())
    }

    fn update(&mut self) -> Result<(), EmfacError> {
        let bs = self.config.batch_size;
        let batch = {
            let buffer = self.buffer.as_ref().expect("buffer exists once filled");
            buffer.sample(bs, &mut self.learn_rng).expect("buffer holds a batch")
        };
        let (l1, l2) = self.learner.train_representation(&batch);
        let noise = self.learner.sample_target_noise(bs, &mut self.learn_rng);
        let targets = self.learner.critic_targets(&batch, &noise);
        let critic = self.learner.update_critic(&batch, &targets);
        if self.learner.critic_updates % self.config.policy_delay as u64 == 0 {
            self.learner.update_actor(&batch);
        }
        self.learner.soft_update_targets();
        let bad = |v: Option<f64>| v.is_some_and(|x| !x.is_finite());
        if !critic.is_finite() || bad(l1) || bad(l2) {
            return Err(EmfacError::Divergence {
                step: self.step,
                detail: format!("critic_loss={critic} L1={l1:?} L2={l2:?}"),
            });
        }
        self.l1.add(l1);
        self.l2.add(l2);
        self.critic.add(Some(critic));
        Ok(())
    }
}
