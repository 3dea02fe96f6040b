//! Embedded mean-field actor-critic.
//!
//! Heterogeneous raw actions are mapped into a shared high-level action space by an encoder that
//! is trained through next-state prediction. An attention network trained through reward
//! prediction picks the teammates that enter each critic, both in the state and in the
//! mean-field action.

mod attention;
mod buffer;
mod learner;
mod train;

pub use attention::{attended_count, mean_field_action, refine_attention, refine_attention_with, weighted_state, AttentionWeights};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use learner::{CriticInputs, Learner, MechanismReport, RepresentationGradients};
pub use train::{
    evaluate, learner_policy, write_curve_csv, CurveRow, EvalMetrics, TrainOutcome, Trainer, CURVE_HEADER,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::neural::NeuralError;

#[derive(Debug, Error)]
pub enum EmfacError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which critic pathway a learner uses. The first five are the ablation grid; the last two are
/// learning baselines built on the same loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoAttS,
    NoAttA,
    NoAttAs,
    NoEmf,
    /// Raw per-family mean field without attention.
    MeanField,
    /// Critic on the agent's own observation and action only.
    Independent,
}

impl Variant {
    pub const ABLATIONS: [Variant; 5] = [Variant::Full, Variant::NoAttS, Variant::NoAttA, Variant::NoAttAs, Variant::NoEmf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAttS => "no-att-s",
            Variant::NoAttA => "no-att-a",
            Variant::NoAttAs => "no-att-as",
            Variant::NoEmf => "no-emf",
            Variant::MeanField => "mean-field",
            Variant::Independent => "independent",
        }
    }

    /// Teammate state blocks are scaled by refined attention.
    pub fn state_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAttA | Variant::NoEmf)
    }

    /// Mean-field action uses refined attention instead of uniform weights.
    pub fn action_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAttS | Variant::NoEmf)
    }

    /// Actions pass through the high-level encoder.
    pub fn embedded(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAttS | Variant::NoAttA | Variant::NoAttAs)
    }

    pub fn mean_field(self) -> bool {
        self != Variant::Independent
    }

    pub fn uses_attention_net(self) -> bool {
        self.state_attention() || self.action_attention()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    /// Critics see the agent state; actors see observations.
    Ctde,
    /// Critics see observations too.
    Dtde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub representation_lr: f64,
    /// Attention ratio k.
    pub attention_ratio: f64,
    pub high_action_dim: usize,
    pub hidden: Vec<usize>,
    pub exploration_noise: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub tau_critic: f64,
    pub tau_actor: f64,
    /// Step after which the encoder and attention nets stop training; 20% of `total_steps` when
    /// unset.
    pub freeze_step: Option<usize>,
    pub total_steps: usize,
    /// Uniformly random actions before this step.
    pub warmup_steps: usize,
    /// Environment steps between gradient iterations.
    pub update_every: usize,
    /// Critic iterations per actor iteration.
    pub policy_delay: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub huber_delta: f64,
    pub seed: u64,
    pub variant: Variant,
    pub paradigm: Paradigm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            critic_lr: 1e-3,
            actor_lr: 5e-4,
            representation_lr: 1e-3,
            attention_ratio: 0.3,
            high_action_dim: 4,
            hidden: vec![128, 128],
            exploration_noise: 0.1,
            policy_noise: 0.2,
            noise_clip: 0.5,
            tau_critic: 0.005,
            tau_actor: 0.005,
            freeze_step: None,
            total_steps: 100_000,
            warmup_steps: 5_000,
            update_every: 1,
            policy_delay: 1,
            batch_size: 256,
            buffer_capacity: 100_000,
            eval_every: 5_000,
            eval_episodes: 10,
            huber_delta: 1.0,
            seed: 0,
            variant: Variant::Full,
            paradigm: Paradigm::Ctde,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmfacError> {
        let err = |field: &str, why: &str| Err(EmfacError::Config(format!("{field}: {why}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.attention_ratio) {
            return err("attention_ratio", "must lie in [0, 1]");
        }
        for (name, v) in [
            ("critic_lr", self.critic_lr),
            ("actor_lr", self.actor_lr),
            ("representation_lr", self.representation_lr),
            ("exploration_noise", self.exploration_noise),
            ("policy_noise", self.policy_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(name, "must be finite and non-negative");
            }
        }
        for (name, v) in [("tau_critic", self.tau_critic), ("tau_actor", self.tau_actor)] {
            if !(0.0..=1.0).contains(&v) {
                return err(name, "must lie in [0, 1]");
            }
        }
        if !(self.huber_delta > 0.0) {
            return err("huber_delta", "must be positive");
        }
        if self.high_action_dim == 0 {
            return err("high_action_dim", "must be positive");
        }
        if self.hidden.contains(&0) {
            return err("hidden", "layer widths must be positive");
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("update_every", self.update_every),
            ("policy_delay", self.policy_delay),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return err(name, "must be positive");
            }
        }
        if self.buffer_capacity < self.batch_size {
            return err("buffer_capacity", "must be at least batch_size");
        }
        Ok(())
    }

    pub fn freeze_step(&self) -> usize {
        self.freeze_step.unwrap_or(self.total_steps / 5)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EmfacError> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| EmfacError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
