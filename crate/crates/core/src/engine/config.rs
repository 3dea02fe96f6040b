use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;

/// Everything that defines a multi-agent episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub n_defenders: usize,
    pub n_attackers: usize,
    pub radius: f64,
    /// Capture radius.
    pub epsilon: f64,
    /// Breach tolerance around the dome.
    pub delta: f64,
    pub d_safe: f64,
    /// Interception threshold of the task reward.
    pub d_th: f64,
    pub dt: f64,
    pub horizon: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub seed: u64,
    pub attacker_speed: f64,
    /// Multiplies every wind coefficient; 0 turns the wind off.
    pub wind_scale: f64,
    /// Defenders spawn with `‖p‖ < defender_spawn · R`.
    pub defender_spawn: f64,
    pub attacker_shell_min: f64,
    pub attacker_shell_max: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            n_defenders: 3,
            n_attackers: 3,
            radius: 1.0,
            epsilon: 0.1,
            delta: 0.02,
            d_safe: 0.1,
            d_th: 0.1,
            dt: 0.05,
            horizon: 200,
            alpha1: -0.01,
            alpha2: 10.0,
            alpha3: 10.0,
            alpha4: -0.03,
            seed: 0,
            attacker_speed: 0.8,
            wind_scale: 1.0,
            defender_spawn: 0.9,
            attacker_shell_min: 1.2,
            attacker_shell_max: 2.5,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |field: &str, why: &str| Err(EngineError::Config(format!("{field}: {why}")));
        let r = self.radius;
        if !(r.is_finite() && r > 0.0) {
            return bad("radius", "must be positive");
        }
        if self.n_defenders == 0 {
            return bad("n_defenders", "must be at least 1");
        }
        if self.n_attackers != self.n_defenders {
            return bad("n_attackers", "must equal n_defenders");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.2 * r) {
            return bad("epsilon", "must lie in (0, 0.2 R)");
        }
        if !(self.delta > 0.0) {
            return bad("delta", "must be positive");
        }
        if !(self.d_safe >= 0.0) {
            return bad("d_safe", "must be non-negative");
        }
        if !(self.d_th > 0.0) {
            return bad("d_th", "must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1");
        }
        if !(self.attacker_speed > 0.0 && self.attacker_speed.is_finite()) {
            return bad("attacker_speed", "must be positive");
        }
        if !(self.wind_scale >= 0.0 && self.wind_scale.is_finite()) {
            return bad("wind_scale", "must be non-negative");
        }
        if !(self.defender_spawn > 0.0 && self.defender_spawn < 1.0) {
            return bad("defender_spawn", "must lie in (0, 1)");
        }
        if !(self.attacker_shell_min > 1.0 && self.attacker_shell_max >= self.attacker_shell_min) {
            return bad("attacker_shell_min", "shell must satisfy 1 < min <= max");
        }
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("alpha3", self.alpha3), ("alpha4", self.alpha4)] {
            if !v.is_finite() {
                return bad(name, "must be finite");
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let cfg: GameConfig = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Length of each defender observation.
    pub fn obs_dim(&self) -> usize {
        9 + 3 * (self.n_defenders - 1) + 3
    }

    /// Length of each per-defender critic state.
    pub fn state_dim(&self) -> usize {
        STATE_OTHER_DIM + 3 * (self.n_defenders - 1)
    }
}

/// Agent-independent part of the critic state: self block, target block, attacker kinematics.
pub const STATE_OTHER_DIM: usize = 18;
