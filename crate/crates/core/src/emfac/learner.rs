use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::attention::refine_attention_with;
use super::{Batch, EmfacError, Paradigm, TrainConfig, Variant};
use crate::engine::{DynamicsFamily, GameConfig, NUM_TYPES, STATE_OTHER_DIM};
use crate::neural::{adam_step, huber_masked, mse_masked, soft_update, AdamState, Checkpoint, Gradients, Mlp, OutputActivation};

/// Offset of the teammate blocks inside an observation.
const OBS_OTHER_OFFSET: usize = 9;

/// Everything a critic consumes besides the agent's own action, for one agent over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticInputs {
    /// Weights on the teammate blocks of the critic view, `B × (n−1)`.
    pub state_weights: Array2<f64>,
    /// Weights on the teammates inside the mean-field sum, `B × (n−1)`.
    pub action_weights: Array2<f64>,
    /// Critic view with its teammate blocks scaled by `state_weights`.
    pub weighted_view: Array2<f64>,
    pub mean_field: Array2<f64>,
    /// Living teammates per row.
    pub neighbors: Vec<f64>,
}

/// What the critic pathway of a learner actually computed on one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub variant: Variant,
    /// Every teammate block entered the critic unscaled.
    pub state_weights_all_one: bool,
    /// Every living teammate got weight `1/N_i` in the mean field.
    pub action_weights_uniform: bool,
    /// The action representations fed to the mean field were the raw actions.
    pub raw_actions: bool,
    pub mean_field_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationGradients {
    pub encoder: Option<Gradients>,
    pub state_decoder: Option<Gradients>,
    pub attention: Option<Gradients>,
    pub reward_decoder: Option<Gradients>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Optimizers {
    encoder: AdamState,
    state_decoder: AdamState,
    attention: AdamState,
    reward_decoder: AdamState,
    actors: Vec<AdamState>,
    critics: Vec<AdamState>,
}

/// Networks and optimizer state for `n` defenders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub config: TrainConfig,
    pub n: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    /// High-level action encoder `E_a`.
    pub encoder: Mlp,
    /// Next-view predictor `D_s`.
    pub state_decoder: Mlp,
    /// Teammate logits `f_att`.
    pub attention: Mlp,
    /// Reward predictor `D_R`.
    pub reward_decoder: Mlp,
    pub actors: Vec<Mlp>,
    pub actor_targets: Vec<Mlp>,
    pub critics: Vec<Mlp>,
    pub critic_targets: Vec<Mlp>,
    pub frozen: bool,
    pub critic_updates: u64,
    opt: Optimizers,
}

fn hstack(parts: &[ArrayView2<f64>]) -> Array2<f64> {
    concatenate(Axis(1), parts).expect("equal row counts")
}

fn vstack(parts: &[ArrayView2<f64>]) -> Array2<f64> {
    concatenate(Axis(0), parts).expect("equal widths")
}

fn column(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column")
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(game: &GameConfig, config: &TrainConfig, rng: &mut R) -> Result<Self, EmfacError> {
        game.validate()?;
        config.validate()?;
        let n = game.n_defenders;
        let (obs_dim, state_dim) = (game.obs_dim(), game.state_dim());
        let h = config.high_action_dim;
        let layers = |input: usize, output: usize| -> Vec<usize> {
            let mut d = vec![input];
            d.extend_from_slice(&config.hidden);
            d.push(output);
            d
        };
        let observation_view = config.paradigm == Paradigm::Dtde || config.variant == Variant::Independent;
        let view_dim = if observation_view { obs_dim } else { state_dim };
        let encoder = Mlp::new(&layers(2 + NUM_TYPES, h), OutputActivation::Tanh, rng);
        let state_decoder = Mlp::new(&layers(h + view_dim, view_dim), OutputActivation::Identity, rng);
        let attention = Mlp::new(&layers(view_dim, n - 1), OutputActivation::Identity, rng);
        let reward_decoder = Mlp::new(&layers(view_dim + 2, 1), OutputActivation::Identity, rng);
        let mut me = Learner {
            config: config.clone(),
            n,
            obs_dim,
            state_dim,
            opt: Optimizers {
                encoder: AdamState::new(&encoder, config.representation_lr),
                state_decoder: AdamState::new(&state_decoder, config.representation_lr),
                attention: AdamState::new(&attention, config.representation_lr),
                reward_decoder: AdamState::new(&reward_decoder, config.representation_lr),
                actors: Vec::new(),
                critics: Vec::new(),
            },
            encoder,
            state_decoder,
            attention,
            reward_decoder,
            actors: Vec::new(),
            actor_targets: Vec::new(),
            critics: Vec::new(),
            critic_targets: Vec::new(),
            frozen: false,
            critic_updates: 0,
        };
        let critic_in = me.critic_input_dim();
        for _ in 0..n {
            let actor = Mlp::new(&layers(obs_dim, 2), OutputActivation::Tanh, rng);
            let critic = Mlp::new(&layers(critic_in, 1), OutputActivation::Identity, rng);
            me.opt.actors.push(AdamState::new(&actor, config.actor_lr));
            me.opt.critics.push(AdamState::new(&critic, config.critic_lr));
            me.actor_targets.push(actor.clone());
            me.critic_targets.push(critic.clone());
            me.actors.push(actor);
            me.critics.push(critic);
        }
        Ok(me)
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    fn uses_observation_view(&self) -> bool {
        self.config.paradigm == Paradigm::Dtde || self.variant() == Variant::Independent
    }

    pub fn view_dim(&self) -> usize {
        if self.uses_observation_view() {
            self.obs_dim
        } else {
            self.state_dim
        }
    }

    /// Start of the teammate blocks inside the critic view.
    pub fn view_offset(&self) -> usize {
        if self.uses_observation_view() {
            OBS_OTHER_OFFSET
        } else {
            STATE_OTHER_DIM
        }
    }

    /// Width of the agent's own action as the critic sees it.
    pub fn own_action_dim(&self) -> usize {
        if self.variant().embedded() {
            self.config.high_action_dim
        } else {
            2
        }
    }

    pub fn mean_field_dim(&self) -> usize {
        match self.variant() {
            Variant::Independent => 0,
            v if v.embedded() => self.config.high_action_dim,
            _ => 2 * DynamicsFamily::ALL.len(),
        }
    }

    pub fn critic_input_dim(&self) -> usize {
        self.view_dim() + self.own_action_dim() + self.mean_field_dim()
    }

    /// Critic view of agent `i`: state or observation, now or next.
    pub fn view<'a>(&self, batch: &'a Batch, i: usize, next: bool) -> &'a Array2<f64> {
        match (self.uses_observation_view(), next) {
            (true, false) => &batch.observations[i],
            (true, true) => &batch.next_observations[i],
            (false, false) => &batch.states[i],
            (false, true) => &batch.next_states[i],
        }
    }

    fn others(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| j != i).collect()
    }

    /// `[a ⊕ onehot(type)]` rows for the encoder.
    fn encoder_input(actions: ArrayView2<f64>, onehots: ArrayView2<f64>) -> Array2<f64> {
        hstack(&[actions, onehots])
    }

    /// `E_a` applied per agent.
    pub fn encode_actions(&self, actions: &[Array2<f64>], onehots: &[Array2<f64>]) -> Vec<Array2<f64>> {
        actions
            .iter()
            .zip(onehots)
            .map(|(a, t)| self.encoder.predict(Self::encoder_input(a.view(), t.view()).view()).expect("encoder width"))
            .collect()
    }

    /// Per-agent action representation the critics consume: embeddings or raw actions.
    pub fn action_reprs(&self, actions: &[Array2<f64>], onehots: &[Array2<f64>]) -> Vec<Array2<f64>> {
        if self.variant().embedded() {
            self.encode_actions(actions, onehots)
        } else {
            actions.to_vec()
        }
    }

    /// Refined attention of agent `i` over its teammates for each row of `view`. Retired
    /// teammates are never selected.
    pub fn refined_weights(&self, view: ArrayView2<f64>, i: usize, alive: &[Vec<f64>]) -> Array2<f64> {
        let b = view.nrows();
        let m = self.n - 1;
        let mut out = Array2::zeros((b, m));
        if m == 0 {
            return out;
        }
        let logits = self.attention.predict(view).expect("attention width");
        let others = self.others(i);
        let k = self.config.attention_ratio;
        for r in 0..b {
            let row: Vec<f64> =
                (0..m).map(|s| if alive[others[s]][r] != 0.0 { logits[[r, s]] } else { f64::NEG_INFINITY }).collect();
            let w = refine_attention_with(&row, k, self.n, k > 0.0);
            for s in 0..m {
                out[[r, s]] = w.refined[s];
            }
        }
        out
    }

    /// Weighted view, weights and mean-field action of agent `i`. `reprs[j]` is the action
    /// representation of agent `j`; `alive` marks which teammates count as neighbors.
    pub fn critic_inputs(
        &self,
        view: ArrayView2<f64>,
        i: usize,
        reprs: &[Array2<f64>],
        alive: &[Vec<f64>],
        families: &[Vec<usize>],
    ) -> CriticInputs {
        let b = view.nrows();
        let m = self.n - 1;
        let v = self.variant();
        let others = self.others(i);
        let neighbors: Vec<f64> =
            (0..b).map(|r| others.iter().filter(|&&j| alive[j][r] != 0.0).count() as f64).collect();
        if !v.mean_field() {
            return CriticInputs {
                state_weights: Array2::ones((b, m)),
                action_weights: Array2::zeros((b, m)),
                weighted_view: view.to_owned(),
                mean_field: Array2::zeros((b, 0)),
                neighbors,
            };
        }
        let refined = if v.uses_attention_net() { Some(self.refined_weights(view, i, alive)) } else { None };
        let uniform =
            Array2::from_shape_fn((b, m), |(r, s)| if alive[others[s]][r] != 0.0 { 1.0 / neighbors[r] } else { 0.0 });
        let state_weights = match (&refined, v.state_attention()) {
            (Some(w), true) => w.clone(),
            _ => Array2::ones((b, m)),
        };
        let action_weights = match (refined, v.action_attention()) {
            (Some(w), true) => w,
            _ => uniform,
        };
        let off = self.view_offset();
        let mut weighted_view = view.to_owned();
        for r in 0..b {
            for s in 0..m {
                for c in 0..3 {
                    weighted_view[[r, off + 3 * s + c]] *= state_weights[[r, s]];
                }
            }
        }
        let mut mean_field = Array2::zeros((b, self.mean_field_dim()));
        let embedded = v.embedded();
        for r in 0..b {
            if neighbors[r] == 0.0 {
                continue;
            }
            for (s, &j) in others.iter().enumerate() {
                if alive[j][r] == 0.0 {
                    continue;
                }
                let w = action_weights[[r, s]] / neighbors[r];
                let base = if embedded { 0 } else { 2 * families[j][r] };
                for c in 0..reprs[j].ncols() {
                    mean_field[[r, base + c]] += w * reprs[j][[r, c]];
                }
            }
        }
        CriticInputs { state_weights, action_weights, weighted_view, mean_field, neighbors }
    }

    /// Inspects the critic inputs of every agent on `batch`.
    pub fn mechanism_report(&self, batch: &Batch) -> MechanismReport {
        let reprs = self.action_reprs(&batch.actions, &batch.type_onehots);
        let mut state_one = true;
        let mut uniform = true;
        for i in 0..self.n {
            let others = self.others(i);
            let ci = self.critic_inputs(self.view(batch, i, false).view(), i, &reprs, &batch.active, &batch.families);
            state_one &= ci.state_weights.iter().all(|&w| w == 1.0);
            for r in 0..batch.size {
                for (s, &j) in others.iter().enumerate() {
                    if batch.active[j][r] != 0.0 {
                        uniform &= ci.action_weights[[r, s]] == 1.0 / ci.neighbors[r];
                    }
                }
            }
        }
        MechanismReport {
            variant: self.variant(),
            state_weights_all_one: state_one,
            action_weights_uniform: uniform,
            raw_actions: reprs == batch.actions,
            mean_field_dim: self.mean_field_dim(),
        }
    }

    /// `[ŝ_i ⊕ â_i ⊕ ma̅_i]`.
    pub fn critic_input(inputs: &CriticInputs, own: ArrayView2<f64>) -> Array2<f64> {
        hstack(&[inputs.weighted_view.view(), own, inputs.mean_field.view()])
    }

    /// Clipped Gaussian target-policy smoothing noise, one matrix per agent.
    pub fn sample_target_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Vec<Array2<f64>> {
        let (sigma, clip) = (self.config.policy_noise, self.config.noise_clip);
        (0..self.n)
            .map(|_| {
                Array2::from_shape_fn((rows, 2), |_| (sigma * rng.sample::<f64, _>(StandardNormal)).clamp(-clip, clip))
            })
            .collect()
    }

    /// `y_i = r_i + γ (1 − done_i) Q⁻_i(ŝ′_i, â′_i, ma̅′_i)` for every agent, with the target
    /// actions perturbed by `noise`.
    pub fn critic_targets(&self, batch: &Batch, noise: &[Array2<f64>]) -> Vec<Array1<f64>> {
        let next_actions: Vec<Array2<f64>> = (0..self.n)
            .map(|j| {
                let a = self.actor_targets[j].predict(batch.next_observations[j].view()).expect("actor width");
                (a + &noise[j]).mapv(|x| x.clamp(-1.0, 1.0))
            })
            .collect();
        let reprs = self.action_reprs(&next_actions, &batch.type_onehots);
        (0..self.n)
            .map(|i| {
                let ci =
                    self.critic_inputs(self.view(batch, i, true).view(), i, &reprs, &batch.next_active, &batch.families);
                let q = self.critic_targets[i].predict(Self::critic_input(&ci, reprs[i].view()).view()).expect("critic width");
                Array1::from_shape_fn(batch.size, |r| {
                    batch.rewards[i][r] + self.config.gamma * (1.0 - batch.dones[i][r]) * q[[r, 0]]
                })
            })
            .collect()
    }

    /// Masked mean squared TD error of critic `i` and its gradient.
    pub fn critic_gradients(&self, batch: &Batch, i: usize, target: &Array1<f64>, reprs: &[Array2<f64>]) -> (f64, Gradients) {
        let ci = self.critic_inputs(self.view(batch, i, false).view(), i, reprs, &batch.active, &batch.families);
        let x = Self::critic_input(&ci, reprs[i].view());
        let cache = self.critics[i].forward(x.view()).expect("critic width");
        let y = column(target.as_slice().expect("contiguous"));
        let (loss, g) = mse_masked(cache.output().view(), y.view(), Some(&batch.active[i]));
        let (grads, _) = self.critics[i].backward(&cache, g.view());
        (loss, grads)
    }

    /// One Adam step on every critic; returns the mean loss over agents.
    pub fn update_critic(&mut self, batch: &Batch, targets: &[Array1<f64>]) -> f64 {
        let reprs = self.action_reprs(&batch.actions, &batch.type_onehots);
        let mut total = 0.0;
        for i in 0..self.n {
            let (loss, g) = self.critic_gradients(batch, i, &targets[i], &reprs);
            adam_step(&mut self.critics[i], &g, &mut self.opt.critics[i]);
            total += loss;
        }
        self.critic_updates += 1;
        total / self.n as f64
    }

    /// Mean `Q_i(ŝ_i, E_a(π_i(o_i), t_i), ma̅_i)` over active rows and the gradient of its negation
    /// with respect to the actor parameters. Teammates keep their buffered actions.
    pub fn actor_gradients(&self, batch: &Batch, i: usize, reprs: &[Array2<f64>]) -> (f64, Gradients) {
        let ac = self.actors[i].forward(batch.observations[i].view()).expect("actor width");
        let a = ac.output();
        let enc = if self.variant().embedded() {
            Some(self.encoder.forward(Self::encoder_input(a.view(), batch.type_onehots[i].view()).view()).expect("encoder width"))
        } else {
            None
        };
        let own = enc.as_ref().map_or_else(|| a.clone(), |c| c.output().clone());
        let ci = self.critic_inputs(self.view(batch, i, false).view(), i, reprs, &batch.active, &batch.families);
        let qc = self.critics[i].forward(Self::critic_input(&ci, own.view()).view()).expect("critic width");
        let mask = &batch.active[i];
        let m: f64 = mask.iter().filter(|&&x| x != 0.0).count() as f64;
        if m == 0.0 {
            return (0.0, Gradients::zeros_like(&self.actors[i]));
        }
        let q = qc.output();
        let objective = (0..batch.size).filter(|&r| mask[r] != 0.0).map(|r| q[[r, 0]]).sum::<f64>() / m;
        let dq = Array2::from_shape_fn((batch.size, 1), |(r, _)| if mask[r] != 0.0 { -1.0 / m } else { 0.0 });
        let (_, dx) = self.critics[i].backward(&qc, dq.view());
        let off = ci.weighted_view.ncols();
        let d_own = dx.slice(s![.., off..off + self.own_action_dim()]).to_owned();
        let da = match &enc {
            Some(c) => {
                let (_, d_in) = self.encoder.backward(c, d_own.view());
                d_in.slice(s![.., 0..2]).to_owned()
            }
            None => d_own,
        };
        let (grads, _) = self.actors[i].backward(&ac, da.view());
        (objective, grads)
    }

    /// One policy-gradient step on every actor; returns the mean objective.
    pub fn update_actor(&mut self, batch: &Batch) -> f64 {
        let reprs = self.action_reprs(&batch.actions, &batch.type_onehots);
        let mut total = 0.0;
        for i in 0..self.n {
            let (obj, g) = self.actor_gradients(batch, i, &reprs);
            adam_step(&mut self.actors[i], &g, &mut self.opt.actors[i]);
            total += obj;
        }
        total / self.n as f64
    }

    pub fn soft_update_targets(&mut self) {
        for i in 0..self.n {
            soft_update(&mut self.critic_targets[i], &self.critics[i], self.config.tau_critic);
            soft_update(&mut self.actor_targets[i], &self.actors[i], self.config.tau_actor);
        }
    }

    /// Losses of the two auxiliary tasks and their gradients. `L1` trains the encoder and the
    /// state decoder through the uniform mean-field action; `L2` trains the attention net and the
    /// reward decoder through the attention-weighted view. Each is `None` when the variant does
    /// not use the corresponding network.
    pub fn representation_gradients(&self, batch: &Batch) -> (Option<f64>, Option<f64>, RepresentationGradients) {
        let (b, n) = (batch.size, self.n);
        let views: Vec<ArrayView2<f64>> = (0..n).map(|i| self.view(batch, i, false).view()).collect();
        let stacked_view = vstack(&views);
        let mask: Vec<f64> = batch.active.iter().flatten().copied().collect();
        let mut grads =
            RepresentationGradients { encoder: None, state_decoder: None, attention: None, reward_decoder: None };
        let neighbors = |i: usize, r: usize| -> Vec<usize> {
            (0..n).filter(|&j| j != i && batch.active[j][r] != 0.0).collect()
        };

        let mut l1 = None;
        if self.variant().embedded() {
            let h = self.config.high_action_dim;
            let enc_in: Vec<Array2<f64>> =
                (0..n).map(|j| Self::encoder_input(batch.actions[j].view(), batch.type_onehots[j].view())).collect();
            let enc_in = vstack(&enc_in.iter().map(|a| a.view()).collect::<Vec<_>>());
            let ec = self.encoder.forward(enc_in.view()).expect("encoder width");
            let hat = ec.output();
            let mut ds_in = Array2::zeros((n * b, h + self.view_dim()));
            ds_in.slice_mut(s![.., h..]).assign(&stacked_view);
            for i in 0..n {
                for r in 0..b {
                    let nb = neighbors(i, r);
                    for &j in &nb {
                        for c in 0..h {
                            ds_in[[i * b + r, c]] += hat[[j * b + r, c]] / nb.len() as f64;
                        }
                    }
                }
            }
            let target_views: Vec<ArrayView2<f64>> = (0..n).map(|i| self.view(batch, i, true).view()).collect();
            let target = vstack(&target_views);
            let dc = self.state_decoder.forward(ds_in.view()).expect("decoder width");
            let (loss, g) = huber_masked(dc.output().view(), target.view(), self.config.huber_delta, Some(&mask));
            let (gd, dx) = self.state_decoder.backward(&dc, g.view());
            let mut dhat = Array2::zeros((n * b, h));
            for i in 0..n {
                for r in 0..b {
                    let nb = neighbors(i, r);
                    for &j in &nb {
                        for c in 0..h {
                            dhat[[j * b + r, c]] += dx[[i * b + r, c]] / nb.len() as f64;
                        }
                    }
                }
            }
            let (ge, _) = self.encoder.backward(&ec, dhat.view());
            grads.encoder = Some(ge);
            grads.state_decoder = Some(gd);
            l1 = Some(loss);
        }

        let mut l2 = None;
        if self.variant().uses_attention_net() {
            let m = n - 1;
            let off = self.view_offset();
            let lc = self.attention.forward(stacked_view.view()).expect("attention width");
            let logits = lc.output();
            let mut w = Array2::zeros((n * b, m));
            for i in 0..n {
                let others = self.others(i);
                for r in 0..b {
                    let row = i * b + r;
                    let live: Vec<usize> = (0..m).filter(|&s| batch.active[others[s]][r] != 0.0).collect();
                    let mx = live.iter().map(|&s| logits[[row, s]]).fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = live.iter().map(|&s| (logits[[row, s]] - mx).exp()).sum();
                    for &s in &live {
                        w[[row, s]] = (logits[[row, s]] - mx).exp() / total;
                    }
                }
            }
            let mut s_hat = stacked_view.clone();
            for row in 0..n * b {
                for sl in 0..m {
                    for c in 0..3 {
                        s_hat[[row, off + 3 * sl + c]] *= w[[row, sl]];
                    }
                }
            }
            let acts: Vec<ArrayView2<f64>> = batch.actions.iter().map(|a| a.view()).collect();
            let dr_in = hstack(&[s_hat.view(), vstack(&acts).view()]);
            let rc = self.reward_decoder.forward(dr_in.view()).expect("decoder width");
            let rewards: Vec<f64> = batch.rewards.iter().flatten().copied().collect();
            let (loss, g) = mse_masked(rc.output().view(), column(&rewards).view(), Some(&mask));
            let (gr, dx) = self.reward_decoder.backward(&rc, g.view());
            let mut dlogits = Array2::zeros((n * b, m));
            for row in 0..n * b {
                let dw: Vec<f64> = (0..m)
                    .map(|sl| (0..3).map(|c| dx[[row, off + 3 * sl + c]] * stacked_view[[row, off + 3 * sl + c]]).sum())
                    .collect();
                let dot: f64 = (0..m).map(|sl| dw[sl] * w[[row, sl]]).sum();
                for sl in 0..m {
                    dlogits[[row, sl]] = w[[row, sl]] * (dw[sl] - dot);
                }
            }
            let (ga, _) = self.attention.backward(&lc, dlogits.view());
            grads.attention = Some(ga);
            grads.reward_decoder = Some(gr);
            l2 = Some(loss);
        }
        (l1, l2, grads)
    }

    /// One Adam step on the representation networks; no-op once frozen.
    pub fn train_representation(&mut self, batch: &Batch) -> (Option<f64>, Option<f64>) {
        if self.frozen {
            return (None, None);
        }
        let (l1, l2, g) = self.representation_gradients(batch);
        if let Some(g) = &g.encoder {
            adam_step(&mut self.encoder, g, &mut self.opt.encoder);
        }
        if let Some(g) = &g.state_decoder {
            adam_step(&mut self.state_decoder, g, &mut self.opt.state_decoder);
        }
        if let Some(g) = &g.attention {
            adam_step(&mut self.attention, g, &mut self.opt.attention);
        }
        if let Some(g) = &g.reward_decoder {
            adam_step(&mut self.reward_decoder, g, &mut self.opt.reward_decoder);
        }
        (l1, l2)
    }

    /// Deterministic actions for the given observations.
    pub fn act(&self, observations: &[Vec<f64>]) -> Vec<[f64; 2]> {
        observations
            .iter()
            .zip(&self.actors)
            .map(|(o, net)| {
                let y = net.predict_one(o).expect("actor width");
                [y[0], y[1]]
            })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        [&self.encoder, &self.state_decoder, &self.attention, &self.reward_decoder]
            .into_iter()
            .chain(&self.actors)
            .chain(&self.critics)
            .all(Mlp::all_finite)
    }

    /// Every sub-network under a stable name.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.insert("encoder", &self.encoder);
        ck.insert("state_decoder", &self.state_decoder);
        ck.insert("attention", &self.attention);
        ck.insert("reward_decoder", &self.reward_decoder);
        for i in 0..self.n {
            ck.insert(format!("actor_{i}"), &self.actors[i]);
            ck.insert(format!("actor_target_{i}"), &self.actor_targets[i]);
            ck.insert(format!("critic_{i}"), &self.critics[i]);
            ck.insert(format!("critic_target_{i}"), &self.critic_targets[i]);
        }
        ck
    }

    /// Rebuilds a learner from a checkpoint. Optimizer moments start from zero.
    pub fn from_checkpoint(game: &GameConfig, config: &TrainConfig, mut ck: Checkpoint) -> Result<Self, EmfacError> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut me = Learner::new(game, config, &mut rng)?;
        let check = |name: &str, net: Mlp, like: &Mlp| -> Result<Mlp, EmfacError> {
            if net.dims != like.dims {
                return Err(EmfacError::Shape(format!("network {name} has dims {:?}, expected {:?}", net.dims, like.dims)));
            }
            Ok(net)
        };
        me.encoder = check("encoder", ck.take("encoder")?, &me.encoder)?;
        me.state_decoder = check("state_decoder", ck.take("state_decoder")?, &me.state_decoder)?;
        me.attention = check("attention", ck.take("attention")?, &me.attention)?;
        me.reward_decoder = check("reward_decoder", ck.take("reward_decoder")?, &me.reward_decoder)?;
        for i in 0..me.n {
            for (name, slot) in [
                (format!("actor_{i}"), &mut me.actors[i]),
                (format!("actor_target_{i}"), &mut me.actor_targets[i]),
                (format!("critic_{i}"), &mut me.critics[i]),
                (format!("critic_target_{i}"), &mut me.critic_targets[i]),
            ] {
                let net = ck.take(&name)?;
                *slot = check(&name, net, slot)?;
            }
        }
        Ok(me)
    }
}
