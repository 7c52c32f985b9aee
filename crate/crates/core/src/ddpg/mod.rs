//! Deep deterministic policy gradient: actor/critic networks, replay buffer,
//! soft target updates and the training loop.

mod adam;
mod checkpoint;
mod mlp;
mod replay;
mod train;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Observation, TaskSpec, Transition, ACTION_DIM, OBS_DIM};

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{soft_update, Dense, ForwardCache, Mlp, MlpGrads, OutputActivation};
pub use replay::ReplayBuffer;
pub use train::{train, LogRecord, TrainOutput, TrainingLog};

#[derive(Debug, Error)]
pub enum DdpgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: non-finite {what} parameters")]
    Diverged { step: usize, what: &'static str },
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub gamma: f64,
    /// Soft target-update coefficient.
    pub tau: f64,
    /// Learning rate for both actor and critic.
    pub lr: f64,
    pub batch: usize,
    /// Exploration noise std-dev as a fraction of each action bound.
    pub noise_sigma: f64,
    /// Uniform-random steps before learning starts.
    pub warmup_steps: usize,
    pub total_steps: usize,
    /// Gradient updates between soft target updates.
    pub update_interval: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Greedy episodes per evaluation.
    pub eval_episodes: usize,
    /// Training episodes between log records (each record runs an evaluation).
    pub log_interval: usize,
    /// Stop early once a greedy evaluation reaches this success rate.
    pub target_success: Option<f64>,
    pub seed: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 1e-4,
            batch: 100,
            noise_sigma: 0.1,
            warmup_steps: 2000,
            total_steps: 100_000,
            update_interval: 1,
            buffer_capacity: 1_000_000,
            hidden: vec![64, 64],
            eval_episodes: 10,
            log_interval: 50,
            target_success: None,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), DdpgError> {
        let bad = |m: String| Err(DdpgError::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch == 0 || self.batch > self.buffer_capacity {
            return bad(format!("batch must lie in 1..=buffer_capacity, got {}", self.batch));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0".into());
        }
        if self.update_interval == 0 || self.eval_episodes == 0 || self.log_interval == 0 {
            return bad("update_interval, eval_episodes and log_interval must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        Ok(())
    }
}

/// Observation scaling: positions by the graph's bounding-box diagonal,
/// velocities by the largest per-step speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsNormalizer {
    pub position_scale: f64,
    pub velocity_scale: f64,
}

impl ObsNormalizer {
    pub fn for_task(task: &TaskSpec) -> Self {
        Self {
            position_scale: task.graph.bounding_diagonal().max(1e-9),
            velocity_scale: task.wire.max_step_translation / task.wire.step_period,
        }
    }

    pub fn apply(&self, obs: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut out = *obs;
        for v in &mut out[..3] {
            *v /= self.position_scale;
        }
        for v in &mut out[3..] {
            *v /= self.velocity_scale;
        }
        out
    }
}

/// A trained deterministic policy: actor network plus the constants needed to
/// run it on raw observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub normalizer: ObsNormalizer,
    pub bounds: [f64; ACTION_DIM],
}

impl Policy {
    pub fn greedy(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        greedy_action(&self.actor, &self.normalizer, self.bounds, obs)
    }
}

fn greedy_action(actor: &Mlp, normalizer: &ObsNormalizer, bounds: [f64; ACTION_DIM], obs: &Observation) -> [f64; ACTION_DIM] {
    let x = normalizer.apply(&obs.to_array());
    let y = actor.forward_batch(&x, 1);
    let out = y.output();
    [out[0].clamp(-bounds[0], bounds[0]), out[1].clamp(-bounds[1], bounds[1])]
}

fn add_noise<R: Rng + ?Sized>(a: &mut [f64; ACTION_DIM], bounds: [f64; ACTION_DIM], noise_sigma: f64, rng: &mut R) {
    if noise_sigma > 0.0 {
        for (v, b) in a.iter_mut().zip(bounds) {
            let eps: f64 = rng.sample(StandardNormal);
            *v = (*v + noise_sigma * b * eps).clamp(-b, b);
        }
    }
}

/// Deterministic actor output plus Gaussian exploration noise scaled by each
/// bound, clipped to the bounds.
pub fn act<R: Rng + ?Sized>(policy: &Policy, obs: &Observation, noise_sigma: f64, rng: &mut R) -> [f64; ACTION_DIM] {
    let mut a = policy.greedy(obs);
    add_noise(&mut a, policy.bounds, noise_sigma, rng);
    a
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Actor, critic, their targets and optimizers.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub normalizer: ObsNormalizer,
    pub bounds: [f64; ACTION_DIM],
    gamma: f64,
    tau: f64,
    update_interval: usize,
    updates: usize,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(config: &DdpgConfig, normalizer: ObsNormalizer, bounds: [f64; ACTION_DIM], rng: &mut R) -> Self {
        let mut actor_sizes = vec![OBS_DIM];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(ACTION_DIM);
        let mut critic_sizes = vec![OBS_DIM + ACTION_DIM];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::init(&actor_sizes, OutputActivation::Tanh, 3e-3, rng).with_output_scale(bounds.to_vec());
        let critic = Mlp::init(&critic_sizes, OutputActivation::Identity, 3e-3, rng);
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: Adam::new(&actor, config.lr),
            critic_opt: Adam::new(&critic, config.lr),
            actor,
            critic,
            normalizer,
            bounds,
            gamma: config.gamma,
            tau: config.tau,
            update_interval: config.update_interval,
            updates: 0,
        }
    }

    /// Exploratory action from the online actor; see [`act`].
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, noise_sigma: f64, rng: &mut R) -> [f64; ACTION_DIM] {
        let mut a = greedy_action(&self.actor, &self.normalizer, self.bounds, obs);
        add_noise(&mut a, self.bounds, noise_sigma, rng);
        a
    }

    pub fn policy(&self) -> Policy {
        Policy {
            actor: self.actor.clone(),
            normalizer: self.normalizer,
            bounds: self.bounds,
        }
    }

    /// Critic input rows `[normalized obs, action / bounds]`.
    fn critic_input(&self, obs: &[[f64; OBS_DIM]], actions: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(obs.len() * (OBS_DIM + ACTION_DIM));
        for (o, a) in obs.iter().zip(actions.chunks_exact(ACTION_DIM)) {
            x.extend_from_slice(&self.normalizer.apply(o));
            x.extend(a.iter().zip(self.bounds).map(|(a, b)| a / b));
        }
        x
    }

    fn normalized_obs(&self, obs: &[[f64; OBS_DIM]]) -> Vec<f64> {
        obs.iter().flat_map(|o| self.normalizer.apply(o)).collect()
    }

    /// TD targets `r + gamma * (1 - done) * Q'(s', mu'(s'))`.
    pub fn td_targets(&self, batch: &[Transition]) -> Vec<f64> {
        let next: Vec<[f64; OBS_DIM]> = batch.iter().map(|t| t.next_obs).collect();
        let mu_next = self.actor_target.forward_batch(&self.normalized_obs(&next), batch.len());
        let q_next = self
            .critic_target
            .forward_batch(&self.critic_input(&next, mu_next.output()), batch.len());
        batch
            .iter()
            .zip(q_next.output())
            .map(|(t, q)| {
                let cont = if t.done { 0.0 } else { 1.0 };
                t.reward + self.gamma * cont * q
            })
            .collect()
    }

    /// Mean squared TD error of the online critic on `batch`.
    pub fn critic_loss(&self, batch: &[Transition]) -> f64 {
        let y = self.td_targets(batch);
        let obs: Vec<[f64; OBS_DIM]> = batch.iter().map(|t| t.obs).collect();
        let actions: Vec<f64> = batch.iter().flat_map(|t| t.action).collect();
        let q = self.critic.forward_batch(&self.critic_input(&obs, &actions), batch.len());
        q.output().iter().zip(&y).map(|(q, y)| (q - y) * (q - y)).sum::<f64>() / batch.len() as f64
    }

    /// One critic step, one actor step, then (every `update_interval`
    /// updates) soft target updates.
    pub fn update(&mut self, batch: &[Transition]) -> UpdateStats {
        let n = batch.len();
        let inv_n = 1.0 / n as f64;

        // Critic.
        let y = self.td_targets(batch);
        let obs: Vec<[f64; OBS_DIM]> = batch.iter().map(|t| t.obs).collect();
        let actions: Vec<f64> = batch.iter().flat_map(|t| t.action).collect();
        let cache = self.critic.forward_batch(&self.critic_input(&obs, &actions), n);
        let mut critic_loss = 0.0;
        let d_q: Vec<f64> = cache
            .output()
            .iter()
            .zip(&y)
            .map(|(q, y)| {
                critic_loss += (q - y) * (q - y);
                2.0 * (q - y) * inv_n
            })
            .collect();
        critic_loss *= inv_n;
        let (grads, _) = self.critic.backward(&cache, &d_q, true);
        self.critic_opt.step(&mut self.critic, &grads.expect("requested"));

        // Actor: ascend mean Q(s, mu(s)).
        let actor_cache = self.actor.forward_batch(&self.normalized_obs(&obs), n);
        let q_cache = self
            .critic
            .forward_batch(&self.critic_input(&obs, actor_cache.output()), n);
        let actor_objective = q_cache.output().iter().sum::<f64>() * inv_n;
        let (_, d_in) = self.critic.backward(&q_cache, &vec![-inv_n; n], false);
        let d_mu: Vec<f64> = d_in
            .chunks_exact(OBS_DIM + ACTION_DIM)
            .flat_map(|row| row[OBS_DIM..].iter().zip(self.bounds).map(|(g, b)| g / b))
            .collect();
        let (grads, _) = self.actor.backward(&actor_cache, &d_mu, true);
        self.actor_opt.step(&mut self.actor, &grads.expect("requested"));

        self.updates += 1;
        if self.updates.is_multiple_of(self.update_interval) {
            soft_update(&mut self.critic_target, &self.critic, self.tau).expect("same shapes");
            soft_update(&mut self.actor_target, &self.actor, self.tau).expect("same shapes");
        }
        UpdateStats {
            critic_loss,
            actor_objective,
        }
    }

    pub fn all_finite(&self) -> Option<&'static str> {
        if !self.actor.all_finite() {
            Some("actor")
        } else if !self.critic.all_finite() {
            Some("critic")
        } else {
            None
        }
    }
}
