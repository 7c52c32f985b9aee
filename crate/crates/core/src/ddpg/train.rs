use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DdpgAgent, DdpgConfig, DdpgError, ObsNormalizer, Policy, ReplayBuffer};
use crate::env::{evaluate, Env, EnvError, Transition};
use crate::numfmt::f64_17;

/// Offsets separating the random streams derived from one seed.
const AGENT_STREAM: u64 = 0x5eed_a9e7;
const EVAL_STREAM: u64 = 1;

/// One progress record, written every `log_interval` finished training
/// episodes and once at the end of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Environment steps taken so far.
    pub step: usize,
    /// Training episodes finished so far.
    pub episodes: usize,
    /// Mean undiscounted return of the training episodes since the previous record.
    pub mean_return: f64,
    /// Success rate of those training episodes (with exploration noise).
    pub train_success: f64,
    /// Mean critic loss of the updates since the previous record (NaN if none).
    pub critic_loss: f64,
    /// Mean actor objective, i.e. batch mean Q(s, mu(s)) (NaN if no updates).
    pub actor_objective: f64,
    /// Greedy success rate over `eval_episodes` evaluation episodes.
    pub eval_success: f64,
    /// Mean simulated time of successful evaluation episodes (NaN if none).
    pub eval_sim_time: f64,
}

pub const LOG_HEADER: [&str; 8] = [
    "step",
    "episodes",
    "mean_return",
    "train_success",
    "critic_loss",
    "actor_objective",
    "eval_success",
    "eval_sim_time",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&LogRecord> {
        self.records.last()
    }

    /// Best greedy success rate seen over the run.
    pub fn best_eval_success(&self) -> f64 {
        self.records.iter().map(|r| r.eval_success).fold(0.0, f64::max)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_HEADER)?;
        for r in &self.records {
            let mut rec = vec![r.step.to_string(), r.episodes.to_string()];
            rec.extend(
                [r.mean_return, r.train_success, r.critic_loss, r.actor_objective, r.eval_success, r.eval_sim_time]
                    .map(f64_17),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

pub struct TrainOutput {
    pub policy: Policy,
    pub log: TrainingLog,
    /// Environment steps actually taken (less than `total_steps` on early stop).
    pub steps: usize,
}

#[derive(Default)]
struct Window {
    returns: f64,
    successes: usize,
    episodes: usize,
    critic_loss: f64,
    actor_objective: f64,
    updates: usize,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Trains a DDPG agent from scratch.
///
/// `factory(seed)` must build a fresh environment on the task; the training
/// environment uses `config.seed` and evaluation environments `config.seed + 1`.
/// The first `warmup_steps` actions are uniform over the action box; after
/// that each step takes a noisy actor action followed by one update (once the
/// buffer holds a full batch). Every run is a pure function of the config.
pub fn train<F>(mut factory: F, config: &DdpgConfig) -> Result<TrainOutput, DdpgError>
where
    F: FnMut(u64) -> Result<Env, EnvError>,
{
    config.validate()?;
    let mut env = factory(config.seed)?;
    let normalizer = ObsNormalizer::for_task(env.task());
    let bounds = env.task().action_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ AGENT_STREAM);
    let mut agent = DdpgAgent::new(config, normalizer, bounds, &mut rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut log = TrainingLog::default();

    let mut run_eval = |agent: &DdpgAgent| -> Result<(f64, f64), DdpgError> {
        let mut eval_env = factory(config.seed.wrapping_add(EVAL_STREAM))?;
        let policy = agent.policy();
        let ev = evaluate(&mut eval_env, |o| policy.greedy(o), config.eval_episodes)?;
        Ok((ev.success_rate, ev.mean_sim_time.unwrap_or(f64::NAN)))
    };

    let mut window = Window::default();
    let mut episodes = 0;
    let mut ep_return = 0.0;
    let mut obs = env.reset();
    let mut step = 0;
    while step < config.total_steps {
        step += 1;
        let action = if step <= config.warmup_steps {
            [rng.random_range(-bounds[0]..=bounds[0]), rng.random_range(-bounds[1]..=bounds[1])]
        } else {
            agent.act(&obs, config.noise_sigma, &mut rng)
        };
        let r = env.step(action)?;
        buffer.push(Transition {
            obs: obs.to_array(),
            action: r.info.applied_action,
            reward: r.reward,
            next_obs: r.obs.to_array(),
            // Running out of steps is a failure state in this MDP, so it is
            // treated as terminal for bootstrapping as well.
            done: r.done,
        });
        ep_return += r.reward;
        obs = r.obs;

        if step > config.warmup_steps && buffer.len() >= config.batch {
            let batch = buffer.sample(config.batch, &mut rng);
            let stats = agent.update(&batch);
            if let Some(what) = agent.all_finite() {
                return Err(DdpgError::Diverged { step, what });
            }
            window.critic_loss += stats.critic_loss;
            window.actor_objective += stats.actor_objective;
            window.updates += 1;
        }

        if r.done {
            episodes += 1;
            window.episodes += 1;
            window.returns += ep_return;
            window.successes += usize::from(r.info.terminal == crate::reward::Terminal::Goal);
            ep_return = 0.0;
            obs = env.reset();
            if episodes % config.log_interval == 0 {
                let record = make_record(step, episodes, &std::mem::take(&mut window), run_eval(&agent)?);
                let reached = config.target_success.is_some_and(|t| record.eval_success >= t);
                log.records.push(record);
                if reached {
                    break;
                }
            }
        }
    }
    if log.last().is_none_or(|r| r.step < step) {
        let record = make_record(step, episodes, &window, run_eval(&agent)?);
        log.records.push(record);
    }
    Ok(TrainOutput {
        policy: agent.policy(),
        log,
        steps: step,
    })
}

fn make_record(step: usize, episodes: usize, w: &Window, eval: (f64, f64)) -> LogRecord {
    LogRecord {
        step,
        episodes,
        mean_return: mean(w.returns, w.episodes),
        train_success: mean(w.successes as f64, w.episodes),
        critic_loss: mean(w.critic_loss, w.updates),
        actor_objective: mean(w.actor_objective, w.updates),
        eval_success: eval.0,
        eval_sim_time: eval.1,
    }
}
