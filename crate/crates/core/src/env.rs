//! Episodic navigation environment: reset/step over a vessel graph with the
//! guidewire kinematics and distance reward, plus rollout and evaluation
//! helpers and the per-step trajectory log.

use std::fmt;
use std::io;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::guidewire::{reset_wire, step_wire, GuidewireConfig, GuidewireState, WireError, WireEvent};
use crate::numfmt::f64_17;
use crate::reward::{compute_reward, RewardConfig, RewardError, StepOutcome, Terminal};
use crate::vesselgraph::{geodesic_from, GeodesicField, GraphError, VesselGraph};

pub const OBS_DIM: usize = 6;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("episode is done; call reset")]
    EpisodeDone,
    #[error("environment has not been reset")]
    NotReset,
    #[error("trajectory log: {0}")]
    Log(String),
}

/// Start/goal pair on a graph with all episode settings.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub graph: Arc<VesselGraph>,
    pub start: usize,
    pub goal: usize,
    pub reward: RewardConfig,
    pub wire: GuidewireConfig,
    /// Curvature weight of the geodesic edge weights.
    pub alpha: f64,
    pub max_steps: usize,
}

impl TaskSpec {
    pub const DEFAULT_MAX_STEPS: usize = 300;

    pub fn new(graph: Arc<VesselGraph>, start: usize, goal: usize) -> Self {
        Self {
            graph,
            start,
            goal,
            reward: RewardConfig::default(),
            wire: GuidewireConfig::default(),
            alpha: 0.0,
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    /// Resolves `start`/`goal` through the graph's labels.
    pub fn from_labels(graph: Arc<VesselGraph>, start: &str, goal: &str) -> Result<Self, EnvError> {
        let s = graph.label(start)?;
        let g = graph.label(goal)?;
        Ok(Self::new(graph, s, g))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !self.graph.contains_node(self.start) {
            return Err(EnvError::InvalidTask(format!("start node {} does not exist", self.start)));
        }
        if !self.graph.contains_node(self.goal) {
            return Err(EnvError::InvalidTask(format!("goal node {} does not exist", self.goal)));
        }
        if self.start == self.goal {
            return Err(EnvError::InvalidTask("start and goal coincide".into()));
        }
        if self.max_steps == 0 {
            return Err(EnvError::InvalidTask("max_steps must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(EnvError::InvalidTask(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        self.reward.validate()?;
        self.wire.validate()?;
        Ok(())
    }

    /// `[max_step_translation, max_step_rotation]`
    pub fn action_bounds(&self) -> [f64; 2] {
        [self.wire.max_step_translation, self.wire.max_step_rotation]
    }
}

/// Tip position (mm) and velocity (mm/s). Flattened as `[p.x, p.y, p.z, v.x, v.y, v.z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub p: Point3,
    pub v: Point3,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn from_array(a: [f64; OBS_DIM]) -> Self {
        Self {
            p: Point3::new(a[0], a[1], a[2]),
            v: Point3::new(a[3], a[4], a[5]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub d_current: f64,
    pub event: WireEvent,
    /// 1-based index of the step just taken.
    pub step: usize,
    pub terminal: Terminal,
    /// Action after clipping to the bounds.
    pub applied_action: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub obs: [f64; OBS_DIM],
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_obs: [f64; OBS_DIM],
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: usize,
    /// steps * step_period, seconds
    pub sim_time: f64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub final_distance: f64,
}

pub struct Env {
    task: TaskSpec,
    field: Arc<GeodesicField>,
    rng: ChaCha8Rng,
    wire: Option<GuidewireState>,
    steps: usize,
    done: bool,
    d_last: f64,
}

/// Builds an environment; the geodesic field to the goal is computed once.
pub fn make_env(task: TaskSpec, seed: u64) -> Result<Env, EnvError> {
    task.validate()?;
    let field = Arc::new(geodesic_from(&task.graph, task.goal, task.alpha)?);
    reset_wire(&task.graph, task.start, &task.wire)?;
    Ok(Env {
        task,
        field,
        rng: ChaCha8Rng::seed_from_u64(seed),
        wire: None,
        steps: 0,
        done: false,
        d_last: 0.0,
    })
}

impl Env {
    /// Another environment on the same task sharing the graph and geodesic
    /// field, with its own random stream.
    pub fn fork(&self, seed: u64) -> Env {
        Env {
            task: self.task.clone(),
            field: Arc::clone(&self.field),
            rng: ChaCha8Rng::seed_from_u64(seed),
            wire: None,
            steps: 0,
            done: false,
            d_last: 0.0,
        }
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn field(&self) -> &GeodesicField {
        &self.field
    }

    pub fn graph(&self) -> &VesselGraph {
        &self.task.graph
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn wire(&self) -> Option<&GuidewireState> {
        self.wire.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Distance to the goal under the task's reward mode.
    pub fn distance_of(&self, wire: &GuidewireState) -> f64 {
        if self.task.reward.mode.uses_euclidean() {
            wire.tip.distance(self.task.graph.position(self.task.goal))
        } else {
            match wire.current_edge(&self.task.graph) {
                Some((edge, t)) => self.field.edge_distance(&self.task.graph, edge, t),
                None => self.field.node_distance(wire.start()),
            }
        }
    }

    /// Distance to the goal at the current tip, if reset.
    pub fn distance(&self) -> Option<f64> {
        self.wire.as_ref().map(|w| self.distance_of(w))
    }

    fn observation(wire: &GuidewireState) -> Observation {
        Observation {
            p: wire.tip,
            v: wire.velocity,
        }
    }

    pub fn reset(&mut self) -> Observation {
        let wire = reset_wire(&self.task.graph, self.task.start, &self.task.wire)
            .expect("start validated in make_env");
        self.d_last = self.distance_of(&wire);
        let obs = Self::observation(&wire);
        self.wire = Some(wire);
        self.steps = 0;
        self.done = false;
        obs
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let mut wire = self.wire.take().ok_or(EnvError::NotReset)?;
        let applied = self.task.wire.clip(action);
        let event = step_wire(&mut wire, &self.task.graph, &self.task.wire, applied, &mut self.rng);
        self.steps += 1;
        let d_current = self.distance_of(&wire);
        let outcome = StepOutcome {
            d_last: self.d_last,
            d_current,
            collided: event.is_collision(),
            out_of_steps: self.steps >= self.task.max_steps,
        };
        let (reward, terminal) = compute_reward(&outcome, &self.task.reward)?;
        self.d_last = d_current;
        self.done = terminal.is_done();
        let obs = Self::observation(&wire);
        self.wire = Some(wire);
        Ok(StepResult {
            obs,
            reward,
            done: self.done,
            info: StepInfo {
                d_current,
                event,
                step: self.steps,
                terminal,
                applied_action: applied,
            },
        })
    }
}

/// One row of the trajectory log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub step: usize,
    pub p: Point3,
    pub v: Point3,
    pub action: [f64; 2],
    pub reward: f64,
    pub d_current: f64,
    pub event: String,
    pub done: bool,
}

pub const TRAJECTORY_HEADER: [&str; 14] = [
    "episode", "step", "px", "py", "pz", "vx", "vy", "vz", "dd", "dtheta", "reward", "d_current", "event", "done",
];

/// Rolls out one episode with `policy` from a fresh reset.
pub fn run_episode<P>(env: &mut Env, policy: P) -> Result<EpisodeResult, EnvError>
where
    P: FnMut(&Observation) -> [f64; 2],
{
    run_episode_traced(env, policy, 0, None)
}

/// [`run_episode`], additionally appending one row per step to `trace`.
pub fn run_episode_traced<P>(
    env: &mut Env,
    mut policy: P,
    episode: usize,
    mut trace: Option<&mut Vec<TrajectoryRow>>,
) -> Result<EpisodeResult, EnvError>
where
    P: FnMut(&Observation) -> [f64; 2],
{
    let mut obs = env.reset();
    let mut ret = 0.0;
    loop {
        let action = policy(&obs);
        let r = env.step(action)?;
        ret += r.reward;
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TrajectoryRow {
                episode,
                step: r.info.step,
                p: r.obs.p,
                v: r.obs.v,
                action: r.info.applied_action,
                reward: r.reward,
                d_current: r.info.d_current,
                event: r.info.event.name().to_string(),
                done: r.done,
            });
        }
        obs = r.obs;
        if r.done {
            return Ok(EpisodeResult {
                success: r.info.terminal == Terminal::Goal,
                steps: r.info.step,
                sim_time: r.info.step as f64 * env.task.wire.step_period,
                ret,
                final_distance: r.info.d_current,
            });
        }
    }
}

/// Success statistics over a batch of episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean simulated completion time over successful episodes only.
    pub mean_sim_time: Option<f64>,
    pub results: Vec<EpisodeResult>,
}

impl Evaluation {
    pub fn from_results(results: Vec<EpisodeResult>) -> Self {
        let episodes = results.len();
        let successes = results.iter().filter(|r| r.success).count();
        let times: Vec<f64> = results.iter().filter(|r| r.success).map(|r| r.sim_time).collect();
        Self {
            episodes,
            successes,
            success_rate: if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 },
            mean_sim_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
            results,
        }
    }
}

impl fmt::Display for Evaluation {
    /// `80% (8/10)`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.0}% ({}/{})", self.success_rate * 100.0, self.successes, self.episodes)
    }
}

/// Runs `n_episodes` episodes and aggregates success rate and mean time.
pub fn evaluate<P>(env: &mut Env, mut policy: P, n_episodes: usize) -> Result<Evaluation, EnvError>
where
    P: FnMut(&Observation) -> [f64; 2],
{
    if n_episodes == 0 {
        return Err(EnvError::InvalidTask("n_episodes must be at least 1".into()));
    }
    let results = (0..n_episodes)
        .map(|_| run_episode(env, &mut policy))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evaluation::from_results(results))
}

/// Writes the trajectory log as comma-separated text with a header row.
pub fn write_trajectory<W: io::Write>(rows: &[TrajectoryRow], out: W) -> Result<(), EnvError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| EnvError::Log(e.to_string());
    w.write_record(TRAJECTORY_HEADER).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.episode.to_string(), r.step.to_string()];
        rec.extend(
            [r.p.x, r.p.y, r.p.z, r.v.x, r.v.y, r.v.z, r.action[0], r.action[1], r.reward, r.d_current]
                .iter()
                .map(|&v| f64_17(v)),
        );
        rec.push(r.event.clone());
        rec.push(if r.done { "1" } else { "0" }.to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| EnvError::Log(e.to_string()))
}

pub fn read_trajectory<R: io::Read>(input: R) -> Result<Vec<TrajectoryRow>, EnvError> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers().map_err(|e| EnvError::Log(e.to_string()))?.clone();
    if headers.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(EnvError::Log(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| EnvError::Log(e.to_string()))?;
        let bad = |what: &str| EnvError::Log(format!("row {}: bad {what}", i + 1));
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(TRAJECTORY_HEADER[k]));
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(TRAJECTORY_HEADER[k]));
        rows.push(TrajectoryRow {
            episode: int(0)?,
            step: int(1)?,
            p: Point3::new(num(2)?, num(3)?, num(4)?),
            v: Point3::new(num(5)?, num(6)?, num(7)?),
            action: [num(8)?, num(9)?],
            reward: num(10)?,
            d_current: num(11)?,
            event: rec[12].to_string(),
            done: match &rec[13] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("done")),
            },
        });
    }
    Ok(rows)
}
