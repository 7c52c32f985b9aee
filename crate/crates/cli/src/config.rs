//! Task and run configuration documents.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vasonav::ddpg::DdpgConfig;
use vasonav::env::TaskSpec;
use vasonav::guidewire::GuidewireConfig;
use vasonav::reward::RewardConfig;
use vasonav::vesselgraph::{
    generate_complex_phantom, generate_simplified_phantom, generate_straight_vessel, load_centerline, resample,
    ComplexPhantomParams, SimplifiedPhantomParams, StraightVesselParams, VesselGraph,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Y-shaped single bifurcation.
    Simplified,
    /// Arch with two successive bifurcations.
    Complex,
    /// Single straight vessel.
    Straight,
}

/// Where a task's centerline comes from: a centerline file or a generator
/// with optional parameter overrides. Exactly one of `file`/`generator`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    /// Optional uniform resampling spacing, mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample: Option<f64>,
}

pub fn generate(kind: GeneratorKind, params: Option<&serde_json::Value>) -> Result<VesselGraph> {
    fn parse<T: serde::de::DeserializeOwned + Default>(v: Option<&serde_json::Value>) -> Result<T> {
        match v {
            None => Ok(T::default()),
            Some(v) => serde_json::from_value(v.clone()).context("invalid phantom params"),
        }
    }
    Ok(match kind {
        GeneratorKind::Simplified => generate_simplified_phantom(&parse::<SimplifiedPhantomParams>(params)?)?,
        GeneratorKind::Complex => generate_complex_phantom(&parse::<ComplexPhantomParams>(params)?)?,
        GeneratorKind::Straight => generate_straight_vessel(&parse::<StraightVesselParams>(params)?)?,
    })
}

impl PhantomRef {
    /// Builds the graph; relative files resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<VesselGraph> {
        let graph = match (&self.file, self.generator) {
            (Some(_), Some(_)) => bail!("phantom: give either `file` or `generator`, not both"),
            (None, None) => bail!("phantom: missing field `file` or `generator`"),
            (Some(file), None) => {
                if self.params.is_some() {
                    bail!("phantom: `params` only applies to generators");
                }
                let path = base_dir.join(file);
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                load_centerline(&text).with_context(|| format!("loading {}", path.display()))?
            }
            (None, Some(kind)) => generate(kind, self.params.as_ref())?,
        };
        match self.resample {
            Some(spacing) => Ok(resample(&graph, spacing)?),
            None => Ok(graph),
        }
    }
}

fn default_max_steps() -> usize {
    TaskSpec::DEFAULT_MAX_STEPS
}

/// A navigation task: phantom, start/goal labels and episode settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    pub phantom: PhantomRef,
    pub start: String,
    pub goal: String,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub wire: GuidewireConfig,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Seed of the environment's random stream for evaluation and serving.
    #[serde(default)]
    pub seed: u64,
}

impl TaskDoc {
    pub fn to_task(&self, base_dir: &Path) -> Result<TaskSpec> {
        let graph = Arc::new(self.phantom.load(base_dir)?);
        let mut task = TaskSpec::from_labels(graph, &self.start, &self.goal)?;
        task.reward = self.reward.clone();
        task.wire = self.wire.clone();
        task.alpha = self.alpha;
        task.max_steps = self.max_steps;
        task.validate()?;
        Ok(task)
    }
}

/// Training run: a task plus trainer settings (`ddpg.seed` seeds the run).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskDoc,
    #[serde(default)]
    pub ddpg: DdpgConfig,
}

/// A parsed configuration file together with its directory.
pub struct Loaded<T> {
    pub doc: T,
    pub base_dir: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, PathBuf)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((doc, base))
}

pub fn load_run_config(path: &Path) -> Result<Loaded<RunConfig>> {
    let (doc, base_dir): (RunConfig, _) = read_json(path)?;
    doc.ddpg.validate()?;
    Ok(Loaded { doc, base_dir })
}

/// Accepts either a bare task document or a run config (its `task` is used).
pub fn load_task_doc(path: &Path) -> Result<Loaded<TaskDoc>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    let doc = if value.get("task").is_some() {
        serde_json::from_value::<RunConfig>(value).map(|r| r.task)
    } else {
        serde_json::from_value::<TaskDoc>(value)
    }
    .with_context(|| format!("invalid config {}", path.display()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { doc, base_dir })
}
