//! Implementations of the `vasonav` subcommands. Each writes its
//! human-readable report to `out` and its artifacts atomically to disk.

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vasonav::ddpg::{train, Checkpoint, LogRecord};
use vasonav::env::{make_env, read_trajectory, run_episode_traced, write_trajectory, EpisodeResult, Evaluation};
use vasonav::numfmt::{f64_17, to_json_pretty};
use vasonav::vesselgraph::{geodesic_from, load_centerline, to_centerline_document, VesselGraph};
use vasonav::Point3;

use crate::config::{generate, load_run_config, load_task_doc, GeneratorKind, RunConfig};
use crate::fsutil::write_atomic;
use crate::plot::{render_svg, Plane};
use crate::server::{serve_stdio, serve_tcp};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const CENTERLINE_FILE: &str = "centerline.json";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const EVAL_FILE: &str = "eval.json";

pub fn cmd_phantom(kind: GeneratorKind, params: Option<&Path>, out_dir: &Path, out: &mut dyn Write) -> Result<PathBuf> {
    let params = match params {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str::<serde_json::Value>(&text).with_context(|| format!("invalid params {}", p.display()))?)
        }
        None => None,
    };
    let graph = generate(kind, params.as_ref())?;
    let path = out_dir.join(CENTERLINE_FILE);
    write_atomic(&path, to_json_pretty(&to_centerline_document(&graph))?.as_bytes())?;
    writeln!(
        out,
        "{} nodes, {} edges, {} terminals, {} bifurcations",
        graph.node_count(),
        graph.edge_count(),
        graph.terminals().len(),
        graph.bifurcations().len()
    )?;
    let start = graph.label("start")?;
    for (name, &id) in graph.labels() {
        if name.starts_with("endpoint") {
            let len = graph.path_length(start, id).unwrap_or(f64::NAN);
            writeln!(out, "start -> {name}: {len:.3} mm")?;
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(path)
}

/// Resolves a node given as a label or a numeric id.
pub fn resolve_node(graph: &VesselGraph, name: &str) -> Result<usize> {
    if let Ok(id) = name.parse::<usize>() {
        if graph.contains_node(id) {
            return Ok(id);
        }
        bail!("no node with id {id}");
    }
    Ok(graph.label(name)?)
}

pub fn load_graph_file(path: &Path) -> Result<VesselGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_centerline(&text).with_context(|| format!("loading {}", path.display()))
}

pub fn cmd_geodesic(
    graph: &VesselGraph,
    goal: &str,
    alpha: f64,
    point: Option<Point3>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let goal = resolve_node(graph, goal)?;
    let field = geodesic_from(graph, goal, alpha)?;
    if let Some(p) = point {
        writeln!(out, "{}", f64_17(field.manifold_distance(graph, p)?))?;
        return Ok(());
    }
    let mut report = String::from("node,distance\n");
    for n in 0..graph.node_count() {
        report.push_str(&format!("{n},{}\n", f64_17(field.node_distance(n))));
    }
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("geodesic.csv"), report.as_bytes())?;
    }
    out.write_all(report.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct TrainMetadata<'a> {
    format_version: u32,
    tool_version: &'a str,
    seed: u64,
    steps: usize,
    checkpoint: &'a str,
    training_log: &'a str,
    final_record: Option<&'a LogRecord>,
    /// Observation scaling applied inside the trainer.
    position_scale: f64,
    velocity_scale: f64,
    mean_sim_time_convention: &'a str,
    config: &'a RunConfig,
}

/// Trains from a run config; writes checkpoint, training log and metadata.
pub fn cmd_train(config: &Path, seed: Option<u64>, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let loaded = load_run_config(config)?;
    let mut run = loaded.doc;
    if let Some(s) = seed {
        run.ddpg.seed = s;
    }
    let task = run.task.to_task(&loaded.base_dir)?;
    let result = train(|s| make_env(task.clone(), s), &run.ddpg)?;

    let checkpoint = Checkpoint::from_policy(&result.policy, &run.ddpg).to_json();
    let log = result.log.to_csv_string();
    let meta = TrainMetadata {
        format_version: 1,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: run.ddpg.seed,
        steps: result.steps,
        checkpoint: CHECKPOINT_FILE,
        training_log: TRAINING_LOG_FILE,
        final_record: result.log.last(),
        position_scale: result.policy.normalizer.position_scale,
        velocity_scale: result.policy.normalizer.velocity_scale,
        mean_sim_time_convention: "successful episodes only",
        config: &run,
    };
    write_atomic(&out_dir.join(CHECKPOINT_FILE), checkpoint.as_bytes())?;
    write_atomic(&out_dir.join(TRAINING_LOG_FILE), log.as_bytes())?;
    write_atomic(&out_dir.join(METADATA_FILE), to_json_pretty(&meta)?.as_bytes())?;

    if let Some(last) = result.log.last() {
        writeln!(
            out,
            "trained {} steps, {} episodes; greedy success {:.0}%",
            result.steps,
            last.episodes,
            last.eval_success * 100.0
        )?;
    }
    writeln!(out, "wrote {}", out_dir.display())?;
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "n/a".to_string(), |t| format!("{t:.3} s"))
}

pub fn format_results_table(results: &[EpisodeResult]) -> String {
    let mut s = format!("{:>7}  {:>7}  {:>5}  {:>10}  {:>12}  {:>14}\n", "episode", "success", "steps", "sim_time_s", "return", "final_dist_mm");
    for (i, r) in results.iter().enumerate() {
        s.push_str(&format!(
            "{:>7}  {:>7}  {:>5}  {:>10.3}  {:>12.4}  {:>14.4}\n",
            i,
            if r.success { "yes" } else { "no" },
            r.steps,
            r.sim_time,
            r.ret,
            r.final_distance
        ));
    }
    s
}

/// Evaluates a checkpoint greedily for `episodes` episodes on a task.
pub fn cmd_eval(
    checkpoint: &Path,
    task_config: &Path,
    episodes: usize,
    seed: Option<u64>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Evaluation> {
    if episodes == 0 {
        bail!("number of episodes must be at least 1");
    }
    let text = fs::read_to_string(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    let policy = Checkpoint::from_json(&text)?.to_policy()?;
    let loaded = load_task_doc(task_config)?;
    let task = loaded.doc.to_task(&loaded.base_dir)?;
    let mut env = make_env(task, seed.unwrap_or(loaded.doc.seed))?;

    let mut rows = Vec::new();
    let mut results = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        results.push(run_episode_traced(&mut env, |o| policy.greedy(o), ep, Some(&mut rows))?);
    }
    let eval = Evaluation::from_results(results);
    out.write_all(format_results_table(&eval.results).as_bytes())?;
    writeln!(out, "success rate: {eval}")?;
    writeln!(out, "mean sim_time (successful episodes): {}", fmt_time(eval.mean_sim_time))?;
    if let Some(dir) = out_dir {
        let mut buf = Vec::new();
        write_trajectory(&rows, &mut buf)?;
        write_atomic(&dir.join(TRAJECTORY_FILE), &buf)?;
        write_atomic(&dir.join(EVAL_FILE), to_json_pretty(&eval)?.as_bytes())?;
    }
    Ok(eval)
}

/// Renders a trajectory log over the vessel into `<out_dir>/trajectory_<plane>.svg`.
pub fn cmd_plot(graph: &VesselGraph, trajectory: &Path, plane: Plane, out_dir: &Path, out: &mut dyn Write) -> Result<PathBuf> {
    let file = fs::File::open(trajectory).with_context(|| format!("reading {}", trajectory.display()))?;
    let rows = read_trajectory(file)?;
    let svg = render_svg(graph, &rows, plane)?;
    let path = out_dir.join(format!("trajectory_{}.svg", plane.name()));
    write_atomic(&path, svg.as_bytes())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(path)
}

/// Transport for `serve`: `stdio` or `tcp:PORT` / `tcp:HOST:PORT`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Listen {
    Stdio,
    Tcp(String),
}

impl std::str::FromStr for Listen {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "stdio" {
            return Ok(Listen::Stdio);
        }
        match s.strip_prefix("tcp:") {
            Some(rest) if rest.parse::<u16>().is_ok() => Ok(Listen::Tcp(format!("127.0.0.1:{rest}"))),
            Some(rest) if rest.rsplit_once(':').is_some_and(|(_, p)| p.parse::<u16>().is_ok()) => Ok(Listen::Tcp(rest.to_string())),
            _ => Err(format!("expected `stdio` or `tcp:PORT`, got `{s}`")),
        }
    }
}

pub fn cmd_serve(task_config: &Path, seed: Option<u64>, listen: &Listen, once: bool) -> Result<()> {
    let loaded = load_task_doc(task_config)?;
    let seed = seed.unwrap_or(loaded.doc.seed);
    let env = make_env(loaded.doc.to_task(&loaded.base_dir)?, seed)?;
    match listen {
        Listen::Stdio => serve_stdio(env)?,
        Listen::Tcp(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(&env, listener, seed, once)?;
        }
    }
    Ok(())
}
