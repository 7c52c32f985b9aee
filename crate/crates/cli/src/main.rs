use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use vasonav::Point3;
use vasonav_cli::commands::{self, Listen};
use vasonav_cli::config::{load_task_doc, GeneratorKind};
use vasonav_cli::plot::Plane;

#[derive(Parser)]
#[command(name = "vasonav", version, about = "Vascular guidewire navigation simulator and DDPG trainer")]
struct Cli {
    /// Configuration file (task, run or generator parameters depending on the command).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a phantom centerline file (`--config` holds generator parameters).
    Phantom {
        #[arg(long, value_enum, default_value = "simplified")]
        kind: GeneratorKind,
    },
    /// Along-vessel distances to a goal node.
    Geodesic {
        /// Centerline file; defaults to the phantom of the `--config` task.
        #[arg(long)]
        centerline: Option<PathBuf>,
        /// Goal label or node id; defaults to the task's goal.
        #[arg(long)]
        goal: Option<String>,
        /// Curvature weight; defaults to the task's alpha (or 0).
        #[arg(long)]
        alpha: Option<f64>,
        /// Report the distance at a single point `x,y,z` instead.
        #[arg(long)]
        point: Option<String>,
    },
    /// Train a DDPG policy from a run config.
    Train,
    /// Evaluate a checkpoint on the `--config` task.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10)]
        episodes: usize,
    },
    /// Render a trajectory log as SVG.
    Plot {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value = "xz")]
        plane: Plane,
        /// Centerline file; defaults to the phantom of the `--config` task.
        #[arg(long)]
        centerline: Option<PathBuf>,
    },
    /// Serve the `--config` task over the line-delimited JSON protocol.
    Serve {
        /// `stdio` or `tcp:PORT`.
        #[arg(long, default_value = "stdio")]
        listen: Listen,
        /// Exit after the first TCP connection closes.
        #[arg(long)]
        once: bool,
    },
}

fn graph_from(centerline: Option<&PathBuf>, config: Option<&PathBuf>) -> Result<vasonav::vesselgraph::VesselGraph> {
    match (centerline, config) {
        (Some(c), _) => commands::load_graph_file(c),
        (None, Some(cfg)) => {
            let loaded = load_task_doc(cfg)?;
            loaded.doc.phantom.load(&loaded.base_dir)
        }
        (None, None) => bail!("need --centerline or --config"),
    }
}

fn parse_point(s: &str) -> Result<Point3> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad point `{s}`"))?;
    match v[..] {
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => bail!("point needs three coordinates, got `{s}`"),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let need_config = || cli.config.clone().context("--config is required for this command");
    match &cli.command {
        Command::Phantom { kind } => {
            commands::cmd_phantom(*kind, cli.config.as_deref(), &out_dir, &mut out)?;
        }
        Command::Geodesic { centerline, goal, alpha, point } => {
            let graph = graph_from(centerline.as_ref(), cli.config.as_ref())?;
            let task = cli.config.as_ref().filter(|_| goal.is_none() || alpha.is_none()).map(|c| load_task_doc(c)).transpose()?;
            let goal = match (goal, &task) {
                (Some(g), _) => g.clone(),
                (None, Some(t)) => t.doc.goal.clone(),
                (None, None) => bail!("need --goal or a --config task"),
            };
            let alpha = alpha.or(task.as_ref().map(|t| t.doc.alpha)).unwrap_or(0.0);
            let point = point.as_deref().map(parse_point).transpose()?;
            commands::cmd_geodesic(&graph, &goal, alpha, point, cli.out.as_deref(), &mut out)?;
        }
        Command::Train => commands::cmd_train(&need_config()?, cli.seed, &out_dir, &mut out)?,
        Command::Eval { checkpoint, episodes } => {
            commands::cmd_eval(checkpoint, &need_config()?, *episodes, cli.seed, cli.out.as_deref(), &mut out)?;
        }
        Command::Plot { trajectory, plane, centerline } => {
            let graph = graph_from(centerline.as_ref(), cli.config.as_ref())?;
            commands::cmd_plot(&graph, trajectory, *plane, &out_dir, &mut out)?;
        }
        Command::Serve { listen, once } => commands::cmd_serve(&need_config()?, cli.seed, listen, *once)?,
    }
    Ok(())
}
