//! Trains DDPG on the generated Y-phantom and prints the training log.
//!
//! Usage: `train_y [endpoint_a|endpoint_b] [shaped_manifold|shaped_euclidean|negative_distance] [seed] [total_steps]`

use std::sync::Arc;
use std::time::Instant;

use vasonav::ddpg::{train, DdpgConfig};
use vasonav::env::{make_env, TaskSpec};
use vasonav::reward::RewardMode;
use vasonav::vesselgraph::{generate_simplified_phantom, SimplifiedPhantomParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let goal = args.first().map_or("endpoint_a", String::as_str);
    let mode: RewardMode = serde_json::from_value(serde_json::Value::String(
        args.get(1).cloned().unwrap_or_else(|| "shaped_manifold".into()),
    ))?;
    let seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let total_steps: usize = args.get(3).map_or(Ok(100_000), |s| s.parse())?;

    let graph = Arc::new(generate_simplified_phantom(&SimplifiedPhantomParams::default())?);
    let mut task = TaskSpec::from_labels(graph, "start", goal)?;
    task.reward.mode = mode;
    let config = DdpgConfig { seed, total_steps, eval_episodes: 20, ..Default::default() };

    let t0 = Instant::now();
    let out = train(|s| make_env(task.clone(), s), &config)?;
    print!("{}", out.log.to_csv_string());
    eprintln!("steps {} in {:.1?}", out.steps, t0.elapsed());
    Ok(())
}
