#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vasonav::ddpg::Checkpoint;
use vasonav::vesselgraph::{load_centerline, to_centerline_document};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vasonav"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn phantom_files_round_trip() {
    let dir = scratch("phantom");
    let out = ok(&run(&["phantom", "--out"], &[&dir]));
    assert!(out.contains("start -> endpoint_a: 180.000 mm"), "{out}");
    let text = std::fs::read_to_string(dir.join("centerline.json")).unwrap();
    let g = load_centerline(&text).unwrap();
    for label in ["start", "endpoint_a", "endpoint_b"] {
        assert!(g.label(label).is_ok());
    }
    assert_eq!(vasonav::numfmt::to_json_pretty(&to_centerline_document(&g)).unwrap(), text);

    let dir = scratch("phantom_complex");
    ok(&run(&["phantom", "--kind", "complex", "--out"], &[&dir]));
    let g = load_centerline(&std::fs::read_to_string(dir.join("centerline.json")).unwrap()).unwrap();
    assert_eq!(g.bifurcations().len(), 2);

    let dir = scratch("phantom_params");
    write(&dir.join("params.json"), r#"{"branch_angle": -1.0}"#);
    let out = run(&["phantom", "--config"], &[&dir.join("params.json")]);
    assert!(!out.status.success());
    write(&dir.join("params.json"), r#"{"branch_angel": 0.4}"#);
    let out = run(&["phantom", "--config"], &[&dir.join("params.json")]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("branch_angel"));
}

fn parse_report(s: &str) -> Vec<f64> {
    s.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn geodesic_reports() {
    let dir = scratch("geodesic");
    ok(&run(&["phantom", "--kind", "straight", "--out"], &[&dir]));
    let file = dir.join("centerline.json");
    let g = load_centerline(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let report = ok(&run(&["geodesic", "--goal", "end", "--centerline"], &[&file]));
    let d = parse_report(&report);
    let goal = g.position(g.label("end").unwrap());
    for (i, v) in d.iter().enumerate() {
        assert!((v - g.position(i).distance(goal)).abs() < 1e-9);
    }
    let at_goal = ok(&run(&["geodesic", "--goal", "end", "--point", "0,0,100", "--centerline"], &[&file]));
    assert_eq!(at_goal.trim().parse::<f64>().unwrap(), 0.0);
    let bad = run(&["geodesic", "--goal", "nowhere", "--centerline"], &[&file]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nowhere"));

    // Random 20-node graph against exhaustive enumeration.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = common::random_graph(&mut rng, 20, 5);
    let file = dir.join("random.json");
    write(&file, &serde_json::to_string(&to_centerline_document(&g)).unwrap());
    let report = ok(&run(&["geodesic", "--goal", "7", "--alpha", "1.5", "--centerline"], &[&file]));
    let oracle = common::brute_force_geodesic(&g, 7, 1.5);
    for (got, want) in parse_report(&report).iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

const TINY_RUN: &str = r#"{
  "task": {"phantom": {"generator": "simplified"}, "start": "start", "goal": "endpoint_a"},
  "ddpg": {"total_steps": 1000, "warmup_steps": 500, "log_interval": 2, "seed": 1}
}"#;

#[test]
fn train_eval_plot_pipeline() {
    let dir = scratch("pipeline");
    let cfg = dir.join("run.json");
    write(&cfg, TINY_RUN);
    let t0 = Instant::now();
    ok(&run(&["train", "--config"], &[&cfg, Path::new("--out"), &dir.join("a")]));
    assert!(t0.elapsed().as_secs_f64() < 10.0, "tiny run took {:?}", t0.elapsed());
    ok(&run(&["train", "--config"], &[&cfg, Path::new("--out"), &dir.join("b")]));
    for f in ["training_log.csv", "checkpoint.json", "metadata.json"] {
        assert_eq!(std::fs::read(dir.join("a").join(f)).unwrap(), std::fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    ok(&run(&["train", "--seed", "2", "--config"], &[&cfg, Path::new("--out"), &dir.join("c")]));
    assert_ne!(
        std::fs::read(dir.join("a/checkpoint.json")).unwrap(),
        std::fs::read(dir.join("c/checkpoint.json")).unwrap()
    );
    let log = std::fs::read_to_string(dir.join("a/training_log.csv")).unwrap();
    assert!(log.starts_with("step,episodes,mean_return,train_success,critic_loss,actor_objective,eval_success,eval_sim_time\n"));
    assert!(log.lines().count() >= 2);

    // Evaluation: formatting, determinism, artifacts.
    let ck = dir.join("a/checkpoint.json");
    let ev1 = ok(&run(&["eval", "-n", "4", "--checkpoint"], &[&ck, Path::new("--config"), &cfg, Path::new("--out"), &dir.join("eval")]));
    let ev2 = ok(&run(&["eval", "-n", "4", "--checkpoint"], &[&ck, Path::new("--config"), &cfg]));
    assert_eq!(ev1, ev2);
    let line = ev1.lines().find(|l| l.starts_with("success rate: ")).unwrap();
    assert!(line.ends_with("/4)"), "{line}");
    assert!(ev1.contains("mean sim_time (successful episodes): "));
    let zero = run(&["eval", "-n", "0", "--checkpoint"], &[&ck, Path::new("--config"), &cfg]);
    assert!(!zero.status.success());

    // Dimension mismatch is rejected.
    let mut bad: Checkpoint = Checkpoint::from_json(&std::fs::read_to_string(&ck).unwrap()).unwrap();
    bad.obs_dim = 9;
    let bad_path = dir.join("bad_checkpoint.json");
    write(&bad_path, &bad.to_json());
    let out = run(&["eval", "--checkpoint"], &[&bad_path, Path::new("--config"), &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));

    // Plot the evaluation trajectories twice.
    let traj = dir.join("eval/trajectories.csv");
    let mut svgs = Vec::new();
    for sub in ["p1", "p2"] {
        ok(&run(&["plot", "--plane", "xz", "--trajectory"], &[&traj, Path::new("--config"), &cfg, Path::new("--out"), &dir.join(sub)]));
        svgs.push(std::fs::read_to_string(dir.join(sub).join("trajectory_xz.svg")).unwrap());
    }
    assert_eq!(svgs[0], svgs[1]);
    let svg = &svgs[0];
    assert_eq!(svg.matches(r#"<path class="vessel""#).count(), 1);
    assert_eq!(svg.matches(r#"<path class="trajectory""#).count(), 4);

    let empty = dir.join("empty.csv");
    write(&empty, "episode,step,px,py,pz,vx,vy,vz,dd,dtheta,reward,d_current,event,done\n");
    let out = run(&["plot", "--trajectory"], &[&empty, Path::new("--config"), &cfg, Path::new("--out"), &dir]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = scratch("config_errors");
    let cfg = dir.join("run.json");
    write(&cfg, r#"{"task": {"phantom": {"generator": "simplified"}, "start": "start"}}"#);
    let out = run(&["train", "--config"], &[&cfg, Path::new("--out"), &dir]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing field `goal`"), "{err}");
    assert!(!dir.join("checkpoint.json").exists());

    write(&cfg, r#"{"task": {"phantom": {"generator": "simplified"}, "start": "start", "goal": "endpoint_a"}, "ddpg": {"gama": 0.9}}"#);
    let err = String::from_utf8_lossy(&run(&["train", "--config"], &[&cfg]).stderr).to_string();
    assert!(err.contains("gama"), "{err}");
}

#[test]
fn tcp_server_session() {
    let dir = scratch("tcp");
    let cfg = dir.join("task.json");
    write(&cfg, r#"{"phantom": {"generator": "simplified"}, "start": "start", "goal": "endpoint_a"}"#);
    let mut child = Command::new(env!("CARGO_BIN_EXE_vasonav"))
        .args(["serve", "--listen", "tcp:0", "--once", "--config"])
        .arg(&cfg)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let stream = TcpStream::connect(&addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let mut ask = |req: &str| {
        writeln!(writer, "{req}").unwrap();
        let mut resp = String::new();
        reader.read_line(&mut resp).unwrap();
        resp
    };
    assert!(ask(r#"{"type":"hello","version":1}"#).contains(r#""obs_dim":6"#));
    assert!(ask(r#"{"type":"step","action":[1.0,0.0]}"#).contains(r#""code":"not_reset""#));
    assert!(ask(r#"{"type":"reset"}"#).contains(r#""type":"state""#));
    let step = ask(r#"{"type":"step","action":[0.0,0.0]}"#);
    assert!(step.contains(r#""obs":[0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"#), "{step}");
    assert_eq!(ask(r#"{"type":"close"}"#).trim(), r#"{"type":"bye"}"#);
    assert!(child.wait().unwrap().success());
}
