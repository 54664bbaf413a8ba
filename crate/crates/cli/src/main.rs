use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use planeslam::mapping::PlaneMap;
use planeslam::pipeline::io::{format_trajectory, parse_trajectory, read_scans_dir, tree_edges_csv, write_scans_dir};
use planeslam::pipeline::{compute_metrics, run_scene, run_slam, simulate_scene, write_outputs, PipelineConfig, RunReport};
use planeslam::planning::{rrt_build, Bounds};
use planeslam::sim::{run_trajectory, BoxScene, TrajectorySpec};
use planeslam::{Error, Point3};

#[derive(Parser)]
#[command(name = "planeslam", version, about = "Plane-based LiDAR SLAM toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; unspecified keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Source {
    /// Built-in simulator scene: room, blocks or loop.
    #[arg(long, conflicts_with = "scans_dir")]
    scene: Option<String>,
    /// Directory of .bin or .csv scans, processed in lexicographic order.
    #[arg(long)]
    scans_dir: Option<PathBuf>,
    /// Number of simulated frames along the scene path.
    #[arg(long)]
    frames: Option<usize>,
    /// Range noise standard deviation for simulated scans (m).
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run SLAM on scans or a simulated scene; writes map, trajectory and report.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Write simulated scans and ground truth for a scene.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scene: Option<String>,
        /// Scene JSON, instead of a built-in scene.
        #[arg(long, conflicts_with = "scene", requires = "trajectory")]
        scene_file: Option<PathBuf>,
        /// Trajectory JSON for `--scene-file`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Build an RRT in a plane map.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Map JSON written by `run`.
        #[arg(long)]
        map: PathBuf,
        /// Root of the tree as x,y,z (overrides the config).
        #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
        start: Option<Vec<f64>>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Per-module timing table for simulated runs.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Scenes to run; defaults to blocks.
        #[arg(long)]
        scene: Vec<String>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Trajectory error of an estimate against ground truth.
    Metrics {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn with_noise(mut cfg: PipelineConfig, sigma: Option<f64>) -> Result<PipelineConfig, Error> {
    if let Some(s) = sigma {
        cfg.lidar.range_noise_sigma = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_config(dir: &Path, cfg: &PipelineConfig) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), cfg.to_json()?)?;
    Ok(())
}

fn run(common: &Common, source: &Source) -> Result<(), Error> {
    let cfg = with_noise(load_config(common)?, source.noise_sigma)?;
    let out_dir = cfg.out_dir.clone();
    let report = match (&source.scene, &source.scans_dir) {
        (Some(scene), _) => {
            let (sim, out) = run_scene(scene, &cfg, source.frames)?;
            write_outputs(&out_dir, &out, &sim.timestamps, Some(&sim.ground_truth))?;
            out.report
        }
        (None, Some(dir)) => {
            let scans = read_scans_dir(dir, cfg.frame_stride)?;
            let out = run_slam(&scans, &cfg)?;
            let ts: Vec<f64> = scans.iter().map(|s| s.frame_id as f64 / cfg.scan_rate).collect();
            write_outputs(&out_dir, &out, &ts, None)?;
            out.report
        }
        (None, None) => return Err(Error::Config("run needs --scene or --scans-dir".into())),
    };
    write_config(&out_dir, &cfg)?;
    print!("{}", report.summary());
    println!("outputs written to {}", out_dir.display());
    Ok(())
}

fn simulate(
    common: &Common,
    scene: &Option<String>,
    scene_file: &Option<PathBuf>,
    trajectory: &Option<PathBuf>,
    frames: Option<usize>,
    noise_sigma: Option<f64>,
) -> Result<(), Error> {
    let cfg = with_noise(load_config(common)?, noise_sigma)?;
    let out_dir = cfg.out_dir.clone();
    let (scans, gt, ts) = match (scene, scene_file) {
        (_, Some(path)) => {
            let world = BoxScene::from_json(&fs::read_to_string(path)?)?;
            let traj = trajectory.as_ref().ok_or_else(|| Error::Config("--scene-file needs --trajectory".into()))?;
            let mut spec = TrajectorySpec::from_json(&fs::read_to_string(traj)?)?;
            if let Some(f) = frames {
                spec.frames = f;
            }
            let ts = spec.timestamps();
            let (gt, scans): (Vec<_>, Vec<_>) = run_trajectory(&world, &spec, &cfg.lidar, cfg.seed).into_iter().unzip();
            (scans, gt, ts)
        }
        (Some(name), None) => {
            let sim = simulate_scene(name, &cfg, frames)?;
            (sim.scans, sim.ground_truth, sim.timestamps)
        }
        (None, None) => return Err(Error::Config("simulate needs --scene or --scene-file".into())),
    };
    let files = write_scans_dir(&out_dir.join("scans"), &scans)?;
    fs::write(out_dir.join("ground_truth.txt"), format_trajectory(&ts, &gt)?)?;
    write_config(&out_dir, &cfg)?;
    println!("{} scans written to {}", files.len(), out_dir.join("scans").display());
    Ok(())
}

/// Bounding box of all map corners.
fn map_bounds(map: &PlaneMap) -> Result<Bounds, Error> {
    let mut b = Bounds { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] };
    for p in map.planes.iter() {
        for c in p.corners() {
            for i in 0..3 {
                b.min[i] = b.min[i].min(c[i]);
                b.max[i] = b.max[i].max(c[i]);
            }
        }
    }
    if map.is_empty() {
        return Err(Error::Config("map is empty; set rrt_bounds in the config".into()));
    }
    Ok(b)
}

fn plan(common: &Common, map_path: &Path, start: &Option<Vec<f64>>, nodes: Option<usize>) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    if let Some(n) = nodes {
        cfg.rrt.n_nodes = n;
    }
    cfg.validate()?;
    let map = PlaneMap::from_json(&fs::read_to_string(map_path)?)?;
    let bounds = match cfg.rrt_bounds {
        Some(b) => b,
        None => map_bounds(&map)?,
    };
    let start = match start {
        Some(v) if v.len() == 3 => Point3::new(v[0], v[1], v[2]),
        Some(v) => return Err(Error::Config(format!("--start needs x,y,z, got {} values", v.len()))),
        None => Point3::from(cfg.rrt_start),
    };
    let t = std::time::Instant::now();
    let tree = rrt_build(map.planes.planes(), start, &bounds, &cfg.rrt, cfg.seed)?;
    let elapsed = t.elapsed().as_secs_f64();
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("tree.json"), tree.to_json()?)?;
    fs::write(cfg.out_dir.join("rrt_edges.csv"), tree_edges_csv(&tree))?;
    println!(
        "tree with {} nodes from {} samples in {:.3} s{}",
        tree.len(),
        tree.samples,
        elapsed,
        if tree.complete { "" } else { " (incomplete)" }
    );
    Ok(())
}

fn bench(common: &Common, scenes: &[String], frames: Option<usize>, noise_sigma: Option<f64>) -> Result<(), Error> {
    let cfg = with_noise(load_config(common)?, noise_sigma)?;
    let scenes = if scenes.is_empty() { vec!["blocks".to_string()] } else { scenes.to_vec() };
    let mut reports: Vec<(String, RunReport)> = Vec::new();
    for name in &scenes {
        let (_, out) = run_scene(name, &cfg, frames)?;
        println!("== {name} ({} frames, {} points per scan)", out.report.frames, cfg.lidar.points_per_scan);
        print!("{}", out.report.summary());
        println!();
        reports.push((name.clone(), out.report));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let rows: Vec<_> = reports
        .iter()
        .map(|(name, r)| {
            let m = r.mean_timing();
            json!({
                "scene": name,
                "extraction_ms": m.extraction_ms,
                "registration_ms": m.registration_ms,
                "loop_closure_ms": m.loop_closure_ms,
                "merging_ms": m.merging_ms,
                "total_ms": m.total_ms,
            })
        })
        .collect();
    fs::write(cfg.out_dir.join("bench.json"), serde_json::to_string_pretty(&rows)?)?;
    Ok(())
}

fn metrics(est: &Path, gt: &Path) -> Result<(), Error> {
    let (_, e) = parse_trajectory(&fs::read_to_string(est)?)?;
    let (_, g) = parse_trajectory(&fs::read_to_string(gt)?)?;
    let m = compute_metrics(&e, &g)?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, source } => run(common, source),
        Command::Simulate { common, scene, scene_file, trajectory, frames, noise_sigma } => {
            simulate(common, scene, scene_file, trajectory, *frames, *noise_sigma)
        }
        Command::Plan { common, map, start, nodes } => plan(common, map, start, *nodes),
        Command::Bench { common, scene, frames, noise_sigma } => bench(common, scene, *frames, *noise_sigma),
        Command::Metrics { est, gt } => metrics(est, gt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
