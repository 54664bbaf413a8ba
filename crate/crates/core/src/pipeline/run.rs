use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{OdometryNoise, PipelineConfig};
use super::io::{format_trajectory, map_corners_csv, trajectory_csv};
use super::report::{compute_metrics, memory_comparison, FrameTiming, RunReport};
use crate::error::{Error, Result};
use crate::extraction::extract_detailed;
use crate::geometry::{rotation_angle_between, Basis, PointCloud, Pose, Vec3};
use crate::graph::PoseGraph;
use crate::mapping::{regenerate, PlaneMap};
use crate::registration::register;
use crate::sim::{frame_seed, run_trajectory, scenes};
use crate::so3;

/// Mixed into the run seed so odometry noise never shares a stream with
/// range noise.
const ODOMETRY_NOISE_SALT: u64 = 0x6f64_6f6d_6574_7279;

#[derive(Debug, Clone)]
pub struct SlamOutput {
    /// One pose per input scan; skipped scans hold the previous pose.
    pub trajectory: Vec<Pose>,
    pub map: PlaneMap,
    pub report: RunReport,
    pub graph: PoseGraph,
    /// Graph node each scan is attached to.
    pub frame_nodes: Vec<Option<usize>>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn perturb(rel: &Pose, noise: &OdometryNoise, seed: u64) -> Pose {
    if noise.is_zero() {
        return *rel;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = Normal::new(0.0, noise.rotation_sigma_deg.to_radians()).expect("sigma validated");
    let tr = Normal::new(0.0, noise.translation_sigma).expect("sigma validated");
    let dphi = Vec3::new(rot.sample(&mut rng), rot.sample(&mut rng), rot.sample(&mut rng));
    let dt = Vec3::new(tr.sample(&mut rng), tr.sample(&mut rng), tr.sample(&mut rng));
    Pose::from_parts_unchecked(so3::exp(&dphi) * rel.rotation, rel.translation + dt)
}

/// Full SLAM loop with the first pose at the origin.
pub fn run_slam(scans: &[PointCloud], cfg: &PipelineConfig) -> Result<SlamOutput> {
    run_slam_from(scans, cfg, Pose::identity())
}

/// Full SLAM loop with the first successfully processed scan at `initial`.
///
/// Per scan: extract planes, register against the previous node, add the
/// node, look for and close a loop (optimizing and regenerating the map on
/// success), then merge the scan into the map. Failing scans are logged and
/// skipped; the run aborts if more than half fail.
pub fn run_slam_from(scans: &[PointCloud], cfg: &PipelineConfig, initial: Pose) -> Result<SlamOutput> {
    cfg.validate()?;
    if scans.len() < 2 {
        return Err(Error::Config(format!("need at least two scans, got {}", scans.len())));
    }
    let mut graph: Option<PoseGraph> = None;
    let mut basis: Option<Basis> = None;
    let mut map = PlaneMap::new();
    let mut report = RunReport { frames: scans.len(), ..Default::default() };
    let mut frame_nodes = Vec::with_capacity(scans.len());
    let mut last_loop: Option<usize> = None;

    for (k, cloud) in scans.iter().enumerate() {
        let start = Instant::now();
        let mut timing = FrameTiming { frame: cloud.frame_id, ..Default::default() };
        let prev_node = graph.as_ref().map(|g| g.len() - 1);

        let t = Instant::now();
        let extraction = extract_detailed(cloud, &cfg.extraction, &cfg.mapping, basis.as_ref());
        timing.extraction_ms = ms(t);
        let extraction = match extraction {
            Ok(e) => e,
            Err(e) => {
                log::warn!("frame {}: extraction failed: {e}", cloud.frame_id);
                report.failed_frames.push(cloud.frame_id);
                frame_nodes.push(prev_node);
                timing.total_ms = ms(start);
                report.timings.push(timing);
                continue;
            }
        };

        let Some(g) = graph.as_mut() else {
            map.merge_frame(cloud.frame_id, &extraction.planes.transformed(&initial), &cfg.mapping);
            basis = Some(extraction.basis);
            graph = Some(PoseGraph::new(initial, cloud.frame_id, extraction.planes));
            frame_nodes.push(Some(0));
            timing.total_ms = ms(start);
            report.timings.push(timing);
            continue;
        };

        let t = Instant::now();
        let prev = g.nodes.last().expect("graph is never empty");
        let reg = register(&extraction.planes, &prev.plane_set, &cfg.registration);
        timing.registration_ms = ms(t);
        let reg = match reg {
            Ok(r) => r,
            Err(e) => {
                log::warn!("frame {}: registration failed: {e}", cloud.frame_id);
                report.failed_frames.push(cloud.frame_id);
                frame_nodes.push(prev_node);
                timing.total_ms = ms(start);
                report.timings.push(timing);
                continue;
            }
        };
        let local = perturb(&reg.pose, &cfg.odometry_noise, frame_seed(cfg.seed ^ ODOMETRY_NOISE_SALT, k));
        // The registration maps this scan into the previous scan's frame;
        // turn its rotation into the world-frame increment `compose` expects.
        let rp = prev.pose.rotation;
        let mut rel_rot = rp * local.rotation * rp.transpose();
        if so3::orthonormality_error(&rel_rot) > 1e-12 {
            rel_rot = so3::orthonormalize(&rel_rot);
        }
        let relative = Pose::from_parts_unchecked(rel_rot, local.translation);
        basis = Some(extraction.basis);
        let node = g.add_frame(cloud.frame_id, extraction.planes, relative);
        frame_nodes.push(Some(node));

        let t = Instant::now();
        let mut optimized = false;
        let lc = &cfg.loop_closure;
        let cooled = last_loop.is_none_or(|l| node >= l + lc.cooldown);
        if lc.enabled && cooled {
            if let Some(j) = g.nearest_loop_candidate(node, cfg.graph.loop_radius, cfg.graph.min_separation) {
                match g.loop_measurement(node, j, &cfg.registration) {
                    Ok((reg, edge)) => {
                        let (pj, pk) = (g.nodes[j].pose, g.nodes[node].pose);
                        let est_t = pj.rotation.tr_mul(&(pk.translation - pj.translation));
                        let est_r = pj.rotation.transpose() * pk.rotation;
                        let dt = (reg.pose.translation - est_t).norm();
                        let dr = rotation_angle_between(&reg.pose.rotation, &est_r);
                        if reg.translation_residual_norm > lc.max_residual || dt > lc.max_correction || dr > lc.max_correction_deg {
                            log::info!(
                                "frame {}: loop {j} -> {node} rejected (residual {:.3}, correction {dt:.3} m / {dr:.2} deg)",
                                cloud.frame_id,
                                reg.translation_residual_norm
                            );
                        } else {
                            g.edges.push(edge);
                            let opt = g.optimize(&cfg.graph);
                            if opt.singular {
                                log::warn!("frame {}: pose graph system singular; poses kept", cloud.frame_id);
                            }
                            log::info!(
                                "frame {}: loop {j} -> {node} closed, chi2 {:.4e} -> {:.4e} in {} iterations",
                                cloud.frame_id,
                                opt.chi2_history.first().copied().unwrap_or(0.0),
                                opt.final_chi2(),
                                opt.iterations
                            );
                            report.loop_closures.push((j, node));
                            report.chi2_histories.push(opt.chi2_history);
                            last_loop = Some(node);
                            optimized = true;
                        }
                    }
                    Err(e) => log::debug!("frame {}: loop {j} -> {node} failed: {e}", cloud.frame_id),
                }
            }
        }
        timing.loop_closure_ms = ms(t);

        let t = Instant::now();
        if optimized {
            let sets: Vec<(u64, _)> = g.nodes.iter().map(|n| (n.frame_id, n.plane_set.clone())).collect();
            let revision = map.revision;
            map = regenerate(&sets, &g.poses(), &cfg.mapping)?;
            map.revision = revision + 1;
        } else {
            let n = &g.nodes[node];
            map.merge_frame(n.frame_id, &n.plane_set.transformed(&n.pose), &cfg.mapping);
        }
        timing.merging_ms = ms(t);
        timing.total_ms = ms(start);
        report.timings.push(timing);
    }

    let failed = report.failed_frames.len();
    if 2 * failed > scans.len() {
        return Err(Error::TooManyFailures { failed, total: scans.len() });
    }
    let graph = graph.ok_or(Error::TooManyFailures { failed, total: scans.len() })?;
    let trajectory = frame_nodes.iter().map(|n| n.map_or(initial, |i| graph.nodes[i].pose)).collect();
    let (map_bytes, cloud_bytes) = memory_comparison(&map, scans, cfg.decimation)?;
    report.map_planes = map.len();
    report.map_bytes = map_bytes;
    report.cloud_bytes = cloud_bytes;
    Ok(SlamOutput { trajectory, map, report, graph, frame_nodes })
}

/// Simulator scans with ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub scans: Vec<PointCloud>,
    pub ground_truth: Vec<Pose>,
    pub timestamps: Vec<f64>,
}

/// Scans of a standard scene, using the config's lidar, seed and frame
/// stride. `frames` overrides the scene's frame count along the same path.
pub fn simulate_scene(name: &str, cfg: &PipelineConfig, frames: Option<usize>) -> Result<SimulatedRun> {
    cfg.lidar.validate()?;
    let (scene, mut spec) = scenes::by_name(name)?;
    if let Some(f) = frames {
        spec.frames = f;
    }
    spec.validate()?;
    let timestamps = spec.timestamps();
    let mut run = SimulatedRun { scans: Vec::new(), ground_truth: Vec::new(), timestamps: Vec::new() };
    for (k, (pose, cloud)) in run_trajectory(&scene, &spec, &cfg.lidar, cfg.seed).into_iter().enumerate() {
        if k % cfg.frame_stride.max(1) == 0 {
            run.scans.push(cloud);
            run.ground_truth.push(pose);
            run.timestamps.push(timestamps[k]);
        }
    }
    Ok(run)
}

/// Simulates `name` and runs SLAM from the true first pose, with metrics.
pub fn run_scene(name: &str, cfg: &PipelineConfig, frames: Option<usize>) -> Result<(SimulatedRun, SlamOutput)> {
    let sim = simulate_scene(name, cfg, frames)?;
    let mut out = run_slam_from(&sim.scans, cfg, sim.ground_truth[0])?;
    out.report.metrics = Some(compute_metrics(&out.trajectory, &sim.ground_truth)?);
    Ok((sim, out))
}

/// Writes map, trajectory, graph, report and plot CSVs into `dir`.
pub fn write_outputs(dir: &Path, out: &SlamOutput, timestamps: &[f64], gt: Option<&[Pose]>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("map.json"), out.map.to_json()?)?;
    fs::write(dir.join("trajectory.txt"), format_trajectory(timestamps, &out.trajectory)?)?;
    if let Some(gt) = gt {
        fs::write(dir.join("ground_truth.txt"), format_trajectory(timestamps, gt)?)?;
    }
    fs::write(dir.join("graph.txt"), out.graph.dump())?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&out.report)?)?;
    fs::write(dir.join("report.txt"), out.report.summary())?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(&out.trajectory, gt))?;
    fs::write(dir.join("map_corners.csv"), map_corners_csv(&out.map))?;
    Ok(())
}
