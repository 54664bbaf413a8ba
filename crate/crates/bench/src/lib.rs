//! Shared inputs for the criterion benches.

use planeslam::pipeline::{simulate_scene, PipelineConfig};
use planeslam::{Plane, PlaneSet, PointCloud, Pose, Vec3};

/// First scan of a standard scene at the default 10,000 points.
pub fn scene_scan(name: &str) -> PointCloud {
    let cfg = PipelineConfig::default();
    simulate_scene(name, &cfg, Some(2)).expect("standard scene").scans.remove(0)
}

/// Two consecutive frames of a standard scene.
pub fn scan_pair(name: &str) -> (PointCloud, PointCloud) {
    let cfg = PipelineConfig::default();
    let mut sim = simulate_scene(name, &cfg, None).expect("standard scene");
    let b = sim.scans.remove(1);
    (sim.scans.remove(0), b)
}

/// Axis-aligned unit planes on a grid, three normal directions.
pub fn grid_planes(n: usize) -> PlaneSet {
    (0..n)
        .map(|i| {
            let axis = i % 3;
            let mut c = Vec3::new((i / 3) as f64 * 2.0, (i % 7) as f64, (i % 5) as f64);
            c[axis] += 0.5;
            let mut u = Vec3::zeros();
            u[(axis + 1) % 3] = 1.0 + (i % 4) as f64;
            let mut v = Vec3::zeros();
            v[(axis + 2) % 3] = 1.0 + (i % 3) as f64;
            Plane::new(c, u, v).expect("grid plane")
        })
        .collect()
}

pub fn offset_pose() -> Pose {
    Pose::new(planeslam::so3::exp(&Vec3::new(0.02, -0.03, 0.1)), Vec3::new(0.3, -0.2, 0.05)).expect("rotation")
}
