//! Standard scenes with matching trajectories.

use super::scene::{Aabb, BoxScene, Ground};
use super::trajectory::TrajectorySpec;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::so3;

pub const SCENE_NAMES: [&str; 3] = ["room", "blocks", "loop"];

fn aabb(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(min, max).expect("standard scene boxes have volume")
}

fn level(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
    Pose::from_parts_unchecked(so3::rot_z(yaw), Vec3::new(x, y, z))
}

/// Waypoints of a planar polyline with each corner replaced by a circular
/// arc of `radius`; heading follows the direction of travel.
fn rounded_path(corners: &[[f64; 2]], radius: f64, z: f64) -> Vec<Pose> {
    let heading = |a: [f64; 2], b: [f64; 2]| (b[1] - a[1]).atan2(b[0] - a[0]);
    let mut out = vec![level(corners[0][0], corners[0][1], z, heading(corners[0], corners[1]))];
    for w in corners.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let h0 = heading(a, b);
        let h1 = heading(b, c);
        let mut turn = h1 - h0;
        while turn > std::f64::consts::PI {
            turn -= 2.0 * std::f64::consts::PI;
        }
        while turn < -std::f64::consts::PI {
            turn += 2.0 * std::f64::consts::PI;
        }
        let cut = radius * (0.5 * turn.abs()).tan();
        let start = [b[0] - cut * h0.cos(), b[1] - cut * h0.sin()];
        let side = turn.signum();
        let center = [start[0] - side * radius * h0.sin(), start[1] + side * radius * h0.cos()];
        let steps = 6;
        for s in 0..=steps {
            let h = h0 + turn * s as f64 / steps as f64;
            let p = [center[0] + side * radius * h.sin(), center[1] - side * radius * h.cos()];
            out.push(level(p[0], p[1], z, h));
        }
    }
    let n = corners.len();
    out.push(level(corners[n - 1][0], corners[n - 1][1], z, heading(corners[n - 2], corners[n - 1])));
    out
}

/// A single closed 10 m x 8 m x 3 m room.
pub fn room() -> (BoxScene, TrajectorySpec) {
    let scene = BoxScene { boxes: vec![aabb([-5.0, -4.0, 0.0], [5.0, 4.0, 3.0])], ground: None };
    let spec = TrajectorySpec {
        waypoints: vec![level(-1.5, -0.5, 1.4, 0.1), level(1.5, 0.7, 1.4, 0.6)],
        scan_rate: 10.0,
        frames: 20,
    };
    (scene, spec)
}

/// Open ground with six tall blocks, flown along an L-shaped path of about
/// 63 m at 2 m altitude.
pub fn blocks() -> (BoxScene, TrajectorySpec) {
    let scene = BoxScene {
        boxes: vec![
            aabb([4.0, 5.0, 0.0], [14.0, 13.0, 12.0]),
            aabb([18.0, -13.0, 0.0], [26.0, -5.0, 10.0]),
            aabb([-10.0, -12.0, 0.0], [-2.0, -4.0, 9.0]),
            aabb([41.0, 8.0, 0.0], [49.0, 18.0, 11.0]),
            aabb([22.0, 16.0, 0.0], [30.0, 26.0, 12.0]),
            aabb([36.0, 34.0, 0.0], [46.0, 42.0, 10.0]),
        ],
        ground: Some(Ground { min: [-100.0, -100.0], max: [100.0, 100.0], z: 0.0 }),
    };
    let spec = TrajectorySpec {
        waypoints: rounded_path(&[[0.0, 0.0], [35.0, 0.0], [35.0, 30.0]], 5.0, 2.0),
        scan_rate: 10.0,
        frames: 120,
    };
    (scene, spec)
}

/// Rectangular corridor circuit around a central block, 5 m wide and 3 m
/// high, with wall pillars. The path returns to its start.
pub fn loop_circuit() -> (BoxScene, TrajectorySpec) {
    let mut boxes = vec![aabb([-20.0, -15.0, 0.0], [20.0, 15.0, 3.0]), aabb([-15.0, -10.0, 0.0], [15.0, 10.0, 3.0])];
    for i in 0..6 {
        let x = -14.0 + 5.5 * i as f64;
        if i % 2 == 0 {
            boxes.push(aabb([x, -15.0, 0.0], [x + 1.5, -14.0, 3.0]));
            boxes.push(aabb([x + 2.0, 10.0, 0.0], [x + 3.5, 11.0, 3.0]));
        } else {
            boxes.push(aabb([x, -11.0, 0.0], [x + 1.5, -10.0, 3.0]));
            boxes.push(aabb([x + 2.0, 14.0, 0.0], [x + 3.5, 15.0, 3.0]));
        }
    }
    for i in 0..3 {
        let y = -8.0 + 6.0 * i as f64;
        boxes.push(aabb([15.0, y, 0.0], [16.0, y + 1.5, 3.0]));
        boxes.push(aabb([-20.0, y + 2.0, 0.0], [-19.0, y + 3.5, 3.0]));
    }
    let scene = BoxScene { boxes, ground: None };
    let corners = [[0.0, -12.5], [17.5, -12.5], [17.5, 12.5], [-17.5, 12.5], [-17.5, -12.5], [-1.0, -12.5]];
    let spec = TrajectorySpec { waypoints: rounded_path(&corners, 2.5, 1.5), scan_rate: 10.0, frames: 200 };
    (scene, spec)
}

pub fn by_name(name: &str) -> Result<(BoxScene, TrajectorySpec)> {
    match name {
        "room" => Ok(room()),
        "blocks" => Ok(blocks()),
        "loop" => Ok(loop_circuit()),
        other => Err(Error::Config(format!("unknown scene '{other}', expected one of {SCENE_NAMES:?}"))),
    }
}

/// Total translation length of the frame poses.
pub fn path_length(poses: &[Pose]) -> f64 {
    poses.windows(2).map(|w| (w[1].translation - w[0].translation).norm()).sum()
}
