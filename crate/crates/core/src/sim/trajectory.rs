use serde::{Deserialize, Serialize};

use super::lidar::{raycast_scan, LidarConfig};
use super::scene::BoxScene;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose};
use crate::so3;

/// Meters of path length charged per radian of rotation when spacing frames.
pub const ROTATION_WEIGHT: f64 = 1.0;

/// Waypoint pose in files: translation plus `[qx, qy, qz, qw]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointRecord {
    pub translation: [f64; 3],
    pub quaternion: [f64; 4],
}

impl From<&Pose> for WaypointRecord {
    fn from(p: &Pose) -> Self {
        WaypointRecord { translation: p.translation.into(), quaternion: p.quaternion_xyzw() }
    }
}

impl From<WaypointRecord> for Pose {
    fn from(w: WaypointRecord) -> Self {
        Pose::from_quaternion_xyzw(w.translation, w.quaternion)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Pose>,
    /// Scans per second; sets the frame timestamps.
    pub scan_rate: f64,
    /// Number of scans, spread evenly along the path.
    pub frames: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    waypoints: Vec<WaypointRecord>,
    scan_rate: f64,
    frames: usize,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::Parse("trajectory needs at least one waypoint".into()));
        }
        if !(self.scan_rate > 0.0) || self.frames == 0 {
            return Err(Error::Parse("scan_rate and frames must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TrajectoryFile = serde_json::from_str(text)?;
        let spec = TrajectorySpec {
            waypoints: f.waypoints.into_iter().map(Pose::from).collect(),
            scan_rate: f.scan_rate,
            frames: f.frames,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = TrajectoryFile {
            waypoints: self.waypoints.iter().map(WaypointRecord::from).collect(),
            scan_rate: self.scan_rate,
            frames: self.frames,
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// Frame poses at equal path-length spacing, with linear translation and
    /// spherical-linear rotation inside each waypoint segment.
    pub fn poses(&self) -> Vec<Pose> {
        let wp = &self.waypoints;
        let mut cumulative = vec![0.0];
        for w in wp.windows(2) {
            let angle = so3::log(&(w[1].rotation * w[0].rotation.transpose())).norm();
            let len = (w[1].translation - w[0].translation).norm() + ROTATION_WEIGHT * angle;
            cumulative.push(cumulative.last().unwrap() + len);
        }
        let total = *cumulative.last().unwrap();
        (0..self.frames)
            .map(|k| {
                if total == 0.0 || self.frames == 1 {
                    return wp[0];
                }
                let s = total * k as f64 / (self.frames - 1) as f64;
                let seg = cumulative.partition_point(|&c| c <= s).clamp(1, wp.len() - 1) - 1;
                let len = cumulative[seg + 1] - cumulative[seg];
                let u = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
                let (a, b) = (&wp[seg], &wp[seg + 1]);
                Pose::from_parts_unchecked(
                    so3::slerp(&a.rotation, &b.rotation, u),
                    a.translation + (b.translation - a.translation) * u,
                )
            })
            .collect()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.frames).map(|k| k as f64 / self.scan_rate).collect()
    }
}

/// Seed for frame `k` of a run seeded with `seed`.
pub fn frame_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// One ground-truth pose and sensor-frame scan per frame.
pub fn run_trajectory(scene: &BoxScene, spec: &TrajectorySpec, cfg: &LidarConfig, seed: u64) -> Vec<(Pose, PointCloud)> {
    spec.poses()
        .into_iter()
        .enumerate()
        .map(|(k, pose)| {
            let mut cloud = raycast_scan(scene, &pose, cfg, frame_seed(seed, k));
            cloud.frame_id = k as u64;
            (pose, cloud)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::sim::scene::Aabb;

    fn room() -> BoxScene {
        BoxScene { boxes: vec![Aabb::new([-20.0, -4.0, 0.0], [20.0, 4.0, 3.0]).unwrap()], ground: None }
    }

    #[test]
    fn static_pose_gives_identical_clouds() {
        let spec = TrajectorySpec { waypoints: vec![Pose::from_translation(Vec3::new(0.0, 0.0, 1.0))], scan_rate: 10.0, frames: 10 };
        let cfg = LidarConfig { points_per_scan: 1600, ..Default::default() };
        let run = run_trajectory(&room(), &spec, &cfg, 1);
        assert_eq!(run.len(), 10);
        for (k, (_, c)) in run.iter().enumerate() {
            assert_eq!(c.points, run[0].1.points);
            assert_eq!(c.frame_id, k as u64);
        }
    }

    #[test]
    fn two_waypoints_give_unit_spacing() {
        let a = Pose::from_translation(Vec3::new(-5.0, 0.0, 1.0));
        let b = Pose::from_translation(Vec3::new(5.0, 0.0, 1.0));
        let spec = TrajectorySpec { waypoints: vec![a, b], scan_rate: 10.0, frames: 11 };
        let poses = spec.poses();
        for (k, p) in poses.iter().enumerate() {
            assert!((p.translation - Vec3::new(-5.0 + k as f64, 0.0, 1.0)).norm() < 1e-12);
        }
        assert!((spec.timestamps()[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_slerped() {
        let a = Pose::identity();
        let b = Pose::new(so3::rot_z(1.0), Vec3::zeros()).unwrap();
        let spec = TrajectorySpec { waypoints: vec![a, b], scan_rate: 10.0, frames: 5 };
        let poses = spec.poses();
        assert!((poses[2].rotation - so3::rot_z(0.5)).amax() < 1e-12);
        assert!((poses[4].rotation - so3::rot_z(1.0)).amax() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let spec = TrajectorySpec {
            waypoints: vec![Pose::identity(), Pose::new(so3::rot_z(0.3), Vec3::new(1.0, 2.0, 3.0)).unwrap()],
            scan_rate: 10.0,
            frames: 7,
        };
        let back = TrajectorySpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back.frames, 7);
        for (p, q) in spec.waypoints.iter().zip(&back.waypoints) {
            assert!((p.rotation - q.rotation).amax() < 1e-12);
            assert!((p.translation - q.translation).norm() < 1e-12);
        }
        assert!(TrajectorySpec::from_json(r#"{"waypoints":[],"scan_rate":10,"frames":3}"#).is_err());
    }
}
