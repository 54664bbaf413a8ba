use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{cast_ray, BoxScene};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose, Vec3};

/// Spinning multi-channel LiDAR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub channels: usize,
    pub vertical_fov_deg: f64,
    pub horizontal_fov_deg: f64,
    pub points_per_scan: usize,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            channels: 16,
            vertical_fov_deg: 60.0,
            horizontal_fov_deg: 360.0,
            points_per_scan: 10_000,
            max_range: 100.0,
            range_noise_sigma: 0.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lidar.{m}")));
        if self.channels == 0 || self.points_per_scan < self.channels {
            return bad("channels must be positive and at most points_per_scan");
        }
        if !(self.vertical_fov_deg > 0.0 && self.vertical_fov_deg < 180.0) {
            return bad("vertical_fov_deg must be in (0, 180)");
        }
        if !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg <= 360.0) {
            return bad("horizontal_fov_deg must be in (0, 360]");
        }
        if !(self.max_range > 0.0) || !(self.range_noise_sigma >= 0.0) {
            return bad("max_range must be positive and range_noise_sigma non-negative");
        }
        Ok(())
    }

    pub fn azimuth_steps(&self) -> usize {
        self.points_per_scan / self.channels
    }

    /// Unit ray directions in the sensor frame, azimuth-major.
    pub fn ray_directions(&self) -> Vec<Vec3> {
        let steps = self.azimuth_steps();
        let vfov = self.vertical_fov_deg.to_radians();
        let hfov = self.horizontal_fov_deg.to_radians();
        let elevations: Vec<f64> = (0..self.channels)
            .map(|c| if self.channels == 1 { 0.0 } else { -0.5 * vfov + vfov * c as f64 / (self.channels - 1) as f64 })
            .collect();
        let mut dirs = Vec::with_capacity(steps * self.channels);
        for a in 0..steps {
            let az = -0.5 * hfov + hfov * (a as f64 + 0.5) / steps as f64;
            let (sa, ca) = az.sin_cos();
            for &el in &elevations {
                let (se, ce) = el.sin_cos();
                dirs.push(Vec3::new(ce * ca, ce * sa, se));
            }
        }
        dirs
    }
}

/// Gaussian sample redrawn until it lies within three standard deviations.
fn truncated_sample(n: &Normal<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = n.sample(rng);
        if x.abs() <= 3.0 * sigma {
            return x;
        }
    }
}

/// One scan from `pose`, returned in the sensor frame. Misses are dropped.
pub fn raycast_scan(scene: &BoxScene, pose: &Pose, cfg: &LidarConfig, seed: u64) -> PointCloud {
    let faces = scene.faces();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (cfg.range_noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.range_noise_sigma).unwrap());
    let origin = pose.translation;
    let mut points = Vec::with_capacity(cfg.points_per_scan);
    for dir in cfg.ray_directions() {
        let world_dir = pose.rotation * dir;
        if let Some((range, _)) = cast_ray(&faces, &origin, &world_dir, cfg.max_range) {
            let r = match &noise {
                Some(n) => (range + truncated_sample(n, cfg.range_noise_sigma, &mut rng)).max(1e-3),
                None => range,
            };
            points.push(dir * r);
        }
    }
    PointCloud::new(points, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::Aabb;

    fn room() -> BoxScene {
        BoxScene { boxes: vec![Aabb::new([-5.0, -4.0, 0.0], [5.0, 4.0, 3.0]).unwrap()], ground: None }
    }

    #[test]
    fn single_forward_ray_hits_wall() {
        let scene = BoxScene { boxes: vec![Aabb::new([5.0, -1.0, -1.0], [6.0, 1.0, 1.0]).unwrap()], ground: None };
        let cfg = LidarConfig { channels: 1, points_per_scan: 1, ..Default::default() };
        let cloud = raycast_scan(&scene, &Pose::identity(), &cfg, 0);
        assert_eq!(cloud.points, vec![Vec3::new(5.0, 0.0, 0.0)]);
    }

    #[test]
    fn empty_scene_gives_empty_cloud() {
        let cloud = raycast_scan(&BoxScene::default(), &Pose::identity(), &LidarConfig::default(), 0);
        assert!(cloud.is_empty());
    }

    #[test]
    fn closed_room_has_no_misses() {
        let pose = Pose::from_translation(Vec3::new(0.3, -0.2, 1.5));
        let cloud = raycast_scan(&room(), &pose, &LidarConfig::default(), 0);
        assert_eq!(cloud.len(), 10_000);
    }

    #[test]
    fn points_lie_on_faces() {
        let scene = room();
        let faces = scene.faces();
        let pose = Pose::new(crate::so3::rot_z(0.4), Vec3::new(0.3, -0.2, 1.5)).unwrap();
        let sigma = 0.02;
        let cfg = LidarConfig { range_noise_sigma: sigma, ..Default::default() };
        let cloud = raycast_scan(&scene, &pose, &cfg, 3);
        for p in &cloud.points {
            let w = pose.transform_point(p);
            let best = faces
                .iter()
                .map(|f| {
                    let plane = f.to_plane();
                    let (lo, hi, z) = plane.local_box();
                    let q = plane.basis().to_local(&w);
                    let dx = (lo[0] - q.x).max(q.x - hi[0]).max(0.0);
                    let dy = (lo[1] - q.y).max(q.y - hi[1]).max(0.0);
                    (dx * dx + dy * dy + (q.z - z).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-9 + 3.0 * sigma, "{best}");
        }
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let cfg = LidarConfig { range_noise_sigma: 0.02, ..Default::default() };
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let a = raycast_scan(&room(), &pose, &cfg, 9);
        let b = raycast_scan(&room(), &pose, &cfg, 9);
        let c = raycast_scan(&room(), &pose, &cfg, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
