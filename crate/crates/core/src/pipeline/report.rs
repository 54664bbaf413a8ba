use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle_between, PointCloud, Pose};
use crate::mapping::PlaneMap;

/// Bytes in the superimposed-cloud header: one little-endian `u64` count.
pub const CLOUD_HEADER_BYTES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameTiming {
    pub frame: u64,
    pub extraction_ms: f64,
    pub registration_ms: f64,
    pub loop_closure_ms: f64,
    pub merging_ms: f64,
    pub total_ms: f64,
}

impl FrameTiming {
    pub fn stage_sum(&self) -> f64 {
        self.extraction_ms + self.registration_ms + self.loop_closure_ms + self.merging_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    /// `sqrt(mean |t_est - t_gt|²)` (m).
    pub rmse: f64,
    /// Standard deviation of the per-frame translation error norms (m).
    pub translation_std: f64,
    pub rotation_mean_deg: f64,
    pub rotation_std_deg: f64,
    pub final_error: f64,
    pub path_length: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Index-aligned trajectory error statistics.
pub fn compute_metrics(est: &[Pose], gt: &[Pose]) -> Result<TrajectoryMetrics> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch { left: est.len(), right: gt.len() });
    }
    if est.is_empty() {
        return Ok(TrajectoryMetrics::default());
    }
    let errs: Vec<f64> = est.iter().zip(gt).map(|(e, g)| (e.translation - g.translation).norm()).collect();
    let rots: Vec<f64> = est.iter().zip(gt).map(|(e, g)| rotation_angle_between(&e.rotation, &g.rotation)).collect();
    let (_, translation_std) = mean_std(&errs);
    let (rotation_mean_deg, rotation_std_deg) = mean_std(&rots);
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    Ok(TrajectoryMetrics {
        rmse,
        translation_std,
        rotation_mean_deg,
        rotation_std_deg,
        final_error: *errs.last().unwrap(),
        path_length: gt.windows(2).map(|w| (w[1].translation - w[0].translation).norm()).sum(),
    })
}

/// `(map_bytes, cloud_bytes)`: the serialized map against every
/// `decimation`-th cloud superimposed as `f32` triplets after a count header.
pub fn memory_comparison(map: &PlaneMap, scans: &[PointCloud], decimation: usize) -> Result<(usize, usize)> {
    let map_bytes = map.to_json()?.len();
    let points: usize = scans.iter().step_by(decimation.max(1)).map(|c| c.len()).sum();
    let cloud_bytes = if points == 0 { 0 } else { CLOUD_HEADER_BYTES + 12 * points };
    Ok((map_bytes, cloud_bytes))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub frames: usize,
    pub failed_frames: Vec<u64>,
    pub loop_closures: Vec<(usize, usize)>,
    /// chi² history of every optimization, in run order.
    pub chi2_histories: Vec<Vec<f64>>,
    pub timings: Vec<FrameTiming>,
    pub metrics: Option<TrajectoryMetrics>,
    pub map_planes: usize,
    pub map_bytes: usize,
    pub cloud_bytes: usize,
}

impl RunReport {
    pub fn mean_timing(&self) -> FrameTiming {
        let n = self.timings.len().max(1) as f64;
        let mut m = FrameTiming::default();
        for t in &self.timings {
            m.extraction_ms += t.extraction_ms / n;
            m.registration_ms += t.registration_ms / n;
            m.loop_closure_ms += t.loop_closure_ms / n;
            m.merging_ms += t.merging_ms / n;
            m.total_ms += t.total_ms / n;
        }
        m
    }

    pub fn memory_ratio(&self) -> f64 {
        if self.cloud_bytes == 0 {
            return f64::INFINITY;
        }
        self.map_bytes as f64 / self.cloud_bytes as f64
    }

    /// Average runtime per module and frame, one row per stage.
    pub fn timing_table(&self) -> String {
        let m = self.mean_timing();
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:>12}", "Module", "Runtime (ms)");
        for (name, v) in [
            ("Plane extraction", m.extraction_ms),
            ("Registration", m.registration_ms),
            ("Loop closure", m.loop_closure_ms),
            ("Merging", m.merging_ms),
            ("Total", m.total_ms),
        ] {
            let _ = writeln!(s, "{name:<18} {v:>12.2}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = self.timing_table();
        let _ = writeln!(s);
        let _ = writeln!(s, "frames {} (failed {}), loop closures {}", self.frames, self.failed_frames.len(), self.loop_closures.len());
        if let Some(m) = &self.metrics {
            let pct = if m.path_length > 0.0 { 100.0 * m.rmse / m.path_length } else { 0.0 };
            let _ = writeln!(
                s,
                "translation RMSE {:.4} m ({pct:.2}% of {:.1} m), std {:.4} m, final error {:.4} m",
                m.rmse, m.path_length, m.translation_std, m.final_error
            );
            let _ = writeln!(s, "rotation error {:.4} deg, std {:.4} deg", m.rotation_mean_deg, m.rotation_std_deg);
        }
        let _ = writeln!(
            s,
            "map {} planes, {} bytes; point clouds {} bytes; ratio {:.5}",
            self.map_planes,
            self.map_bytes,
            self.cloud_bytes,
            self.memory_ratio()
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, Vec3};
    use crate::so3;

    fn line(n: usize) -> Vec<Pose> {
        (0..n).map(|k| Pose::from_translation(Vec3::new(k as f64, 0.0, 0.0))).collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let m = compute_metrics(&line(5), &line(5)).unwrap();
        assert_eq!((m.rmse, m.translation_std, m.rotation_mean_deg, m.rotation_std_deg), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(m.path_length, 4.0);
    }

    #[test]
    fn constant_offset() {
        let gt = line(6);
        let est: Vec<Pose> = gt.iter().map(|p| Pose::from_translation(p.translation + Vec3::new(0.0, 1.0, 0.0))).collect();
        let m = compute_metrics(&est, &gt).unwrap();
        assert!((m.rmse - 1.0).abs() < 1e-15);
        assert!(m.translation_std.abs() < 1e-15);
    }

    #[test]
    fn single_rotated_frame() {
        let gt = vec![Pose::identity()];
        let est = vec![Pose::new(so3::rot_x(2f64.to_radians()), Vec3::zeros()).unwrap()];
        let m = compute_metrics(&est, &gt).unwrap();
        assert!((m.rotation_mean_deg - 2.0).abs() < 1e-9);
        assert!(compute_metrics(&est, &line(2)).is_err());
    }

    #[test]
    fn memory_sizes() {
        let empty = PlaneMap::new();
        let (m, c) = memory_comparison(&empty, &[], 10).unwrap();
        assert_eq!(m, empty.to_json().unwrap().len());
        assert_eq!(c, 0);
        let cloud = PointCloud::new(vec![Point3::zeros(); 1000], 0);
        let (_, c) = memory_comparison(&empty, std::slice::from_ref(&cloud), 10).unwrap();
        assert_eq!(c, 12_000 + CLOUD_HEADER_BYTES);
        let clouds: Vec<PointCloud> = (0..25).map(|_| cloud.clone()).collect();
        assert_eq!(memory_comparison(&empty, &clouds, 10).unwrap().1, 36_000 + CLOUD_HEADER_BYTES);
    }

    #[test]
    fn table_has_one_row_per_stage() {
        let r = RunReport {
            timings: vec![
                FrameTiming { frame: 0, extraction_ms: 10.0, registration_ms: 1.0, loop_closure_ms: 0.0, merging_ms: 2.0, total_ms: 13.0 },
                FrameTiming { frame: 1, extraction_ms: 20.0, registration_ms: 3.0, loop_closure_ms: 4.0, merging_ms: 2.0, total_ms: 29.0 },
            ],
            ..Default::default()
        };
        let t = r.timing_table();
        assert_eq!(t.lines().count(), 6);
        assert!(t.contains("Plane extraction") && t.contains("15.00") && t.contains("21.00"));
    }
}
