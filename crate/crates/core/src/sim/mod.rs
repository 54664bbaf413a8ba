//! Synthetic Manhattan-world LiDAR scenes, trajectories and scans.

mod lidar;
mod scene;
pub mod scenes;
mod trajectory;

pub use lidar::{raycast_scan, LidarConfig};
pub use scene::{cast_ray, Aabb, BoxScene, Face, Ground};
pub use trajectory::{frame_seed, run_trajectory, TrajectorySpec, WaypointRecord, ROTATION_WEIGHT};
