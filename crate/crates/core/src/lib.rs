//! Plane-based LiDAR SLAM for Manhattan-world environments.

pub mod error;
pub mod extraction;
pub mod geometry;
pub mod graph;
pub mod mapping;
pub mod pipeline;
pub mod planning;
pub mod registration;
pub mod sim;
pub mod so3;

pub use error::{Error, Result};
pub use geometry::{Basis, Mat3, Plane, PlaneSet, Point3, PointCloud, Pose, Vec3};
