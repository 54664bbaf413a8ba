//! End-to-end runs: configuration, scan and trajectory files, the SLAM
//! loop and its report.

mod config;
pub mod io;
mod report;
mod run;

pub use config::{LoopClosureConfig, OdometryNoise, PipelineConfig, CONFIG_VERSION};
pub use report::{compute_metrics, memory_comparison, FrameTiming, RunReport, TrajectoryMetrics, CLOUD_HEADER_BYTES};
pub use run::{run_scene, run_slam, run_slam_from, simulate_scene, write_outputs, SimulatedRun, SlamOutput};
