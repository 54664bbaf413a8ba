use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::ExtractionParams;
use crate::graph::GraphParams;
use crate::mapping::MergeParams;
use crate::planning::{Bounds, RrtParams};
use crate::registration::RegistrationParams;
use crate::sim::LidarConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Synthetic noise added to every frame-to-frame registration result, in
/// the frame of the previous scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryNoise {
    /// Per-axis standard deviation of the rotation perturbation (deg).
    pub rotation_sigma_deg: f64,
    /// Per-axis standard deviation of the translation perturbation (m).
    pub translation_sigma: f64,
}

impl OdometryNoise {
    pub fn is_zero(&self) -> bool {
        self.rotation_sigma_deg == 0.0 && self.translation_sigma == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopClosureConfig {
    pub enabled: bool,
    /// Nodes to wait after a closure before searching again.
    pub cooldown: usize,
    /// Closures whose translation residual norm exceeds this are dropped (m).
    pub max_residual: f64,
    /// Closures whose correction to the current relative estimate exceeds
    /// these bounds are dropped as likely mismatches.
    pub max_correction: f64,
    pub max_correction_deg: f64,
}

impl Default for LoopClosureConfig {
    fn default() -> Self {
        LoopClosureConfig { enabled: true, cooldown: 5, max_residual: 0.5, max_correction: 5.0, max_correction_deg: 15.0 }
    }
}

/// Every tunable of a run. Loaded from JSON; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub extraction: ExtractionParams,
    pub registration: RegistrationParams,
    pub mapping: MergeParams,
    pub graph: GraphParams,
    pub loop_closure: LoopClosureConfig,
    pub lidar: LidarConfig,
    pub odometry_noise: OdometryNoise,
    pub rrt: RrtParams,
    /// Sampling region for `plan`; `None` uses the map's bounding box.
    pub rrt_bounds: Option<Bounds>,
    pub rrt_start: [f64; 3],
    /// Every n-th cloud enters the memory comparison.
    pub decimation: usize,
    /// Process every n-th scan.
    pub frame_stride: usize,
    /// Scans per second, for trajectory timestamps of ingested scans.
    pub scan_rate: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            extraction: ExtractionParams::default(),
            registration: RegistrationParams::default(),
            mapping: MergeParams::default(),
            graph: GraphParams::default(),
            loop_closure: LoopClosureConfig::default(),
            lidar: LidarConfig::default(),
            odometry_noise: OdometryNoise::default(),
            rrt: RrtParams::default(),
            rrt_bounds: None,
            rrt_start: [0.0, 0.0, 2.0],
            decimation: 10,
            frame_stride: 1,
            scan_rate: 10.0,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        self.extraction.validate()?;
        self.registration.validate()?;
        self.mapping.validate()?;
        self.graph.validate()?;
        self.lidar.validate()?;
        self.rrt.validate()?;
        if let Some(b) = &self.rrt_bounds {
            b.validate()?;
        }
        let noise = &self.odometry_noise;
        if !(noise.rotation_sigma_deg >= 0.0) || !(noise.translation_sigma >= 0.0) {
            return Err(Error::Config("odometry_noise sigmas must be non-negative".into()));
        }
        let lc = &self.loop_closure;
        if !(lc.max_residual > 0.0) || !(lc.max_correction > 0.0) || !(lc.max_correction_deg > 0.0) {
            return Err(Error::Config("loop_closure limits must be positive".into()));
        }
        if self.decimation == 0 || self.frame_stride == 0 {
            return Err(Error::Config("decimation and frame_stride must be at least 1".into()));
        }
        if !(self.scan_rate > 0.0) {
            return Err(Error::Config("scan_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
