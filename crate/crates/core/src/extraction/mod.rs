//! Scan-to-planes frontend.
//!
//! The stages run in order: spherical projection, Delaunay meshing in angle
//! space, edge pruning, Laplacian smoothing, normal estimation, region-growing
//! clustering, Manhattan basis estimation and per-cluster bounding boxes.
//! Normals come from the smoothed points; plane boxes and heights come from
//! the raw points, since smoothing pulls boundary vertices inward.

mod basis;
mod boxes;
mod cluster;
mod mesh;
mod smoothing;
mod spherical;

pub use basis::{basis_from_normals, find_extraction_basis, find_refined_basis, refine_normal, select_basis_clusters};
pub use boxes::{extract_planes, snap_to_axis};
pub use cluster::{cluster_mesh, partition_mesh, Cluster};
pub use mesh::{angle_chart, compute_normals, prune_mesh, triangulate, TriangleMesh, MIN_TRIANGLE_AREA, NO_NEIGHBOR};
pub use smoothing::smooth_laplacian;
pub use spherical::{spherical_project, SphericalAngles};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Basis, PlaneSet, PointCloud};
use crate::mapping::{saturate, MergeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionParams {
    /// Longest 3D triangle edge kept in the mesh (m).
    pub max_edge: f64,
    pub smoothing_lambda: f64,
    pub smoothing_iterations: usize,
    /// Dot-product threshold against the cluster root normal.
    pub cluster_thresh: f64,
    /// Clusters with fewer triangles are discarded.
    pub min_cluster_size: usize,
    pub ground_tolerance_deg: f64,
    /// Width (rad) of the strip duplicated across the azimuth seam.
    pub seam_margin: f64,
    /// Re-fit the two basis-defining normals to their clusters' raw points.
    pub refine_basis: bool,
    /// Merge same-scan fragments of one face with the map merge rule.
    pub consolidate: bool,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            max_edge: 2.0,
            smoothing_lambda: 0.5,
            smoothing_iterations: 3,
            cluster_thresh: 0.95,
            min_cluster_size: 20,
            ground_tolerance_deg: 15.0,
            seam_margin: 0.2,
            refine_basis: true,
            consolidate: true,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("extraction.{m}")));
        if !(self.max_edge > 0.0) {
            return bad("max_edge must be positive");
        }
        if !(0.0..=1.0).contains(&self.smoothing_lambda) {
            return bad("smoothing_lambda must be in [0, 1]");
        }
        if !(self.cluster_thresh > 0.0 && self.cluster_thresh < 1.0) {
            return bad("cluster_thresh must be in (0, 1)");
        }
        if !(self.ground_tolerance_deg > 0.0 && self.ground_tolerance_deg < 45.0) {
            return bad("ground_tolerance_deg must be in (0, 45)");
        }
        if !(0.0..1.0).contains(&self.seam_margin) {
            return bad("seam_margin must be in [0, 1)");
        }
        Ok(())
    }
}

/// Everything the frontend produced for one scan.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub planes: PlaneSet,
    pub basis: Basis,
    /// True when the basis came from the fallback rather than this scan.
    pub used_fallback_basis: bool,
    pub mesh_triangles: usize,
    pub clusters: usize,
}

/// Extracts the mutually orthogonal plane set of one scan.
pub fn extract(cloud: &PointCloud, params: &ExtractionParams) -> Result<PlaneSet> {
    extract_detailed(cloud, params, &MergeParams::default(), None).map(|e| e.planes)
}

/// Like [`extract`], reusing `fallback_basis` when this scan yields no basis
/// of its own. `merge` drives fragment consolidation.
pub fn extract_detailed(
    cloud: &PointCloud,
    params: &ExtractionParams,
    merge: &MergeParams,
    fallback_basis: Option<&Basis>,
) -> Result<Extraction> {
    if cloud.len() < 3 {
        return Err(Error::ExtractionFailed(format!("cloud has {} points, need at least 3", cloud.len())));
    }
    let angles = spherical_project(cloud);
    let mesh = triangulate(&angles, params.seam_margin)?;
    let mesh = prune_mesh(&mesh, cloud, params.max_edge);
    let smoothed = smooth_laplacian(cloud, &mesh, params.smoothing_iterations, params.smoothing_lambda);
    let mesh = compute_normals(&mesh, &smoothed);
    if mesh.is_empty() {
        return Err(Error::ExtractionFailed("mesh is empty after pruning".into()));
    }
    let clusters = cluster_mesh(&mesh, params.cluster_thresh, params.min_cluster_size);
    let found = if params.refine_basis {
        find_refined_basis(&clusters, cloud, params.ground_tolerance_deg)
    } else {
        find_extraction_basis(&clusters, params.ground_tolerance_deg)
    };
    let (basis, used_fallback_basis) = match found {
        Ok(b) => (b, false),
        Err(e) => match fallback_basis {
            Some(b) => (*b, true),
            None => return Err(e),
        },
    };
    let mut planes = extract_planes(&clusters, cloud, &basis);
    if params.consolidate {
        planes = PlaneSet::new(saturate(planes.into_planes(), merge));
    }
    if planes.is_empty() {
        return Err(Error::ExtractionFailed("no planes extracted".into()));
    }
    Ok(Extraction { planes, basis, used_fallback_basis, mesh_triangles: mesh.len(), clusters: clusters.len() })
}
