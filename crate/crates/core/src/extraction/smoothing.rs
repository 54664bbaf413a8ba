use super::mesh::TriangleMesh;
use crate::geometry::{Point3, PointCloud};

/// Umbrella-operator Laplacian smoothing: every meshed point moves a fraction
/// `lambda` toward the centroid of its mesh neighbors, `iterations` times.
/// Updates are simultaneous within an iteration. Unmeshed points stay put.
pub fn smooth_laplacian(cloud: &PointCloud, mesh: &TriangleMesh, iterations: usize, lambda: f64) -> PointCloud {
    let mut points = cloud.points.clone();
    if lambda == 0.0 || iterations == 0 || mesh.is_empty() {
        return PointCloud::new(points, cloud.frame_id);
    }
    let neighbors = mesh.vertex_neighbors(points.len());
    let mut next = points.clone();
    for _ in 0..iterations {
        for (i, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let centroid = nbrs.iter().fold(Point3::zeros(), |acc, &j| acc + points[j]) / nbrs.len() as f64;
            next[i] = points[i] + (centroid - points[i]) * lambda;
        }
        std::mem::swap(&mut points, &mut next);
    }
    PointCloud::new(points, cloud.frame_id)
}
