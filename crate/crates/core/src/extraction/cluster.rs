use std::collections::VecDeque;

use super::mesh::TriangleMesh;
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Sorted member triangle indices.
    pub triangle_indices: Vec<usize>,
    /// Sorted, de-duplicated vertices of the member triangles.
    pub point_indices: Vec<usize>,
    /// Normalized mean of the member triangle normals.
    pub avg_normal: Vec3,
}

impl Cluster {
    pub fn from_triangles(mesh: &TriangleMesh, mut triangle_indices: Vec<usize>) -> Self {
        triangle_indices.sort_unstable();
        let mut point_indices: Vec<usize> =
            triangle_indices.iter().flat_map(|&t| mesh.triangles[t]).collect();
        point_indices.sort_unstable();
        point_indices.dedup();
        let sum = triangle_indices.iter().fold(Vec3::zeros(), |acc, &t| acc + mesh.normals[t]);
        let avg_normal = sum.try_normalize(0.0).unwrap_or_else(|| mesh.normals[triangle_indices[0]]);
        Cluster { triangle_indices, point_indices, avg_normal }
    }

    pub fn len(&self) -> usize {
        self.triangle_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangle_indices.is_empty()
    }
}

/// Breadth-first region growing over the triangle adjacency graph.
///
/// Roots are taken in increasing triangle index. A neighbor joins the current
/// cluster when its normal's dot product with the *root* normal exceeds
/// `thresh`. Every triangle ends up in exactly one cluster.
pub fn partition_mesh(mesh: &TriangleMesh, thresh: f64) -> Vec<Cluster> {
    let n = mesh.len();
    assert!(mesh.normals.len() == n, "mesh normals must be computed before clustering");
    let mut assigned = vec![false; n];
    // Last root that queued each triangle; avoids re-testing rejected ones.
    let mut queued_by = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();

    for root in 0..n {
        if assigned[root] {
            continue;
        }
        assigned[root] = true;
        queued_by[root] = root;
        let root_normal = mesh.normals[root];
        let mut members = vec![root];
        queue.clear();
        for nb in mesh.neighbors(root) {
            if !assigned[nb] && queued_by[nb] != root {
                queued_by[nb] = root;
                queue.push_back(nb);
            }
        }
        while let Some(i) = queue.pop_front() {
            if assigned[i] || mesh.normals[i].dot(&root_normal) <= thresh {
                continue;
            }
            assigned[i] = true;
            members.push(i);
            for nb in mesh.neighbors(i) {
                if !assigned[nb] && queued_by[nb] != root {
                    queued_by[nb] = root;
                    queue.push_back(nb);
                }
            }
        }
        clusters.push(Cluster::from_triangles(mesh, members));
    }
    clusters
}

/// [`partition_mesh`] followed by dropping clusters with fewer than
/// `min_cluster_size` triangles.
pub fn cluster_mesh(mesh: &TriangleMesh, thresh: f64, min_cluster_size: usize) -> Vec<Cluster> {
    partition_mesh(mesh, thresh).into_iter().filter(|c| c.len() >= min_cluster_size).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::mesh::compute_normals;
    use crate::geometry::PointCloud;

    /// Strip of `n` quads along x on a vertical wall at y = 2, followed by a
    /// second strip on a perpendicular wall at x = 1 when `corner` is set.
    fn walls(n: usize, corner: bool) -> (PointCloud, TriangleMesh) {
        let mut pts = Vec::new();
        for i in 0..=n {
            pts.push(Vec3::new(i as f64 - n as f64 + 1.0, 2.0, -1.0));
            pts.push(Vec3::new(i as f64 - n as f64 + 1.0, 2.0, 1.0));
        }
        if corner {
            for i in 1..=n {
                pts.push(Vec3::new(1.0, 2.0 - i as f64, -1.0));
                pts.push(Vec3::new(1.0, 2.0 - i as f64, 1.0));
            }
        }
        let quads = if corner { 2 * n } else { n };
        let mut tris = Vec::new();
        for q in 0..quads {
            let a = 2 * q;
            tris.push([a, a + 2, a + 3]);
            tris.push([a, a + 3, a + 1]);
        }
        let cloud = PointCloud::new(pts, 0);
        let mesh = compute_normals(&TriangleMesh::new(tris), &cloud);
        (cloud, mesh)
    }

    #[test]
    fn flat_wall_is_one_cluster() {
        let (_, mesh) = walls(10, false);
        let c = cluster_mesh(&mesh, 0.95, 1);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), mesh.len());
        assert!((c[0].avg_normal - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert_eq!(c[0].point_indices.len(), 22);
    }

    #[test]
    fn perpendicular_walls_split_in_two() {
        let (_, mesh) = walls(10, true);
        let c = cluster_mesh(&mesh, 0.9, 1);
        assert_eq!(c.len(), 2);
        let dot = c[0].avg_normal.dot(&c[1].avg_normal);
        assert!(dot.abs() < (2f64).to_radians().sin());
    }

    #[test]
    fn strict_threshold_still_partitions() {
        let (mut cloud, _) = walls(12, false);
        // Perturb every point so neighboring normals differ slightly.
        for (i, p) in cloud.points.iter_mut().enumerate() {
            p.y += 0.03 * ((i * 7919) % 13) as f64 / 13.0;
        }
        let mut tris = Vec::new();
        for q in 0..12 {
            let a = 2 * q;
            tris.push([a, a + 2, a + 3]);
            tris.push([a, a + 3, a + 1]);
        }
        let mesh = compute_normals(&TriangleMesh::new(tris), &cloud);
        let parts = partition_mesh(&mesh, 0.99999);
        assert!(!parts.is_empty());
        let mut all: Vec<usize> = parts.iter().flat_map(|c| c.triangle_indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..mesh.len()).collect::<Vec<_>>());
    }

    #[test]
    fn small_clusters_are_dropped() {
        let (_, mesh) = walls(3, true);
        assert_eq!(cluster_mesh(&mesh, 0.9, 6).len(), 2);
        assert_eq!(cluster_mesh(&mesh, 0.9, 7).len(), 0);
    }
}
