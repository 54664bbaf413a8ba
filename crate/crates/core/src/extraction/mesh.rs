//! Triangle mesh over a scan: Delaunay triangulation in (theta, phi) angle
//! space, 3D edge-length pruning and oriented per-triangle normals.

use std::collections::HashSet;
use std::f64::consts::PI;

use delaunator::Point;

use super::spherical::SphericalAngles;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

pub const NO_NEIGHBOR: usize = usize::MAX;

/// Triangles whose area falls below this are dropped before normal estimation.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    /// Vertex indices into the point cloud.
    pub triangles: Vec<[usize; 3]>,
    /// Edge-sharing neighbors per triangle, padded with [`NO_NEIGHBOR`].
    pub adjacency: Vec<[usize; 3]>,
    /// Unit normals, index-aligned with `triangles`. Empty until
    /// [`compute_normals`] runs.
    pub normals: Vec<Vec3>,
}

impl TriangleMesh {
    pub fn new(triangles: Vec<[usize; 3]>) -> Self {
        let adjacency = build_adjacency(&triangles);
        TriangleMesh { triangles, adjacency, normals: Vec::new() }
    }

    fn with_normals(triangles: Vec<[usize; 3]>, normals: Vec<Vec3>) -> Self {
        let mut mesh = TriangleMesh::new(triangles);
        mesh.normals = normals;
        mesh
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        !self.triangles.is_empty() && self.normals.len() == self.triangles.len()
    }

    pub fn neighbors(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[t].iter().copied().filter(|&n| n != NO_NEIGHBOR)
    }

    /// Undirected vertex adjacency implied by the triangle edges.
    pub fn vertex_neighbors(&self, n_points: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_points];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                out[a].push(b);
                out[b].push(a);
            }
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        out
    }
}

/// Links triangles that share an edge. Edges shared by more than two
/// triangles (possible along the azimuth seam) are left unlinked so the
/// relation stays symmetric with at most three neighbors.
fn build_adjacency(triangles: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut edges: Vec<(usize, usize, usize)> = Vec::with_capacity(triangles.len() * 3);
    for (ti, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.push((a.min(b), a.max(b), ti));
        }
    }
    edges.sort_unstable();
    let mut adjacency = vec![[NO_NEIGHBOR; 3]; triangles.len()];
    let mut push = |t: usize, n: usize| {
        if let Some(slot) = adjacency[t].iter_mut().find(|s| **s == NO_NEIGHBOR) {
            *slot = n;
        }
    };
    let mut i = 0;
    while i < edges.len() {
        let mut j = i + 1;
        while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
            j += 1;
        }
        if j - i == 2 {
            push(edges[i].2, edges[i + 1].2);
            push(edges[i + 1].2, edges[i].2);
        }
        i = j;
    }
    adjacency
}

/// Delaunay triangulation of the valid angle pairs.
///
/// With `seam_margin > 0`, points within `seam_margin` of `theta = -pi` are
/// duplicated at `theta + 2pi` so that neighbors across the azimuth seam get
/// connected. Only triangles whose centroid falls inside a single `2pi`
/// window are kept, and vertex triples are de-duplicated.
pub fn triangulate(angles: &SphericalAngles, seam_margin: f64) -> Result<TriangleMesh> {
    let (chart, origin) = angle_chart(angles, seam_margin);
    let tri = delaunator::triangulate(&chart);

    let (lo, hi) = (-PI + 0.5 * seam_margin, PI + 0.5 * seam_margin);
    let mut seen = HashSet::with_capacity(tri.triangles.len() / 3);
    let mut triangles = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        if seam_margin > 0.0 {
            let centroid = (chart[t[0]].x + chart[t[1]].x + chart[t[2]].x) / 3.0;
            if !(lo..hi).contains(&centroid) {
                continue;
            }
        }
        let v = [origin[t[0]], origin[t[1]], origin[t[2]]];
        if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
            continue;
        }
        let mut key = v;
        key.sort_unstable();
        if seen.insert(key) {
            triangles.push(v);
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh { points: angles.valid_count() });
    }
    Ok(TriangleMesh::new(triangles))
}

/// Angle-space points fed to the triangulator, with the seam copies appended,
/// and the original point index of each.
pub fn angle_chart(angles: &SphericalAngles, seam_margin: f64) -> (Vec<Point>, Vec<usize>) {
    let mut chart = Vec::with_capacity(angles.len());
    let mut origin = Vec::with_capacity(angles.len());
    for i in (0..angles.len()).filter(|&i| angles.valid[i]) {
        chart.push(Point { x: angles.theta[i], y: angles.phi[i] });
        origin.push(i);
    }
    if seam_margin > 0.0 {
        for i in (0..angles.len()).filter(|&i| angles.valid[i]) {
            if angles.theta[i] < -PI + seam_margin {
                chart.push(Point { x: angles.theta[i] + 2.0 * PI, y: angles.phi[i] });
                origin.push(i);
            }
        }
    }
    (chart, origin)
}

/// Drops triangles with any 3D edge longer than `max_edge`.
pub fn prune_mesh(mesh: &TriangleMesh, cloud: &PointCloud, max_edge: f64) -> TriangleMesh {
    let max2 = max_edge * max_edge;
    let keep: Vec<usize> = (0..mesh.len())
        .filter(|&i| {
            let [a, b, c] = mesh.triangles[i];
            let p = &cloud.points;
            (p[a] - p[b]).norm_squared() <= max2
                && (p[b] - p[c]).norm_squared() <= max2
                && (p[c] - p[a]).norm_squared() <= max2
        })
        .collect();
    if keep.len() == mesh.len() {
        return mesh.clone();
    }
    let triangles = keep.iter().map(|&i| mesh.triangles[i]).collect();
    let normals = if mesh.normals.len() == mesh.len() {
        keep.iter().map(|&i| mesh.normals[i]).collect()
    } else {
        Vec::new()
    };
    TriangleMesh::with_normals(triangles, normals)
}

/// Unit normal per triangle from `e1 × e2`, oriented toward the sensor
/// (`n · centroid < 0`). Triangles below [`MIN_TRIANGLE_AREA`] are removed.
pub fn compute_normals(mesh: &TriangleMesh, cloud: &PointCloud) -> TriangleMesh {
    let mut triangles = Vec::with_capacity(mesh.len());
    let mut normals = Vec::with_capacity(mesh.len());
    for t in &mesh.triangles {
        let (p0, p1, p2) = (cloud.points[t[0]], cloud.points[t[1]], cloud.points[t[2]]);
        let n = (p1 - p0).cross(&(p2 - p0));
        let norm = n.norm();
        if 0.5 * norm < MIN_TRIANGLE_AREA {
            continue;
        }
        let mut n = n / norm;
        let centroid = (p0 + p1 + p2) / 3.0;
        if n.dot(&centroid) > 0.0 {
            n = -n;
        }
        triangles.push(*t);
        normals.push(n);
    }
    TriangleMesh::with_normals(triangles, normals)
}
