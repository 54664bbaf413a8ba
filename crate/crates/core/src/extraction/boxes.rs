use super::cluster::Cluster;
use crate::geometry::{Basis, Plane, PlaneSet, PointCloud};

/// Extent below which a bounding-box side counts as degenerate.
const MIN_EXTENT: f64 = 1e-9;

/// Index of the basis axis closest to `normal` and the sign of the match.
pub fn snap_to_axis(basis: &Basis, normal: &crate::geometry::Vec3) -> (usize, f64) {
    let local = basis.to_local(normal);
    let axis = (0..3).max_by(|&a, &b| local[a].abs().total_cmp(&local[b].abs())).unwrap();
    (axis, if local[axis] < 0.0 { -1.0 } else { 1.0 })
}

/// One rectangle per cluster, axis-aligned in `basis`.
///
/// Cluster points are expressed in basis coordinates, the averaged normal is
/// snapped to the nearest of `±bx, ±by, ±bz`, and the plane is the 2D
/// bounding box over the two remaining coordinates, placed at the mean of the
/// normal-direction coordinate. The spans follow the cyclic axis order after
/// the normal axis, with the second span negated for negative normals, so the
/// plane normal equals the snapped (sensor-facing) normal.
pub fn extract_planes(clusters: &[Cluster], cloud: &PointCloud, basis: &Basis) -> PlaneSet {
    let mut planes = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let (axis, sign) = snap_to_axis(basis, &cluster.avg_normal);
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut height = 0.0;
        for &i in &cluster.point_indices {
            let q = basis.to_local(&cloud.points[i]);
            lo[0] = lo[0].min(q[u]);
            hi[0] = hi[0].max(q[u]);
            lo[1] = lo[1].min(q[v]);
            hi[1] = hi[1].max(q[v]);
            height += q[axis];
        }
        height /= cluster.point_indices.len() as f64;
        let (ext_u, ext_v) = (hi[0] - lo[0], hi[1] - lo[1]);
        if !(ext_u > MIN_EXTENT && ext_v > MIN_EXTENT) {
            continue;
        }
        let mut c = crate::geometry::Vec3::zeros();
        c[axis] = height;
        c[u] = 0.5 * (lo[0] + hi[0]);
        c[v] = 0.5 * (lo[1] + hi[1]);
        let center = basis.to_world(&c);
        let span_x = basis.axis(u) * ext_u;
        let span_y = basis.axis(v) * (sign * ext_v);
        if let Ok(p) = Plane::new(center, span_x, span_y) {
            planes.push(p);
        }
    }
    PlaneSet::new(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn grid_cluster(points: &[Vec3], normal: Vec3) -> (Cluster, PointCloud) {
        let cloud = PointCloud::new(points.to_vec(), 0);
        let c = Cluster {
            triangle_indices: vec![0],
            point_indices: (0..points.len()).collect(),
            avg_normal: normal.normalize(),
        };
        (c, cloud)
    }

    fn square_points() -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..=20 {
            for j in 0..=10 {
                pts.push(Vec3::new(i as f64 * 0.1, j as f64 * 0.1, 3.0));
            }
        }
        pts
    }

    #[test]
    fn bounding_box_of_square_patch() {
        // The patch is overhead, so the sensor-facing normal points down.
        let (c, cloud) = grid_cluster(&square_points(), Vec3::new(0.0, 0.0, -1.0));
        let set = extract_planes(&[c], &cloud, &Basis::identity());
        assert_eq!(set.len(), 1);
        let p = set.planes()[0];
        assert!((p.center() - Vec3::new(1.0, 0.5, 3.0)).norm() < 1e-12);
        assert!((p.span_x() - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((p.span_y().abs() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((p.normal() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn upward_normal_keeps_positive_spans() {
        let (c, cloud) = grid_cluster(&square_points(), Vec3::z());
        let p = extract_planes(&[c], &cloud, &Basis::identity()).planes()[0];
        assert!((p.span_y() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((p.normal() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn normal_snaps_to_nearest_axis() {
        let (axis, sign) = snap_to_axis(&Basis::identity(), &Vec3::new(0.9, 0.1, 0.0).normalize());
        assert_eq!((axis, sign), (0, 1.0));
        let (axis, sign) = snap_to_axis(&Basis::identity(), &Vec3::new(0.1, -0.9, 0.2).normalize());
        assert_eq!((axis, sign), (1, -1.0));
    }

    #[test]
    fn degenerate_box_is_skipped() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 1.0)).collect();
        let (c, cloud) = grid_cluster(&pts, Vec3::z());
        assert!(extract_planes(&[c], &cloud, &Basis::identity()).is_empty());
    }
}
