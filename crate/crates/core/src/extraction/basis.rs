use nalgebra::SymmetricEigen;

use super::cluster::Cluster;
use crate::error::{Error, Result};
use crate::geometry::{Basis, Mat3, PointCloud, Vec3};

/// Residual floor for inlier selection in [`refine_normal`] (m).
const MIN_INLIER_BAND: f64 = 0.005;

/// Manhattan extraction basis from the clustered scan.
///
/// `bz` is the normal of the largest cluster within `ground_tolerance_deg` of
/// `+z`. `bx` is the projection onto the ground plane of the normal of the
/// largest cluster within the same tolerance of being perpendicular to `bz`.
/// Cluster size is measured in points.
pub fn find_extraction_basis(clusters: &[Cluster], ground_tolerance_deg: f64) -> Result<Basis> {
    let (g, w) = select_basis_clusters(clusters, ground_tolerance_deg)?;
    basis_from_normals(&clusters[g].avg_normal, &clusters[w].avg_normal)
}

/// Indices of the ground cluster and of the wall cluster that define the
/// extraction basis. Ties keep the earliest cluster.
pub fn select_basis_clusters(clusters: &[Cluster], ground_tolerance_deg: f64) -> Result<(usize, usize)> {
    let tol = ground_tolerance_deg.to_radians();
    let largest = |pred: &dyn Fn(&Cluster) -> bool| {
        let mut best: Option<usize> = None;
        for (i, c) in clusters.iter().enumerate() {
            if pred(c) && best.is_none_or(|b| c.point_indices.len() > clusters[b].point_indices.len()) {
                best = Some(i);
            }
        }
        best
    };
    let g = largest(&|c| c.avg_normal.dot(&Vec3::z()) >= tol.cos())
        .ok_or(Error::NoGround { tolerance_deg: ground_tolerance_deg })?;
    let bz = clusters[g].avg_normal;
    let w = largest(&|c| c.avg_normal.dot(&bz).abs() <= tol.sin()).ok_or(Error::DegenerateBasis)?;
    Ok((g, w))
}

/// `bz = ground`, `bx` = `wall` projected onto the ground plane.
pub fn basis_from_normals(ground: &Vec3, wall: &Vec3) -> Result<Basis> {
    let bz = ground.normalize();
    let bx = (wall - bz * wall.dot(&bz)).try_normalize(1e-12).ok_or(Error::DegenerateBasis)?;
    let by = bz.cross(&bx);
    // by x bz == bx, so [bx by bz] is right-handed.
    Basis::from_xy(bx, by)
}

/// Least-squares normal of a cluster's points with outlier trimming.
///
/// Starts from the cluster's average normal, then alternates an inlier
/// selection (residual within three robust standard deviations of the
/// current plane) with a principal-component fit. The result keeps the
/// orientation of `avg_normal`.
pub fn refine_normal(cluster: &Cluster, cloud: &PointCloud) -> Vec3 {
    let pts: Vec<Vec3> = cluster.point_indices.iter().map(|&i| cloud.points[i]).collect();
    if pts.len() < 3 {
        return cluster.avg_normal;
    }
    let mut n = cluster.avg_normal;
    let mut offsets: Vec<f64> = pts.iter().map(|p| n.dot(p)).collect();
    offsets.sort_by(f64::total_cmp);
    let mut d = offsets[offsets.len() / 2];
    for _ in 0..4 {
        let mut res: Vec<f64> = pts.iter().map(|p| (n.dot(p) - d).abs()).collect();
        let mut sorted = res.clone();
        sorted.sort_by(f64::total_cmp);
        let band = (3.0 * 1.4826 * sorted[sorted.len() / 2]).max(MIN_INLIER_BAND);
        res.iter_mut().for_each(|r| *r = if *r <= band { 1.0 } else { 0.0 });
        let count: f64 = res.iter().sum();
        if count < 3.0 {
            break;
        }
        let centroid = pts.iter().zip(&res).fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w) / count;
        let mut cov = Mat3::zeros();
        for (p, w) in pts.iter().zip(&res) {
            if *w > 0.0 {
                let q = p - centroid;
                cov += q * q.transpose();
            }
        }
        let eig = SymmetricEigen::new(cov);
        let k = eig.eigenvalues.imin();
        let mut m: Vec3 = eig.eigenvectors.column(k).into_owned();
        if m.dot(&cluster.avg_normal) < 0.0 {
            m = -m;
        }
        n = m;
        d = n.dot(&centroid);
    }
    n
}

/// [`find_extraction_basis`] with the two defining normals re-estimated
/// from the raw points by [`refine_normal`].
pub fn find_refined_basis(clusters: &[Cluster], cloud: &PointCloud, ground_tolerance_deg: f64) -> Result<Basis> {
    let (g, w) = select_basis_clusters(clusters, ground_tolerance_deg)?;
    basis_from_normals(&refine_normal(&clusters[g], cloud), &refine_normal(&clusters[w], cloud))
}
