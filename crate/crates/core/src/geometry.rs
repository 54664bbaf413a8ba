//! Core value types: points, clouds, bounded planes, bases, poses and plane
//! sets, plus the pose algebra shared by every other module.
//!
//! A [`Plane`] is a rectangle given by its center and two orthogonal *full*
//! edge vectors, so its corners are `c ± (Px ± Py) / 2`. The plane normal is
//! `Px/|Px| × Py/|Py|`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A point in meters. Alias of the nalgebra vector so the algebra stays terse.
pub type Point3 = Vec3;

/// Absolute tolerance used for orthonormality and invariant checks.
pub const INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_id: u64) -> Self {
        Self { points, frame_id }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Orthonormal right-handed frame stored column-wise as `[bx by bz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis(Mat3);

impl Basis {
    pub fn identity() -> Self {
        Basis(Mat3::identity())
    }

    /// Builds `[bx, by, bx × by]` after checking that `bx` and `by` are
    /// orthonormal.
    pub fn from_xy(bx: Vec3, by: Vec3) -> Result<Self> {
        if (bx.norm() - 1.0).abs() > INVARIANT_TOL || (by.norm() - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidBasis("columns are not unit length".into()));
        }
        if bx.dot(&by).abs() > INVARIANT_TOL {
            return Err(Error::InvalidBasis("columns are not orthogonal".into()));
        }
        Ok(Basis(Mat3::from_columns(&[bx, by, bx.cross(&by)])))
    }

    pub fn from_matrix(m: Mat3) -> Result<Self> {
        if so3::orthonormality_error(&m) > INVARIANT_TOL || (m.determinant() - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidBasis("matrix is not a rotation".into()));
        }
        Ok(Basis(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn x(&self) -> Vec3 {
        self.0.column(0).into_owned()
    }

    pub fn y(&self) -> Vec3 {
        self.0.column(1).into_owned()
    }

    pub fn z(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    /// `B⁻¹ p`, which is `Bᵀ p` for an orthonormal basis.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.0.tr_mul(p)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.0 * p
    }
}

/// Express every point in basis coordinates.
pub fn to_basis(points: &[Point3], basis: &Basis) -> Vec<Point3> {
    points.iter().map(|p| basis.to_local(p)).collect()
}

/// Rectangular bounded plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    center: Point3,
    span_x: Vec3,
    span_y: Vec3,
}

impl Plane {
    pub fn new(center: Point3, span_x: Vec3, span_y: Vec3) -> Result<Self> {
        let (nx, ny) = (span_x.norm(), span_y.norm());
        if !(center.iter().chain(span_x.iter()).chain(span_y.iter())).all(|v| v.is_finite()) {
            return Err(Error::InvalidPlane("non-finite component".into()));
        }
        if nx <= 0.0 || ny <= 0.0 {
            return Err(Error::InvalidPlane("zero-length span vector".into()));
        }
        if span_x.dot(&span_y).abs() > INVARIANT_TOL * nx * ny {
            return Err(Error::InvalidPlane(format!(
                "span vectors are not orthogonal (dot = {:e})",
                span_x.dot(&span_y)
            )));
        }
        Ok(Plane { center, span_x, span_y })
    }

    /// Plane occupying the box `[lo, hi]` of basis coordinates x/y at basis
    /// height `z`, mapped back to the world frame.
    pub fn from_basis_box(basis: &Basis, lo: [f64; 2], hi: [f64; 2], z: f64) -> Result<Self> {
        let center = basis.to_world(&Vec3::new(0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), z));
        Plane::new(center, basis.x() * (hi[0] - lo[0]), basis.y() * (hi[1] - lo[1]))
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn span_x(&self) -> Vec3 {
        self.span_x
    }

    pub fn span_y(&self) -> Vec3 {
        self.span_y
    }

    pub fn extent_x(&self) -> f64 {
        self.span_x.norm()
    }

    pub fn extent_y(&self) -> f64 {
        self.span_y.norm()
    }

    pub fn normal(&self) -> Vec3 {
        (self.span_x / self.extent_x()).cross(&(self.span_y / self.extent_y()))
    }

    /// Signed distance to the origin along the normal, `nᵀc`.
    pub fn distance(&self) -> f64 {
        self.normal().dot(&self.center)
    }

    pub fn area(&self) -> f64 {
        self.extent_x() * self.extent_y()
    }

    pub fn basis(&self) -> Basis {
        plane_basis(self)
    }

    pub fn corners(&self) -> [Point3; 4] {
        let (hx, hy) = (self.span_x * 0.5, self.span_y * 0.5);
        [
            self.center - hx - hy,
            self.center + hx - hy,
            self.center + hx + hy,
            self.center - hx + hy,
        ]
    }

    /// Box `[lo, hi]` of this plane in its own basis, plus its basis height.
    pub fn local_box(&self) -> ([f64; 2], [f64; 2], f64) {
        let c = self.basis().to_local(&self.center);
        let (hx, hy) = (0.5 * self.extent_x(), 0.5 * self.extent_y());
        ([c.x - hx, c.y - hy], [c.x + hx, c.y + hy], c.z)
    }

    pub fn transformed(&self, pose: &Pose) -> Plane {
        transform_plane(self, pose)
    }
}

/// `[Px/|Px|, Py/|Py|, bx × by]`, with `by` re-orthogonalized against `bx`
/// so that planes rebuilt from the basis stay orthogonal to rounding.
pub fn plane_basis(p: &Plane) -> Basis {
    let bx = p.span_x / p.extent_x();
    let by = p.span_y / p.extent_y();
    let by = (by - bx * bx.dot(&by)).normalize();
    Basis(Mat3::from_columns(&[bx, by, bx.cross(&by)]))
}

/// Checked variant for spans that have not been validated yet.
pub fn try_plane_basis(span_x: &Vec3, span_y: &Vec3) -> Result<Basis> {
    let (nx, ny) = (span_x.norm(), span_y.norm());
    if nx == 0.0 || ny == 0.0 || !nx.is_finite() || !ny.is_finite() {
        return Err(Error::InvalidPlane("degenerate span vector".into()));
    }
    let bx = span_x / nx;
    let by = span_y / ny;
    Basis::from_xy(bx, by).map_err(|e| Error::InvalidPlane(e.to_string()))
}

/// Rigid transform.
///
/// `rotation` and `translation` map local coordinates into the parent frame:
/// `x_parent = R x_local + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if so3::orthonormality_error(&rotation) > INVARIANT_TOL
            || (rotation.determinant() - 1.0).abs() > INVARIANT_TOL
        {
            return Err(Error::InvalidPose("rotation is not in SO(3)".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(Pose { rotation, translation })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose { rotation: Mat3::identity(), translation: t }
    }

    pub fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        Pose { rotation, translation }
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        so3::to_quaternion_xyzw(&self.rotation)
    }

    pub fn from_quaternion_xyzw(t: [f64; 3], q: [f64; 4]) -> Self {
        Pose { rotation: so3::from_quaternion_xyzw(q), translation: Vec3::from(t) }
    }
}

pub fn transform_plane(p: &Plane, pose: &Pose) -> Plane {
    Plane {
        center: pose.transform_point(&p.center),
        span_x: pose.rotation * p.span_x,
        span_y: pose.rotation * p.span_y,
    }
}

/// Absolute pose of frame k from the absolute pose of frame k-1 and the
/// relative estimate between them:
///
/// ```text
/// R_k = R_rel · R_{k-1}
/// t_k = t_{k-1} + R_{k-1} · t_rel
/// ```
pub fn compose(parent: &Pose, relative: &Pose) -> Pose {
    Pose {
        rotation: relative.rotation * parent.rotation,
        translation: parent.translation + parent.rotation * relative.translation,
    }
}

/// Inverse of [`compose`]: the relative pose that takes `parent` to `child`.
pub fn relative_between(parent: &Pose, child: &Pose) -> Pose {
    Pose {
        rotation: child.rotation * parent.rotation.transpose(),
        translation: parent.rotation.tr_mul(&(child.translation - parent.translation)),
    }
}

/// Angle in degrees of the rotation taking `a` to `b`.
pub fn rotation_angle_between(a: &Mat3, b: &Mat3) -> f64 {
    let c = (((a.transpose() * b).trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Planes from one scan (local frame) or from the map (world frame), with
/// cached normals, origin distances and centers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaneSet {
    planes: Vec<Plane>,
    normals: Vec<Vec3>,
    distances: Vec<f64>,
    centers: Vec<Point3>,
}

impl PlaneSet {
    pub fn new(planes: Vec<Plane>) -> Self {
        let normals: Vec<Vec3> = planes.iter().map(Plane::normal).collect();
        let centers: Vec<Point3> = planes.iter().map(Plane::center).collect();
        let distances = normals.iter().zip(&centers).map(|(n, c)| n.dot(c)).collect();
        PlaneSet { planes, normals, distances, centers }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Plane> {
        self.planes
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Plane> {
        self.planes.iter()
    }

    pub fn transformed(&self, pose: &Pose) -> PlaneSet {
        PlaneSet::new(self.planes.iter().map(|p| transform_plane(p, pose)).collect())
    }
}

impl FromIterator<Plane> for PlaneSet {
    fn from_iter<I: IntoIterator<Item = Plane>>(iter: I) -> Self {
        PlaneSet::new(iter.into_iter().collect())
    }
}

/// On-disk representation of a plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub center: [f64; 3],
    pub span_x: [f64; 3],
    pub span_y: [f64; 3],
}

impl From<&Plane> for PlaneRecord {
    fn from(p: &Plane) -> Self {
        PlaneRecord { center: p.center.into(), span_x: p.span_x.into(), span_y: p.span_y.into() }
    }
}

impl TryFrom<PlaneRecord> for Plane {
    type Error = Error;

    fn try_from(r: PlaneRecord) -> Result<Plane> {
        Plane::new(r.center.into(), r.span_x.into(), r.span_y.into())
    }
}
