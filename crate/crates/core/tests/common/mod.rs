//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use planeslam::so3;
use planeslam::{Plane, PlaneSet, Point3, Pose, Vec3};
use rand::Rng;

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation by a uniformly random axis and an angle up to `max_deg`.
pub fn random_rotation<R: Rng>(rng: &mut R, max_deg: f64) -> planeslam::Mat3 {
    let angle = rng.random_range(0.0..=max_deg).to_radians();
    so3::exp(&(random_unit(rng) * angle))
}

pub fn random_pose<R: Rng>(rng: &mut R, max_deg: f64, max_t: f64) -> Pose {
    let t = random_unit(rng) * rng.random_range(0.0..=max_t);
    Pose::new(random_rotation(rng, max_deg), t).unwrap()
}

/// Plane with normal `n` at distance `d`, random in-plane orientation and
/// extents, centered near the foot point.
pub fn plane_with_normal<R: Rng>(rng: &mut R, n: Vec3, d: f64) -> Plane {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u0 = n.cross(&helper).normalize();
    let v0 = n.cross(&u0);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let u = u0 * a.cos() + v0 * a.sin();
    let v = n.cross(&u);
    let offset = u * rng.random_range(-1.0..1.0) + v * rng.random_range(-1.0..1.0);
    Plane::new(n * d + offset, u * rng.random_range(1.0..5.0), v * rng.random_range(1.0..5.0)).unwrap()
}

/// `n` planes whose normals are pairwise at least `min_sep_deg` apart and
/// span all three directions, at distances in `[1, 10]`.
pub fn random_plane_set<R: Rng>(rng: &mut R, n: usize, min_sep_deg: f64) -> PlaneSet {
    let cos_sep = min_sep_deg.to_radians().cos();
    loop {
        let mut normals: Vec<Vec3> = Vec::with_capacity(n);
        let mut tries = 0;
        while normals.len() < n && tries < 10_000 {
            tries += 1;
            let c = random_unit(rng);
            if normals.iter().all(|m| m.dot(&c) < cos_sep) {
                normals.push(c);
            }
        }
        if normals.len() < n {
            continue;
        }
        let m = normals.iter().fold(nalgebra::Matrix3::zeros(), |acc, v| acc + v * v.transpose());
        if m.symmetric_eigenvalues().min() < 0.3 {
            continue;
        }
        return normals
            .into_iter()
            .map(|nv| {
                let d = rng.random_range(1.0..10.0);
                plane_with_normal(rng, nv, d)
            })
            .collect();
    }
}

/// Rotation angle between two rotation matrices (rad), via the quaternion
/// dot product rather than the matrix log.
pub fn rotation_error_rad(a: &planeslam::Mat3, b: &planeslam::Mat3) -> f64 {
    let qa = nalgebra::UnitQuaternion::from_matrix(a);
    let qb = nalgebra::UnitQuaternion::from_matrix(b);
    qa.angle_to(&qb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Hit,
    Miss,
    /// Too close to a box edge, an endpoint or parallel contact to call.
    Ambiguous,
}

/// Signed distance of `x` to the infinite plane of `p`.
fn signed_distance(p: &Plane, x: &Point3) -> f64 {
    let n = p.span_x().cross(&p.span_y()).normalize();
    n.dot(&(x - p.center()))
}

/// Margin of the in-plane projection of `x` inside `p`'s rectangle;
/// negative outside.
fn box_margin(p: &Plane, x: &Point3) -> f64 {
    let r = x - p.center();
    let u = r.dot(&p.span_x().normalize()).abs();
    let v = r.dot(&p.span_y().normalize()).abs();
    (0.5 * p.span_x().norm() - u).min(0.5 * p.span_y().norm() - v)
}

/// Dense-sampling collision oracle: 1000 points along the segment, with the
/// crossing refined by bisection between samples that straddle the plane.
pub fn segment_oracle(a: &Point3, b: &Point3, p: &Plane, eps: f64) -> Oracle {
    const SAMPLES: usize = 1000;
    const ON_PLANE: f64 = 1e-6;
    let at = |s: f64| a + (b - a) * s;
    let da = signed_distance(p, a);
    let db = signed_distance(p, b);
    if (da.abs() < eps && box_margin(p, a) > -eps) || (db.abs() < eps && box_margin(p, b) > -eps) {
        return Oracle::Ambiguous;
    }
    let mut prev = (0.0, da);
    for i in 1..SAMPLES {
        let s = i as f64 / (SAMPLES - 1) as f64;
        let x = at(s);
        let d = signed_distance(p, &x);
        if d.abs() <= ON_PLANE || prev.1.signum() != d.signum() {
            let (mut lo, mut hi) = (prev.0, s);
            let dlo = prev.1;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if signed_distance(p, &at(mid)).signum() == dlo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cross = at(0.5 * (lo + hi));
            let margin = box_margin(p, &cross);
            if margin.abs() < eps {
                return Oracle::Ambiguous;
            }
            return if margin > 0.0 { Oracle::Hit } else { Oracle::Miss };
        }
        prev = (s, d);
    }
    // No sign change: near-parallel segments skimming the plane are unclear.
    let closest = da.abs().min(db.abs());
    if closest < eps {
        Oracle::Ambiguous
    } else {
        Oracle::Miss
    }
}

/// Random plane near the origin with a random orientation.
pub fn random_plane<R: Rng>(rng: &mut R) -> Plane {
    let n = random_unit(rng);
    let d = rng.random_range(-1.0..1.0);
    plane_with_normal(rng, n, d)
}

pub fn random_point<R: Rng>(rng: &mut R, half: f64) -> Point3 {
    Point3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

/// Intersection over union of two coplanar-ish rectangles, both projected
/// into the 2D frame of `reference`.
pub fn iou_in_plane(reference: &Plane, other: &Plane) -> f64 {
    let ex = reference.span_x().normalize();
    let ey = reference.span_y().normalize();
    let project = |p: &Plane| {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in p.corners() {
            let q = [c.dot(&ex), c.dot(&ey)];
            for k in 0..2 {
                lo[k] = lo[k].min(q[k]);
                hi[k] = hi[k].max(q[k]);
            }
        }
        (lo, hi)
    };
    let (al, ah) = project(reference);
    let (bl, bh) = project(other);
    let inter: f64 = (0..2).map(|k| (ah[k].min(bh[k]) - al[k].max(bl[k])).max(0.0)).product();
    let area = |l: [f64; 2], h: [f64; 2]| (h[0] - l[0]) * (h[1] - l[1]);
    inter / (area(al, ah) + area(bl, bh) - inter)
}
