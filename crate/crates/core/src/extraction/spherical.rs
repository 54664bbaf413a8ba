use crate::geometry::PointCloud;

/// Per-point azimuth/elevation, index-aligned with the source cloud.
///
/// Points at the sensor origin have no direction; they are flagged invalid and
/// never meshed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SphericalAngles {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub valid: Vec<bool>,
    pub rejected: usize,
}

impl SphericalAngles {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.theta.len() - self.rejected
    }

    /// Builds angles from raw (theta, phi) pairs, all valid.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        SphericalAngles {
            theta: pairs.iter().map(|p| p.0).collect(),
            phi: pairs.iter().map(|p| p.1).collect(),
            valid: vec![true; pairs.len()],
            rejected: 0,
        }
    }
}

/// `theta = atan2(y, x)`, `phi = atan2(z, sqrt(x² + y²))`.
pub fn spherical_project(cloud: &PointCloud) -> SphericalAngles {
    let n = cloud.len();
    let mut out = SphericalAngles {
        theta: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        rejected: 0,
    };
    for p in &cloud.points {
        let ok = p.norm_squared() > 0.0 && p.iter().all(|v| v.is_finite());
        if ok {
            out.theta.push(p.y.atan2(p.x));
            out.phi.push(p.z.atan2(p.x.hypot(p.y)));
        } else {
            out.theta.push(0.0);
            out.phi.push(0.0);
            out.rejected += 1;
        }
        out.valid.push(ok);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn axis_points() {
        let cloud = PointCloud::new(
            vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 2f64.sqrt())],
            0,
        );
        let a = spherical_project(&cloud);
        assert_eq!((a.theta[0], a.phi[0]), (0.0, 0.0));
        assert!((a.theta[1] - FRAC_PI_2).abs() < 1e-15 && a.phi[1] == 0.0);
        assert!((a.theta[2] - FRAC_PI_4).abs() < 1e-15);
        assert!((a.phi[2] - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(a.rejected, 0);
    }

    #[test]
    fn origin_point_is_rejected_but_keeps_alignment() {
        let cloud = PointCloud::new(
            vec![Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)],
            0,
        );
        let a = spherical_project(&cloud);
        assert_eq!(a.len(), 3);
        assert_eq!(a.rejected, 1);
        assert_eq!(a.valid, vec![true, false, true]);
        assert!((a.theta[2] - FRAC_PI_2).abs() < 1e-15);
    }
}
