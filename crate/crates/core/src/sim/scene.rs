use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Plane, Point3, Vec3};

/// Axis-aligned box, `min < max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = Aabb { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if (0..3).all(|i| self.min[i] < self.max[i] && self.min[i].is_finite() && self.max[i].is_finite()) {
            Ok(())
        } else {
            Err(Error::Parse(format!("box {:?}..{:?} has no volume", self.min, self.max)))
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Bounded horizontal ground rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ground {
    pub min: [f64; 2],
    pub max: [f64; 2],
    #[serde(default)]
    pub z: f64,
}

/// Axis-aligned rectangle: `axis` is the normal axis, fixed at `coord`;
/// `lo`/`hi` bound the two other axes in cyclic order `(axis+1, axis+2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub coord: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Face {
    pub fn axes(&self) -> (usize, usize) {
        ((self.axis + 1) % 3, (self.axis + 2) % 3)
    }

    /// The face as a bounded plane whose normal is `+e_axis`.
    pub fn to_plane(&self) -> Plane {
        let (u, v) = self.axes();
        let mut c = Vec3::zeros();
        c[self.axis] = self.coord;
        c[u] = 0.5 * (self.lo[0] + self.hi[0]);
        c[v] = 0.5 * (self.lo[1] + self.hi[1]);
        let mut sx = Vec3::zeros();
        sx[u] = self.hi[0] - self.lo[0];
        let mut sy = Vec3::zeros();
        sy[v] = self.hi[1] - self.lo[1];
        Plane::new(c, sx, sy).expect("scene faces have positive extent")
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    /// Closed-rectangle containment of the in-face coordinates of `p`.
    pub fn contains_in_plane(&self, p: &Point3) -> bool {
        let (u, v) = self.axes();
        p[u] >= self.lo[0] && p[u] <= self.hi[0] && p[v] >= self.lo[1] && p[v] <= self.hi[1]
    }

    /// Ray parameter of the hit, if any, in `(0, max_t]`.
    pub fn intersect_ray(&self, origin: &Point3, dir: &Vec3, max_t: f64) -> Option<f64> {
        let d = dir[self.axis];
        if d == 0.0 {
            return None;
        }
        let t = (self.coord - origin[self.axis]) / d;
        if !(t > 1e-9 && t <= max_t) {
            return None;
        }
        let p = origin + dir * t;
        self.contains_in_plane(&p).then_some(t)
    }
}

fn box_faces(b: &Aabb) -> [Face; 6] {
    let face = |axis: usize, coord: f64| {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        Face { axis, coord, lo: [b.min[u], b.min[v]], hi: [b.max[u], b.max[v]] }
    };
    [face(0, b.min[0]), face(0, b.max[0]), face(1, b.min[1]), face(1, b.max[1]), face(2, b.min[2]), face(2, b.max[2])]
}

/// Manhattan-world scene made of axis-aligned boxes and an optional ground
/// rectangle. The sensor may sit inside a box (a room) or outside all of them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxScene {
    pub boxes: Vec<Aabb>,
    #[serde(default)]
    pub ground: Option<Ground>,
}

impl BoxScene {
    pub fn validate(&self) -> Result<()> {
        for b in &self.boxes {
            b.validate()?;
        }
        if let Some(g) = &self.ground {
            if !(g.min[0] < g.max[0] && g.min[1] < g.max[1]) {
                return Err(Error::Parse("ground extent has no area".into()));
            }
        }
        Ok(())
    }

    pub fn faces(&self) -> Vec<Face> {
        let mut out: Vec<Face> = self.boxes.iter().flat_map(box_faces).collect();
        if let Some(g) = &self.ground {
            out.push(Face { axis: 2, coord: g.z, lo: g.min, hi: g.max });
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: BoxScene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Nearest face hit along a ray.
pub fn cast_ray(faces: &[Face], origin: &Point3, dir: &Vec3, max_range: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, f) in faces.iter().enumerate() {
        if let Some(t) = f.intersect_ray(origin, dir, max_range) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}
