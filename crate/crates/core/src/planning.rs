//! Segment collision checks against bounded planes and a straight-line RRT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Plane, Point3};
use crate::mapping::PlaneMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    a: Point3,
    b: Point3,
}

impl Segment {
    pub fn new(a: Point3, b: Point3) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidSegment("endpoints coincide".into()));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidSegment("non-finite endpoint".into()));
        }
        Ok(Segment { a, b })
    }

    pub fn a(&self) -> Point3 {
        self.a
    }

    pub fn b(&self) -> Point3 {
        self.b
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Point where `seg` crosses the bounded plane `p`, if any.
///
/// Works in the plane's basis, where the plane is `z = c̄_3`. Touching the
/// box edge or an endpoint counts as a hit; a segment parallel to the plane
/// never hits.
pub fn segment_plane_intersect(seg: &Segment, p: &Plane) -> Option<Point3> {
    let basis = p.basis();
    let a = basis.to_local(&seg.a);
    let v = basis.to_local(&seg.b) - a;
    if v.z == 0.0 {
        return None;
    }
    let (lo, hi, z) = p.local_box();
    let c = (z - a.z) / v.z;
    if !(0.0..=1.0).contains(&c) {
        return None;
    }
    let q = a + v * c;
    let inside = q.x >= lo[0] && q.x <= hi[0] && q.y >= lo[1] && q.y <= hi[1];
    inside.then(|| seg.a + (seg.b - seg.a) * c)
}

pub fn segment_collides_planes(seg: &Segment, planes: &[Plane]) -> bool {
    planes.iter().any(|p| segment_plane_intersect(seg, p).is_some())
}

pub fn segment_collides(seg: &Segment, map: &PlaneMap) -> bool {
    segment_collides_planes(seg, map.planes.planes())
}

/// Axis-aligned sampling region. Equal bounds on an axis pin it, which
/// gives planar trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        let ok = (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] <= self.max[i]);
        if !ok {
            return Err(Error::Config(format!("bounds min {:?} must not exceed max {:?}", self.min, self.max)));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtParams {
    /// Total node count including the root.
    pub n_nodes: usize,
    /// Longest edge (m).
    pub step: f64,
    /// Sample budget as a multiple of `n_nodes`.
    pub max_samples_factor: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams { n_nodes: 1000, step: 2.0, max_samples_factor: 100 }
    }
}

impl RrtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || !(self.step > 0.0) || !self.step.is_finite() || self.max_samples_factor == 0 {
            return Err(Error::Config("rrt: n_nodes, step and max_samples_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Point3>,
    /// `None` only for the root.
    pub parents: Vec<Option<usize>>,
    pub root: usize,
    pub samples: usize,
    /// False when the sample budget ran out before `n_nodes` was reached.
    pub complete: bool,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    nodes: Vec<[f64; 3]>,
    parents: Vec<Option<usize>>,
    root: usize,
    edge_lengths: Vec<f64>,
    samples: usize,
    complete: bool,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(child, parent)` pairs in node order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p)))
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges().map(|(c, p)| (self.nodes[c] - self.nodes[p]).norm()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let f = TreeFile {
            nodes: self.nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
            parents: self.parents.clone(),
            root: self.root,
            edge_lengths: self.edge_lengths(),
            samples: self.samples,
            complete: self.complete,
        };
        Ok(serde_json::to_string(&f)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TreeFile = serde_json::from_str(text)?;
        if f.parents.len() != f.nodes.len() {
            return Err(Error::LengthMismatch { left: f.nodes.len(), right: f.parents.len() });
        }
        Ok(Tree {
            nodes: f.nodes.into_iter().map(Point3::from).collect(),
            parents: f.parents,
            root: f.root,
            samples: f.samples,
            complete: f.complete,
        })
    }
}

/// Straight-line RRT rooted at `start`. Each uniform sample in `bounds`
/// pulls its nearest node at most `step` towards it; the new edge is kept
/// only if it hits no plane.
pub fn rrt_build(planes: &[Plane], start: Point3, bounds: &Bounds, params: &RrtParams, seed: u64) -> Result<Tree> {
    params.validate()?;
    bounds.validate()?;
    if !bounds.contains(&start) {
        return Err(Error::Config(format!("rrt start {:?} lies outside the bounds", start.as_slice())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = Tree { nodes: vec![start], parents: vec![None], root: 0, samples: 0, complete: false };
    let budget = params.max_samples_factor.saturating_mul(params.n_nodes);
    while tree.nodes.len() < params.n_nodes && tree.samples < budget {
        tree.samples += 1;
        let q = Point3::new(
            rng.random_range(bounds.min[0]..=bounds.max[0]),
            rng.random_range(bounds.min[1]..=bounds.max[1]),
            rng.random_range(bounds.min[2]..=bounds.max[2]),
        );
        let (near, dist) = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (q - n).norm()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if dist == 0.0 {
            continue;
        }
        let from = tree.nodes[near];
        let to = if dist > params.step { from + (q - from) * (params.step / dist) } else { q };
        let Ok(seg) = Segment::new(from, to) else {
            continue;
        };
        if !segment_collides_planes(&seg, planes) {
            tree.nodes.push(to);
            tree.parents.push(Some(near));
        }
    }
    tree.complete = tree.nodes.len() >= params.n_nodes;
    if !tree.complete {
        log::warn!("rrt stopped at {} of {} nodes after {} samples", tree.nodes.len(), params.n_nodes, tree.samples);
    }
    Ok(tree)
}
