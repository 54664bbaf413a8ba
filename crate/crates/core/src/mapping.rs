//! Global plane map built by merging registered plane sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Basis, Plane, PlaneRecord, PlaneSet, Pose, Vec3};

/// Slack on the closed box-overlap test, absorbing round-off between bases.
const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeParams {
    /// Minimum `|n_s · n_t|` for two planes to count as parallel.
    pub coplanar_thresh: f64,
    /// Maximum point-to-plane distance between centers (m).
    pub dist_thresh: f64,
    /// Planes smaller than this are dropped during cleanup (m²).
    pub min_area: f64,
    /// Edges closer than this to a neighboring plane are snapped onto it (m).
    pub edge_fuse_dist: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams { coplanar_thresh: 0.99, dist_thresh: 0.2, min_area: 0.05, edge_fuse_dist: 0.15 }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mapping.{m}")));
        if !(self.coplanar_thresh > 0.0 && self.coplanar_thresh < 1.0) {
            return bad("coplanar_thresh must be in (0, 1)");
        }
        if !(self.dist_thresh > 0.0) {
            return bad("dist_thresh must be positive");
        }
        if !(self.min_area >= 0.0) || !(self.edge_fuse_dist >= 0.0) {
            return bad("min_area and edge_fuse_dist must be non-negative");
        }
        Ok(())
    }
}

/// 2D bounding box of `p`'s corners in `basis` coordinates.
fn projected_box(p: &Plane, basis: &Basis) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in p.corners() {
        let q = basis.to_local(&c);
        for k in 0..2 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    (lo, hi)
}

fn boxes_overlap(a: ([f64; 2], [f64; 2]), b: ([f64; 2], [f64; 2])) -> bool {
    (0..2).all(|k| a.0[k] <= b.1[k] + OVERLAP_EPS && b.0[k] <= a.1[k] + OVERLAP_EPS)
}

/// Whether `pt` should be merged into `ps`: parallel normals, small
/// point-to-plane distance, and overlapping boxes in `ps`'s basis.
pub fn merge_condition(ps: &Plane, pt: &Plane, params: &MergeParams) -> bool {
    let n = ps.normal();
    if n.dot(&pt.normal()).abs() <= params.coplanar_thresh {
        return false;
    }
    if n.dot(&(pt.center() - ps.center())).abs() >= params.dist_thresh {
        return false;
    }
    let basis = ps.basis();
    boxes_overlap(projected_box(ps, &basis), projected_box(pt, &basis))
}

fn mutual_condition(a: &Plane, b: &Plane, params: &MergeParams) -> bool {
    merge_condition(a, b, params) || merge_condition(b, a, params)
}

/// Single plane covering `source` and all of `others`, expressed in the
/// source basis. The height is the area-weighted mean of the constituents.
pub fn merge_group(source: &Plane, others: &[Plane]) -> Plane {
    if others.is_empty() {
        return *source;
    }
    let basis = source.basis();
    let (mut lo, mut hi) = projected_box(source, &basis);
    let mut weight = source.area();
    let mut height = weight * basis.to_local(&source.center()).z;
    for p in others {
        let (l, h) = projected_box(p, &basis);
        for k in 0..2 {
            lo[k] = lo[k].min(l[k]);
            hi[k] = hi[k].max(h[k]);
        }
        weight += p.area();
        height += p.area() * basis.to_local(&p.center()).z;
    }
    Plane::from_basis_box(&basis, lo, hi, height / weight).expect("merged box contains a valid plane")
}

/// Merges every pair satisfying [`merge_condition`] in either order until
/// no such pair remains. Earlier planes absorb later ones.
pub fn saturate(planes: Vec<Plane>, params: &MergeParams) -> Vec<Plane> {
    let mut planes = planes;
    'outer: loop {
        for i in 0..planes.len() {
            let group: Vec<usize> =
                (0..planes.len()).filter(|&j| j != i && mutual_condition(&planes[i], &planes[j], params)).collect();
            if group.is_empty() {
                continue;
            }
            let others: Vec<Plane> = group.iter().map(|&j| planes[j]).collect();
            planes[i] = merge_group(&planes[i], &others);
            for &j in group.iter().rev() {
                planes.remove(j);
            }
            continue 'outer;
        }
        return planes;
    }
}

/// Merges `new_set` into `map_set` (both in the world frame).
///
/// Each new plane absorbs every still-unclaimed map plane it satisfies the
/// merge condition with; the result is then saturated. Unmatched map planes
/// keep their order and precede the new planes.
pub fn merge_plane_sets(map_set: &PlaneSet, new_set: &PlaneSet, params: &MergeParams) -> PlaneSet {
    let mut remaining: Vec<Option<Plane>> = map_set.iter().copied().map(Some).collect();
    let mut merged = Vec::with_capacity(new_set.len());
    for s in new_set.iter() {
        let mut others = Vec::new();
        for slot in remaining.iter_mut() {
            if let Some(t) = slot {
                if merge_condition(s, t, params) {
                    others.push(*t);
                    *slot = None;
                }
            }
        }
        merged.push(merge_group(s, &others));
    }
    let all: Vec<Plane> = remaining.into_iter().flatten().chain(merged).collect();
    PlaneSet::new(saturate(all, params))
}

/// Proposed new coordinate for one edge of one plane.
#[derive(Debug, Clone, Copy)]
struct Snap {
    /// 0..2 = lo of local axis k, 2..4 = hi of local axis k - 2.
    edge: usize,
    value: f64,
    gap: f64,
}

/// Interval `[lo, hi]` of `p` along world direction `dir`.
fn span_along(p: &Plane, dir: &Vec3) -> (f64, f64) {
    let vals = p.corners().map(|c| c.dot(dir));
    (vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn intervals_touch(a: (f64, f64), b: (f64, f64), slack: f64) -> bool {
    a.0 <= b.1 + slack && b.0 <= a.1 + slack
}

/// Edge snaps for plane `a` against neighbor `b`.
fn edge_snaps(a: &Plane, b: &Plane, params: &MergeParams, out: &mut Vec<Snap>) {
    let fuse = params.edge_fuse_dist;
    let basis = a.basis();
    let (lo, hi, _) = a.local_box();
    let na = a.normal();
    let nb = b.normal();
    let dot = na.dot(&nb).abs();
    for k in 0..2 {
        let axis = basis.axis(k);
        let other = basis.axis(1 - k);
        let align = axis.dot(&nb);
        if dot < 1.0 - params.coplanar_thresh && align.abs() > params.coplanar_thresh {
            // Perpendicular neighbor whose plane crosses this axis.
            let target = b.distance() / align;
            let (gap_lo, gap_hi) = ((lo[k] - target).abs(), (hi[k] - target).abs());
            let (edge, gap) = if gap_lo <= gap_hi { (k, gap_lo) } else { (k + 2, gap_hi) };
            if gap == 0.0 || gap > fuse {
                continue;
            }
            // The snapped edge must actually reach the neighbor: b spans this
            // plane's height and the two share extent along the edge.
            let b_across = span_along(b, &na);
            let a_height = na.dot(&a.center());
            let a_along = span_along(a, &other);
            let b_along = span_along(b, &other);
            if intervals_touch(b_across, (a_height, a_height), fuse) && intervals_touch(a_along, b_along, 0.0) {
                out.push(Snap { edge, value: target, gap });
            }
        } else if dot > params.coplanar_thresh && na.dot(&(b.center() - a.center())).abs() <= fuse {
            // Nearly coplanar neighbor: close the gap between facing edges
            // from both sides, each plane moving halfway.
            let b_k = span_along(b, &axis);
            let a_other = span_along(a, &other);
            let b_other = span_along(b, &other);
            if !intervals_touch(a_other, b_other, 0.0) {
                continue;
            }
            if b_k.0 > hi[k] && b_k.0 - hi[k] <= fuse {
                let gap = b_k.0 - hi[k];
                out.push(Snap { edge: k + 2, value: hi[k] + 0.5 * gap, gap });
            } else if b_k.1 < lo[k] && lo[k] - b_k.1 <= fuse {
                let gap = lo[k] - b_k.1;
                out.push(Snap { edge: k, value: lo[k] - 0.5 * gap, gap });
            }
        }
    }
}

/// Snaps plane edges that lie within `edge_fuse_dist` of a perpendicular or
/// coplanar neighbor onto the shared line. Snaps are computed against the
/// unmodified set and applied together; per edge the smallest gap wins.
/// Only extents change, so normals and span directions are preserved.
pub fn fuse_edges(planes: &[Plane], params: &MergeParams) -> Vec<Plane> {
    if params.edge_fuse_dist == 0.0 {
        return planes.to_vec();
    }
    let mut snaps = Vec::new();
    planes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            snaps.clear();
            for (j, b) in planes.iter().enumerate() {
                if i != j {
                    edge_snaps(a, b, params, &mut snaps);
                }
            }
            if snaps.is_empty() {
                return *a;
            }
            let (mut lo, mut hi, z) = a.local_box();
            for edge in 0..4 {
                let best = snaps.iter().filter(|s| s.edge == edge).min_by(|x, y| x.gap.total_cmp(&y.gap));
                if let Some(s) = best {
                    if edge < 2 {
                        lo[edge] = s.value;
                    } else {
                        hi[edge - 2] = s.value;
                    }
                }
            }
            if !(hi[0] > lo[0] && hi[1] > lo[1]) {
                return *a;
            }
            Plane::from_basis_box(&a.basis(), lo, hi, z).unwrap_or(*a)
        })
        .collect()
}

/// Drops small planes, fuses nearby edges and re-saturates.
pub fn cleanup_planes(planes: Vec<Plane>, params: &MergeParams) -> Vec<Plane> {
    let kept: Vec<Plane> = planes.into_iter().filter(|p| p.area() >= params.min_area).collect();
    let fused = fuse_edges(&kept, params);
    saturate(fused, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapMetadata {
    pub frame_count: u64,
    pub revision: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    planes: Vec<PlaneRecord>,
    metadata: MapMetadata,
}

/// World-frame plane map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaneMap {
    pub planes: PlaneSet,
    /// Frame ids merged in at each revision. Not serialized.
    pub source_log: Vec<Vec<u64>>,
    pub frame_count: u64,
    pub revision: u64,
}

impl PlaneMap {
    pub fn new() -> Self {
        PlaneMap::default()
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    /// Merges one world-frame plane set, then cleans up.
    pub fn merge_frame(&mut self, frame_id: u64, world_set: &PlaneSet, params: &MergeParams) {
        let merged = merge_plane_sets(&self.planes, world_set, params);
        self.planes = PlaneSet::new(cleanup_planes(merged.into_planes(), params));
        self.frame_count += 1;
        self.revision += 1;
        self.source_log.push(vec![frame_id]);
    }

    pub fn to_json(&self) -> Result<String> {
        let f = MapFile {
            planes: self.planes.iter().map(PlaneRecord::from).collect(),
            metadata: MapMetadata { frame_count: self.frame_count, revision: self.revision },
        };
        Ok(serde_json::to_string(&f)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MapFile = serde_json::from_str(text)?;
        let planes = f.planes.into_iter().map(Plane::try_from).collect::<Result<Vec<_>>>()?;
        Ok(PlaneMap {
            planes: PlaneSet::new(planes),
            source_log: Vec::new(),
            frame_count: f.metadata.frame_count,
            revision: f.metadata.revision,
        })
    }
}

/// Cleans up planes in isolation, as applied to a fresh map.
pub fn cleanup_map(map: &PlaneMap, params: &MergeParams) -> PlaneMap {
    PlaneMap { planes: PlaneSet::new(cleanup_planes(map.planes.planes().to_vec(), params)), ..map.clone() }
}

/// Rebuilds the map from local plane sets and (re-optimized) poses, in frame
/// order, with the same merge and cleanup steps as incremental mapping.
pub fn regenerate(plane_sets: &[(u64, PlaneSet)], poses: &[Pose], params: &MergeParams) -> Result<PlaneMap> {
    if plane_sets.len() != poses.len() {
        return Err(Error::LengthMismatch { left: plane_sets.len(), right: poses.len() });
    }
    let mut map = PlaneMap::new();
    for ((id, set), pose) in plane_sets.iter().zip(poses) {
        map.merge_frame(*id, &set.transformed(pose), params);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(c: [f64; 3], sx: [f64; 3], sy: [f64; 3]) -> Plane {
        Plane::new(c.into(), sx.into(), sy.into()).unwrap()
    }

    fn floor(c: [f64; 3], size: f64) -> Plane {
        plane(c, [size, 0.0, 0.0], [0.0, size, 0.0])
    }

    fn close(a: &Plane, b: &Plane, tol: f64) -> bool {
        (a.center() - b.center()).norm() < tol
            && (a.span_x() - b.span_x()).norm() < tol
            && (a.span_y() - b.span_y()).norm() < tol
    }

    #[test]
    fn merge_condition_cases() {
        let p = floor([0.0; 3], 1.0);
        let params = MergeParams::default();
        assert!(merge_condition(&p, &p, &params));
        let tight = MergeParams { dist_thresh: 0.1, ..params.clone() };
        assert!(!merge_condition(&p, &floor([0.0, 0.0, 1.0], 1.0), &tight));
        assert!(!merge_condition(&p, &floor([10.0, 0.0, 0.0], 1.0), &params));
        let wall = plane([0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
        assert!(!merge_condition(&p, &wall, &params));
        // Touching boxes count as overlapping.
        assert!(merge_condition(&p, &floor([1.0, 0.0, 0.0], 1.0), &params));
    }

    #[test]
    fn overlapping_squares_merge_to_union() {
        let m = PlaneSet::new(vec![floor([0.0; 3], 1.0)]);
        let n = PlaneSet::new(vec![floor([0.5, 0.0, 0.0], 1.0)]);
        let out = merge_plane_sets(&m, &n, &MergeParams::default());
        assert_eq!(out.len(), 1);
        assert!(close(&out.planes()[0], &plane([0.25, 0.0, 0.0], [1.5, 0.0, 0.0], [0.0, 1.0, 0.0]), 1e-12));
    }

    #[test]
    fn disjoint_orthogonal_planes_pass_through() {
        let a = floor([0.0; 3], 1.0);
        let b = plane([5.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
        let out = merge_plane_sets(&PlaneSet::new(vec![a]), &PlaneSet::new(vec![b]), &MergeParams::default());
        assert_eq!(out.planes(), &[a, b]);
    }

    #[test]
    fn merged_height_is_area_weighted() {
        let a = floor([0.0, 0.0, 0.0], 1.0);
        let b = plane([0.5, 0.0, 0.1], [3.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let m = merge_group(&a, &[b]);
        assert!((m.center().z - 0.075).abs() < 1e-12);
    }

    #[test]
    fn saturation_chains_through_intermediates() {
        // a and c only meet once b has extended a.
        let a = floor([0.0; 3], 1.0);
        let b = floor([0.9, 0.0, 0.0], 1.0);
        let c = floor([1.8, 0.0, 0.0], 1.0);
        let out = saturate(vec![a, c, b], &MergeParams::default());
        assert_eq!(out.len(), 1);
        assert!((out[0].extent_x() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn tiny_fragment_removed() {
        let map = PlaneMap { planes: PlaneSet::new(vec![floor([0.0; 3], 0.1), floor([5.0, 0.0, 0.0], 1.0)]), ..Default::default() };
        let out = cleanup_map(&map, &MergeParams::default());
        assert_eq!(out.len(), 1);
        assert!((out.planes.planes()[0].center().x - 5.0).abs() < 1e-12);
    }

    #[test]
    fn wall_floor_gap_closed() {
        let f = floor([0.0; 3], 4.0);
        let wall = plane([2.03, 0.0, 1.515], [0.0, 4.0, 0.0], [0.0, 0.0, 2.97]);
        let params = MergeParams { edge_fuse_dist: 0.1, ..Default::default() };
        let out = cleanup_planes(vec![f, wall], &params);
        assert_eq!(out.len(), 2);
        let (lo, hi, _) = out[0].local_box();
        assert!((hi[0] - 2.03).abs() < 1e-12 && (lo[0] + 2.0).abs() < 1e-12);
        let wall_bottom = out[1].corners().iter().map(|c| c.z).fold(f64::INFINITY, f64::min);
        assert!(wall_bottom.abs() < 1e-12);
        assert!((out[1].normal() - wall.normal()).norm() < 1e-15);
        assert!((out[0].normal() - f.normal()).norm() < 1e-15);
    }

    #[test]
    fn coplanar_gap_closed_halfway() {
        let a = floor([0.0; 3], 1.0);
        let b = floor([1.1, 0.0, 0.0], 1.0);
        let params = MergeParams::default();
        let fused = fuse_edges(&[a, b], &params);
        let a_hi = fused[0].local_box().1[0];
        let b_lo = fused[1].local_box().0[0];
        assert!((a_hi - 0.55).abs() < 1e-12 && (b_lo - 0.55).abs() < 1e-12);
        assert_eq!(cleanup_planes(vec![a, b], &params).len(), 1);
    }

    #[test]
    fn clean_map_unchanged() {
        let f = floor([0.0; 3], 4.0);
        let wall = plane([2.0, 0.0, 1.5], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0]);
        let far = plane([20.0, 0.0, 1.5], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0]);
        let out = cleanup_planes(vec![f, wall, far], &MergeParams::default());
        assert_eq!(out, vec![f, wall, far]);
    }

    #[test]
    fn regenerate_cases() {
        let params = MergeParams::default();
        let set = PlaneSet::new(vec![floor([0.0; 3], 2.0), plane([1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0])]);
        let pose = Pose::from_translation(Vec3::new(1.0, 2.0, 0.0));
        let single = regenerate(&[(0, set.clone())], &[pose], &params).unwrap();
        assert_eq!(single.planes.planes(), cleanup_planes(set.transformed(&pose).into_planes(), &params).as_slice());
        let double = regenerate(&[(0, set.clone()), (1, set.clone())], &[pose, pose], &params).unwrap();
        assert_eq!(double.len(), 2);
        for (a, b) in double.planes.iter().zip(single.planes.iter()) {
            assert!(close(a, b, 1e-12));
        }
        assert_eq!(double.source_log, vec![vec![0], vec![1]]);
        assert!(matches!(regenerate(&[(0, set)], &[], &params), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let mut map = PlaneMap::new();
        map.merge_frame(
            3,
            &PlaneSet::new(vec![plane([0.1, 0.2, 0.3], [0.7, 0.1, 0.0], [-0.1, 0.7, 0.0]), floor([9.0, 1.0 / 3.0, 0.0], 1.0)]),
            &MergeParams::default(),
        );
        let text = map.to_json().unwrap();
        let back = PlaneMap::from_json(&text).unwrap();
        assert_eq!(back.frame_count, 1);
        assert_eq!(back.revision, 1);
        for (a, b) in map.planes.iter().zip(back.planes.iter()) {
            assert!(close(a, b, 1e-12));
        }
        assert_eq!(back.to_json().unwrap(), text);
        assert!(PlaneMap::from_json(r#"{"planes":[],"metadata":{"frame_count":0,"revision":0},"x":1}"#).is_err());
    }
}
