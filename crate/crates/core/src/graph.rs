//! Pose graph of per-frame absolute poses joined by relative-pose edges.
//!
//! Relative poses follow [`compose`]: an edge `i -> j` measures
//! `(R_j R_iᵀ, R_iᵀ (t_j - t_i))`.

use std::fmt::Write as _;

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compose, relative_between, Mat3, PlaneSet, Pose, Vec3};
use crate::registration::{match_planes, register_with_correspondences, RegistrationParams, RegistrationResult};
use crate::so3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::Odometry => "odometry",
            EdgeKind::LoopClosure => "loop_closure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    /// Position in the graph; node ids are dense and increasing.
    pub id: usize,
    /// Scan the node was created from.
    pub frame_id: u64,
    pub pose: Pose,
    /// Planes in the node's local frame.
    pub plane_set: PlaneSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub relative: Pose,
    pub kind: EdgeKind,
    pub information: Information,
}

/// Edge weight matrix over the `[rotation; translation]` error.
pub type Information = Matrix6<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    /// Loop candidates must lie closer than this (m).
    pub loop_radius: f64,
    /// Loop candidates must be more than this many nodes apart.
    pub min_separation: usize,
    pub max_iterations: usize,
    /// Stop once an accepted step improves chi² by less than this.
    pub min_improvement: f64,
    pub max_step_halvings: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { loop_radius: 3.0, min_separation: 10, max_iterations: 100, min_improvement: 1e-9, max_step_halvings: 10 }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_radius >= 0.0) || self.max_iterations == 0 || !(self.min_improvement >= 0.0) {
            return Err(Error::Config("graph: loop_radius, max_iterations or min_improvement out of range".into()));
        }
        Ok(())
    }
}

/// Outcome of [`PoseGraph::optimize`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizeReport {
    /// chi² before the first iteration and after every accepted step.
    pub chi2_history: Vec<f64>,
    pub iterations: usize,
    /// The linear system could not be solved; poses were left unchanged.
    pub singular: bool,
    /// False when there was nothing to optimize (no loop edges).
    pub ran: bool,
}

impl OptimizeReport {
    pub fn final_chi2(&self) -> f64 {
        self.chi2_history.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// `[log(R_pred R_zᵀ); R_iᵀ(t_j - t_i) - t_z]` with `R_pred = R_j R_iᵀ`.
pub fn edge_error(pi: &Pose, pj: &Pose, z: &Pose) -> Vector6<f64> {
    let w = so3::log(&(pj.rotation * pi.rotation.transpose() * z.rotation.transpose()));
    let t = pi.rotation.tr_mul(&(pj.translation - pi.translation)) - z.translation;
    Vector6::new(w.x, w.y, w.z, t.x, t.y, t.z)
}

/// Jacobians of [`edge_error`] with respect to the node increments
/// `[δt; δφ]`, applied as `t <- t + δt`, `R <- exp(δφ) R`.
pub fn edge_jacobians(pi: &Pose, pj: &Pose, z: &Pose) -> (Matrix6<f64>, Matrix6<f64>) {
    let w = so3::log(&(pj.rotation * pi.rotation.transpose() * z.rotation.transpose()));
    let dt = pj.translation - pi.translation;
    let rit = pi.rotation.transpose();
    let mut ji = Matrix6::zeros();
    let mut jj = Matrix6::zeros();
    // Rotation rows.
    ji.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-so3::right_jacobian_inv(&w) * z.rotation));
    jj.fixed_view_mut::<3, 3>(0, 3).copy_from(&so3::left_jacobian_inv(&w));
    // Translation rows.
    ji.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-rit));
    ji.fixed_view_mut::<3, 3>(3, 3).copy_from(&(rit * so3::hat(&dt)));
    jj.fixed_view_mut::<3, 3>(3, 0).copy_from(&rit);
    (ji, jj)
}

fn apply_increment(p: &Pose, dx: &[f64]) -> Pose {
    let dt = Vec3::new(dx[0], dx[1], dx[2]);
    let dphi = Vec3::new(dx[3], dx[4], dx[5]);
    let mut r = so3::exp(&dphi) * p.rotation;
    if so3::orthonormality_error(&r) > 1e-12 {
        r = so3::orthonormalize(&r);
    }
    Pose::from_parts_unchecked(r, p.translation + dt)
}

/// Block-sparse symmetric system over the free nodes `1..n`.
struct BlockSystem {
    diag: Vec<Matrix6<f64>>,
    /// Upper off-diagonal blocks `(row, col, block)` with `row < col`.
    off: Vec<(usize, usize, Matrix6<f64>)>,
}

impl BlockSystem {
    fn mul(&self, x: &[Vector6<f64>], out: &mut [Vector6<f64>]) {
        for (o, (d, v)) in out.iter_mut().zip(self.diag.iter().zip(x)) {
            *o = d * v;
        }
        for (r, c, b) in &self.off {
            out[*r] += b * x[*c];
            out[*c] += b.transpose() * x[*r];
        }
    }

    /// Preconditioned conjugate gradients with block-Jacobi preconditioning.
    fn solve(&self, rhs: &[Vector6<f64>]) -> Option<Vec<Vector6<f64>>> {
        let n = rhs.len();
        let precond: Vec<Matrix6<f64>> = self.diag.iter().map(|d| d.try_inverse()).collect::<Option<_>>()?;
        let dot = |a: &[Vector6<f64>], b: &[Vector6<f64>]| a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>();
        let mut x = vec![Vector6::zeros(); n];
        let mut r = rhs.to_vec();
        let mut z: Vec<Vector6<f64>> = precond.iter().zip(&r).map(|(m, v)| m * v).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let rhs_norm = dot(rhs, rhs).sqrt();
        if rhs_norm == 0.0 {
            return Some(x);
        }
        let mut ap = vec![Vector6::zeros(); n];
        for _ in 0..(20 * 6 * n).max(100) {
            self.mul(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return None;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += p[k] * alpha;
                r[k] -= ap[k] * alpha;
            }
            if dot(&r, &r).sqrt() <= 1e-12 * rhs_norm {
                return Some(x);
            }
            for k in 0..n {
                z[k] = precond[k] * r[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + p[k] * beta;
            }
        }
        x.iter().all(|v| v.iter().all(|c| c.is_finite())).then_some(x)
    }
}

impl PoseGraph {
    /// Graph holding the first frame at `initial`.
    pub fn new(initial: Pose, frame_id: u64, plane_set: PlaneSet) -> Self {
        PoseGraph { nodes: vec![GraphNode { id: 0, frame_id, pose: initial, plane_set }], edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.nodes.iter().map(|n| n.pose).collect()
    }

    pub fn loop_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::LoopClosure).count()
    }

    /// Appends a node at `compose(previous, relative)` with an odometry edge.
    pub fn add_frame(&mut self, frame_id: u64, plane_set: PlaneSet, relative: Pose) -> usize {
        let prev = self.nodes.last().expect("graph has a first node");
        let id = self.nodes.len();
        let mut pose = compose(&prev.pose, &relative);
        // Chained products drift off SO(3); project back before it compounds.
        if so3::orthonormality_error(&pose.rotation) > 1e-12 {
            pose.rotation = so3::orthonormalize(&pose.rotation);
        }
        self.edges.push(GraphEdge {
            from: id - 1,
            to: id,
            relative,
            kind: EdgeKind::Odometry,
            information: Matrix6::identity(),
        });
        self.nodes.push(GraphNode { id, frame_id, pose, plane_set });
        id
    }

    /// Nodes within `radius` of node `k` and more than `min_separation`
    /// nodes away from it, in increasing id order.
    pub fn find_loop_candidates(&self, k: usize, radius: f64, min_separation: usize) -> Vec<usize> {
        let tk = self.nodes[k].pose.translation;
        self.nodes
            .iter()
            .filter(|n| n.id.abs_diff(k) > min_separation)
            .filter(|n| (n.pose.translation - tk).norm() < radius)
            .map(|n| n.id)
            .collect()
    }

    /// Closest candidate of [`find_loop_candidates`]; lowest id on ties.
    pub fn nearest_loop_candidate(&self, k: usize, radius: f64, min_separation: usize) -> Option<usize> {
        let tk = self.nodes[k].pose.translation;
        self.find_loop_candidates(k, radius, min_separation)
            .into_iter()
            .min_by(|&a, &b| {
                let da = (self.nodes[a].pose.translation - tk).norm();
                let db = (self.nodes[b].pose.translation - tk).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            })
    }

    /// Registers node `k` against node `j` and returns the loop edge `j -> k`
    /// without adding it.
    ///
    /// Correspondences come from the world-frame plane sets under the current
    /// estimates; the registration itself runs on the local-frame sets,
    /// started from the currently estimated relative rotation.
    pub fn loop_measurement(
        &self,
        k: usize,
        j: usize,
        params: &RegistrationParams,
    ) -> Result<(RegistrationResult, GraphEdge)> {
        if k == j {
            return Err(Error::Graph("cannot close a loop from a node to itself".into()));
        }
        let (nk, nj) = match (self.nodes.get(k), self.nodes.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Graph(format!("loop closure between unknown nodes {k} and {j}"))),
        };
        let world_k = nk.plane_set.transformed(&nk.pose);
        let world_j = nj.plane_set.transformed(&nj.pose);
        let corr = match_planes(&world_k, &world_j, params.alpha, params.beta, params.max_correspondence_cost)?;
        let guess: Mat3 = nj.pose.rotation.transpose() * nk.pose.rotation;
        let reg = register_with_correspondences(&nk.plane_set, &nj.plane_set, &corr, params, Some(&guess))?;
        // `reg` maps k-local into j-local coordinates; express it as the
        // relative pose from j to k.
        let rj = nj.pose.rotation;
        let relative = Pose::from_parts_unchecked(rj * reg.pose.rotation * rj.transpose(), reg.pose.translation);
        let edge = GraphEdge { from: j, to: k, relative, kind: EdgeKind::LoopClosure, information: Matrix6::identity() };
        Ok((reg, edge))
    }

    /// [`loop_measurement`](Self::loop_measurement), adding the edge on success.
    pub fn close_loop(&mut self, k: usize, j: usize, params: &RegistrationParams) -> Result<RegistrationResult> {
        let (reg, edge) = self.loop_measurement(k, j, params)?;
        self.edges.push(edge);
        Ok(reg)
    }

    /// `Σ eᵀ Ω e` over all edges.
    pub fn chi2(&self) -> f64 {
        self.chi2_with(&self.poses())
    }

    fn chi2_with(&self, poses: &[Pose]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let err = edge_error(&poses[e.from], &poses[e.to], &e.relative);
                err.dot(&(e.information * err))
            })
            .sum()
    }

    fn linearize(&self, poses: &[Pose]) -> (BlockSystem, Vec<Vector6<f64>>) {
        let n = poses.len() - 1;
        let mut diag = vec![Matrix6::zeros(); n];
        let mut grad = vec![Vector6::zeros(); n];
        let mut off: Vec<(usize, usize, Matrix6<f64>)> = Vec::new();
        for e in &self.edges {
            let err = edge_error(&poses[e.from], &poses[e.to], &e.relative);
            let (ji, jj) = edge_jacobians(&poses[e.from], &poses[e.to], &e.relative);
            let (a, b) = (e.from, e.to);
            if a > 0 {
                diag[a - 1] += ji.transpose() * e.information * ji;
                grad[a - 1] += ji.transpose() * e.information * err;
            }
            if b > 0 {
                diag[b - 1] += jj.transpose() * e.information * jj;
                grad[b - 1] += jj.transpose() * e.information * err;
            }
            if a > 0 && b > 0 {
                let (r, c, blk) = if a < b {
                    (a - 1, b - 1, ji.transpose() * e.information * jj)
                } else {
                    (b - 1, a - 1, jj.transpose() * e.information * ji)
                };
                off.push((r, c, blk));
            }
        }
        off.sort_by_key(|o| (o.0, o.1));
        let mut merged: Vec<(usize, usize, Matrix6<f64>)> = Vec::with_capacity(off.len());
        for (r, c, b) in off {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += b,
                _ => merged.push((r, c, b)),
            }
        }
        (BlockSystem { diag, off: merged }, grad)
    }

    /// Gauss-Newton over all poses with node 0 fixed. Steps that do not
    /// lower chi² are halved; the run stops when no step helps, when the
    /// improvement drops below `min_improvement`, or after `max_iterations`.
    /// A graph without loop edges is left untouched.
    pub fn optimize(&mut self, params: &GraphParams) -> OptimizeReport {
        let mut report = OptimizeReport::default();
        if self.loop_edge_count() == 0 || self.nodes.len() < 2 {
            return report;
        }
        report.ran = true;
        let mut poses = self.poses();
        let mut chi2 = self.chi2_with(&poses);
        report.chi2_history.push(chi2);
        while report.iterations < params.max_iterations {
            report.iterations += 1;
            let (system, grad) = self.linearize(&poses);
            let rhs: Vec<Vector6<f64>> = grad.iter().map(|g| -g).collect();
            let Some(dx) = system.solve(&rhs) else {
                report.singular = true;
                return report;
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=params.max_step_halvings {
                let cand: Vec<Pose> = std::iter::once(poses[0])
                    .chain(poses[1..].iter().zip(&dx).map(|(p, d)| apply_increment(p, (d * scale).as_slice())))
                    .collect();
                let c = self.chi2_with(&cand);
                if c < chi2 {
                    accepted = Some((cand, c));
                    break;
                }
                scale *= 0.5;
            }
            let Some((cand, c)) = accepted else {
                break;
            };
            let improvement = chi2 - c;
            poses = cand;
            chi2 = c;
            report.chi2_history.push(c);
            if improvement < params.min_improvement {
                break;
            }
        }
        for (node, p) in self.nodes.iter_mut().zip(poses) {
            node.pose = p;
        }
        report
    }

    /// Edge-list dump: `VERTEX k tx ty tz qx qy qz qw` per node, then
    /// `EDGE from to tx ty tz qx qy qz qw kind` per edge.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let t = n.pose.translation;
            let q = n.pose.quaternion_xyzw();
            let _ = writeln!(s, "VERTEX {} {} {} {} {} {} {} {}", n.id, t.x, t.y, t.z, q[0], q[1], q[2], q[3]);
        }
        for e in &self.edges {
            let t = e.relative.translation;
            let q = e.relative.quaternion_xyzw();
            let _ = writeln!(
                s,
                "EDGE {} {} {} {} {} {} {} {} {} {}",
                e.from,
                e.to,
                t.x,
                t.y,
                t.z,
                q[0],
                q[1],
                q[2],
                q[3],
                e.kind.as_str()
            );
        }
        s
    }

    /// Relative pose currently predicted for an edge.
    pub fn predicted(&self, e: &GraphEdge) -> Pose {
        relative_between(&self.nodes[e.from].pose, &self.nodes[e.to].pose)
    }
}
